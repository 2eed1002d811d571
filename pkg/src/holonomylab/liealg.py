"""Lie brackets of evaluable vector fields and numerical span estimation.

A vector field here is anything with `.dim` and `.taylor(center, order)`
returning one jet per component; centers may carry a trailing batch axis, in
which case all evaluation is columnwise.  Brackets are formed lazily:
[X, Y]^i = X^j dY^i/dx^j - Y^j dX^i/dx^j consumes one jet order from each
parent, so a field of finite order capability eventually exhausts and the
bracket reports the order it would have needed.

Spans are measured numerically: fields are evaluated on a fixed list of
sample points, stacked into a matrix, and the rank is the number of singular
values above a relative tolerance.  The closure generator brackets fields
breadth first and admits a candidate only if it raises that rank, so the
result is a finite-dimensional lower bound of the generated algebra, never a
claim about its full size.  The inclusion chain report applies this to the
curvature fields and the covariant-derivative closure over one base point,
whose spans bound the holonomy algebra from below; the holonomy algebra
itself has no generating procedure here and is reported as such.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .jets import Jet, JetOrderError, jet_space
from .expressions import parse_expression

__all__ = [
    "PolynomialField",
    "ExpressionField",
    "CallableField",
    "BracketField",
    "lie_bracket",
    "field_values",
    "FieldSpan",
    "RankReport",
    "numerical_rank",
    "GenerationRecord",
    "ClosureTrace",
    "lie_closure",
    "ChainReport",
    "inclusion_chain_report",
    "rank_report_csv",
    "DEFAULT_TAU",
]

DEFAULT_TAU = 1e-7


def field_label(f, index: int | None = None) -> str:
    lab = getattr(f, "label", None) or getattr(f, "name", None)
    if lab:
        return str(lab)
    return f"field{index}" if index is not None else "field"


def _seed_jets(dim: int, center, order: int) -> list:
    center = np.asarray(center, dtype=float)
    if center.shape[0] != dim:
        raise ValueError(f"center has {center.shape[0]} components, field has {dim}")
    space = jet_space(dim, order)
    if order == 0:  # a cap-0 space has no linear slots to seed
        return [Jet.constant(space, center[i]) for i in range(dim)]
    return [Jet.variable(space, i, center[i]) for i in range(dim)]


def _as_jet(value, like: Jet) -> Jet:
    # expression and polynomial evaluators may collapse to a plain number
    if isinstance(value, Jet):
        return value
    return like * 0.0 + float(value)


# -- concrete fields ----------------------------------------------------------


class PolynomialField:
    """A polynomial vector field; component i is {exponent tuple: coefficient}."""

    def __init__(self, dim: int, components, name: str = ""):
        self.dim = int(dim)
        if len(components) != self.dim:
            raise ValueError("need one component per dimension")
        comps = []
        for comp in components:
            clean = {}
            for expo, coeff in comp.items():
                expo = tuple(int(e) for e in expo)
                if len(expo) != self.dim or any(e < 0 for e in expo):
                    raise ValueError(f"bad exponent tuple {expo}")
                clean[expo] = float(coeff)
            comps.append(clean)
        self.components = comps
        self.name = name
        self.max_order = None

    def taylor(self, center, order: int) -> list:
        seeds = _seed_jets(self.dim, center, order)
        out = []
        for comp in self.components:
            acc = seeds[0] * 0.0
            for expo, coeff in sorted(comp.items()):
                term = coeff
                for v, e in zip(seeds, expo):
                    for _ in range(e):
                        term = term * v
                acc = acc + term
            out.append(acc)
        return out


class ExpressionField:
    """A vector field whose components are expression strings in the
    coordinates, e.g. ExpressionField(("x", "y"), ("-y", "x"))."""

    def __init__(self, variables, exprs, name: str = ""):
        variables = tuple(variables)
        exprs = tuple(exprs)
        if len(exprs) != len(variables):
            raise ValueError("need one component expression per coordinate")
        self.dim = len(variables)
        self.exprs = [parse_expression(text, variables) for text in exprs]
        self.name = name
        self.max_order = None

    def taylor(self, center, order: int) -> list:
        seeds = _seed_jets(self.dim, center, order)
        return [_as_jet(expr(*seeds), seeds[0]) for expr in self.exprs]


class CallableField:
    """A vector field from a jets-to-jets callable.

    `max_order` declares the largest jet order the callable can honestly
    produce (None for unlimited); requests beyond it are rejected so
    downstream brackets can diagnose exhaustion instead of silently
    truncating.
    """

    def __init__(self, dim: int, fun, name: str = "", max_order: int | None = None):
        self.dim = int(dim)
        self.fun = fun
        self.name = name
        self.max_order = max_order

    def taylor(self, center, order: int) -> list:
        if self.max_order is not None and order > self.max_order:
            raise JetOrderError(
                f"{field_label(self)}: order {order} requested, "
                f"but the field only supports {self.max_order}"
            )
        return list(self.fun(_seed_jets(self.dim, center, order)))


class BracketField:
    """The lazy Lie bracket [X, Y]^i = X^j dY^i/dx^j - Y^j dX^i/dx^j.

    Evaluating at order m pulls order m + 1 from both parents; one derivative
    order is consumed per bracket, which bounds how deep a chain of brackets
    of finite-order fields can go.
    """

    def __init__(self, X, Y):
        if X.dim != Y.dim:
            raise ValueError(f"dimension mismatch: {X.dim} vs {Y.dim}")
        px, py = getattr(X, "p", None), getattr(Y, "p", None)
        if px is not None and py is not None and not np.array_equal(px, py):
            raise ValueError("bracket requires fields over the same base point")
        self.X = X
        self.Y = Y
        self.dim = X.dim
        self.label = f"[{field_label(X)},{field_label(Y)}]"
        capacities = [
            mo for mo in (getattr(X, "max_order", None), getattr(Y, "max_order", None))
            if mo is not None
        ]
        self.max_order = min(capacities) - 1 if capacities else None

    def taylor(self, center, order: int) -> list:
        if self.max_order is not None and order > self.max_order:
            raise JetOrderError(
                f"{self.label}: bracket at order {order} needs order {order + 1} "
                f"parent jets, but only {self.max_order + 1} are available"
            )
        tx = self.X.taylor(center, order + 1)
        ty = self.Y.taylor(center, order + 1)
        n = self.dim
        target = ((n, order),)
        xt = [t.truncated(target) for t in tx]
        yt = [t.truncated(target) for t in ty]
        out = []
        for i in range(n):
            acc = None
            for j in range(n):
                term = xt[j] * ty[i].derivative_table(j) - yt[j] * tx[i].derivative_table(j)
                acc = term if acc is None else acc + term
            out.append(acc)
        return out


def lie_bracket(X, Y) -> BracketField:
    """The bracket field of two jet-evaluable fields on a common domain."""
    return BracketField(X, Y)


# -- spans and ranks -----------------------------------------------------------


def field_values(f, points: np.ndarray) -> np.ndarray:
    """Component values of a field at sample points, shape (dim, K)."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if hasattr(f, "values"):
        return np.asarray(f.values(points), dtype=float)
    jets = f.taylor(points, 0)
    return np.stack([np.atleast_1d(np.asarray(j.value, dtype=float)) for j in jets])


class FieldSpan:
    """Fields with their sample points and the evaluation matrix.

    Row i holds field i's values at every point, point-major, so the matrix
    is rebuilt identically from the same fields and points.
    """

    def __init__(self, fields, points):
        if not fields:
            raise ValueError("need at least one field")
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[1] < 1:
            raise ValueError("need at least one sample point")
        dims = {f.dim for f in fields}
        if len(dims) != 1 or points.shape[0] != dims.pop():
            raise ValueError("fields and points must share one dimension")
        self.fields = list(fields)
        self.points = points
        self.matrix = np.stack([field_values(f, points).T.ravel() for f in self.fields])

    @property
    def num_points(self) -> int:
        return self.points.shape[1]

    def labels(self) -> list:
        return [field_label(f, i) for i, f in enumerate(self.fields)]


@dataclass(frozen=True)
class RankReport:
    """Singular spectrum of an evaluation matrix and the rank it supports."""

    singular_values: tuple
    tau: float
    rank: int
    stabilized: bool
    num_fields: int
    num_points: int

    def to_payload(self) -> dict:
        return {
            "kind": "rank-report",
            "rank": self.rank,
            "tau": self.tau,
            "stabilized": self.stabilized,
            "num_fields": self.num_fields,
            "num_points": self.num_points,
            "singular_values": list(self.singular_values),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, indent=2)


def _matrix_rank(matrix: np.ndarray, tau: float):
    if matrix.size == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        return 0, s
    return int(np.sum(s > tau * s[0])), s


def numerical_rank(fields, points, tau: float = DEFAULT_TAU) -> RankReport:
    """Rank of the span of the fields over the sample points.

    Rank counts singular values above tau times the largest one.  The
    stabilization check recomputes the rank on the first half of the points;
    equality means doubling the sample count did not change the answer.
    """
    span = fields if isinstance(fields, FieldSpan) else FieldSpan(fields, points)
    dim = span.points.shape[0]
    rank, s = _matrix_rank(span.matrix, tau)
    half_pts = max(1, span.num_points // 2)
    half = span.matrix[:, : half_pts * dim]
    half_rank, _ = _matrix_rank(half, tau)
    return RankReport(
        singular_values=tuple(float(v) for v in s),
        tau=float(tau),
        rank=rank,
        stabilized=(half_rank == rank),
        num_fields=len(span.fields),
        num_points=span.num_points,
    )


def rank_report_csv(report: RankReport) -> str:
    """Singular values as CSV (index, value), for plotting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["index", "singular_value"])
    for i, v in enumerate(report.singular_values):
        writer.writerow([i, repr(v)])
    return buf.getvalue()


# -- bracket closure -----------------------------------------------------------


@dataclass(frozen=True)
class GenerationRecord:
    """One breadth-first generation: what was admitted and the rank after."""

    index: int
    new_labels: tuple
    parents: tuple
    rank_after: int

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "new_labels": list(self.new_labels),
            "parents": [list(p) for p in self.parents],
            "rank_after": self.rank_after,
        }


@dataclass
class ClosureTrace:
    """Replayable record of a bracket-closure run."""

    generations: list = dataclass_field(default_factory=list)
    termination: str = ""
    notes: list = dataclass_field(default_factory=list)

    def ranks(self) -> list:
        return [g.rank_after for g in self.generations]

    def to_payload(self) -> dict:
        return {
            "kind": "closure-trace",
            "generations": [g.as_dict() for g in self.generations],
            "termination": self.termination,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, indent=2)


def _default_points(f, count: int = 50) -> np.ndarray:
    """Deterministic sample points matched to the field's domain.

    Fields anchored to a norm and base point sample its indicatrix; plain
    fields get a low-discrepancy block in the unit box.
    """
    norm = getattr(f, "norm", None)
    p = getattr(f, "p", None)
    if norm is not None and p is not None:
        from .transport import indicatrix_samples

        return indicatrix_samples(norm, p, count)
    from scipy.stats import qmc

    sampler = qmc.Halton(d=f.dim, scramble=False)
    sampler.fast_forward(1)  # skip the origin
    return (2.0 * sampler.random(count) - 1.0).T


def lie_closure(generators, depth: int = 3, tau: float = DEFAULT_TAU, points=None):
    """Breadth-first bracket closure of the generators, rank gated.

    Candidate brackets pair every admitted field with at least one field of
    the previous generation; all candidates of a generation are evaluated
    up front, then admission runs in index order, keeping a candidate only
    if it raises the numerical rank on the sample points.  Terminates when a
    full generation admits nothing (rank-stable) or at the depth limit.
    Returns (FieldSpan of admitted fields, ClosureTrace).
    """
    generators = list(generators)
    if not generators:
        raise ValueError("need at least one generator")
    if points is None:
        points = _default_points(generators[0])
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]

    fields = list(generators)
    rows = [field_values(f, points).T.ravel() for f in fields]
    matrix = np.stack(rows)
    rank, _ = _matrix_rank(matrix, tau)
    trace = ClosureTrace()
    frontier = list(range(len(fields)))

    # candidate bracket values only need each parent's order-1 table, which
    # is the expensive part; compute it once per admitted field
    tables: dict = {}

    def order1(idx):
        if idx not in tables:
            try:
                jets = fields[idx].taylor(points, 1)
                n = fields[idx].dim
                vals = np.stack([np.atleast_1d(np.asarray(j.value, float)) for j in jets])
                ders = np.stack(
                    [
                        np.stack(
                            [
                                np.atleast_1d(np.asarray(j.derivative_table(k).value, float))
                                for k in range(n)
                            ]
                        )
                        for j in jets
                    ]
                )
                tables[idx] = (vals, ders)
            except JetOrderError as exc:
                tables[idx] = exc
        return tables[idx]

    for g in range(1, depth + 1):
        frontier_set = set(frontier)
        pairs = [
            (a, b)
            for a in range(len(fields))
            for b in range(a + 1, len(fields))
            if a in frontier_set or b in frontier_set
        ]
        candidates = []
        for a, b in pairs:
            cand = BracketField(fields[a], fields[b])
            ta, tb = order1(a), order1(b)
            bad = next((t for t in (ta, tb) if isinstance(t, JetOrderError)), None)
            if bad is not None:
                trace.notes.append(f"generation {g}: {cand.label} truncated: {bad}")
                continue
            av, ad = ta
            bv, bd = tb
            values = np.einsum("jk,ijk->ik", av, bd) - np.einsum("jk,ijk->ik", bv, ad)
            candidates.append((a, b, cand, values.T.ravel()))
        new_labels, parents, new_indices = [], [], []
        for a, b, cand, row in candidates:
            trial = np.vstack([matrix, row])
            trial_rank, _ = _matrix_rank(trial, tau)
            if trial_rank > rank:
                matrix = trial
                rank = trial_rank
                new_indices.append(len(fields))
                fields.append(cand)
                new_labels.append(cand.label)
                parents.append((field_label(fields[a], a), field_label(fields[b], b)))
        trace.generations.append(
            GenerationRecord(g, tuple(new_labels), tuple(parents), rank)
        )
        if not new_indices:
            trace.termination = "rank-stable"
            break
        frontier = new_indices
    else:
        trace.termination = "depth-limit"

    span = FieldSpan(fields, points)
    return span, trace


# -- the inclusion chain -------------------------------------------------------

HOL_NOTE = (
    "holonomy algebra not directly computable: membership is defined by "
    "tangency, with no generating procedure; the reported ranks bound it "
    "from below"
)


@dataclass(frozen=True)
class ChainReport:
    """Ranks of the curvature algebra and its covariant-derivative closure."""

    norm_name: str
    base_point: tuple
    depth: int
    curvature: RankReport
    ihol: RankReport
    curvature_trace: ClosureTrace
    ihol_trace: ClosureTrace
    ambient_bound: int
    hol_note: str = HOL_NOTE

    @property
    def ranks(self) -> tuple:
        return (self.curvature.rank, self.ihol.rank)

    def to_payload(self) -> dict:
        return {
            "kind": "chain-report",
            "norm": self.norm_name,
            "base_point": list(self.base_point),
            "depth": self.depth,
            "ranks": {"curvature": self.curvature.rank, "ihol": self.ihol.rank},
            "ambient_bound": self.ambient_bound,
            "holonomy": self.hol_note,
            "curvature_report": self.curvature.to_payload(),
            "ihol_report": self.ihol.to_payload(),
            "curvature_trace": self.curvature_trace.to_payload(),
            "ihol_trace": self.ihol_trace.to_payload(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, indent=2)


def inclusion_chain_report(
    norm, p, depth: int = 2, tau: float = DEFAULT_TAU, num_points: int = 50
) -> ChainReport:
    """Ranks of the algebra chain at p: curvature fields vs their ihol closure.

    The curvature algebra is the bracket closure of the plain curvature
    fields; the infinitesimal holonomy algebra additionally closes under
    covariant derivatives along the base directions (built in the curvature
    module).  Both ranks use the same indicatrix sample points, so the
    inclusion shows up as a plain inequality of integers.
    """
    from .curvature import ihol_generators
    from .transport import indicatrix_samples

    p = np.asarray(p, dtype=float)
    gen = ihol_generators(norm, p, depth=depth)
    points = indicatrix_samples(norm, p, num_points)

    base = gen.up_to_depth(0)
    curv_span, curv_trace = lie_closure(base, depth=depth, tau=tau, points=points)
    ihol_span, ihol_trace = lie_closure(list(gen), depth=depth, tau=tau, points=points)
    curv_report = numerical_rank(curv_span, points, tau)
    ihol_report = numerical_rank(ihol_span, points, tau)
    ambient = (norm.dim - 1) * num_points
    return ChainReport(
        norm_name=norm.name,
        base_point=tuple(float(v) for v in p),
        depth=depth,
        curvature=curv_report,
        ihol=ihol_report,
        curvature_trace=curv_trace,
        ihol_trace=ihol_trace,
        ambient_bound=ambient,
    )
