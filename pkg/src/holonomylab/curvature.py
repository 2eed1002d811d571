"""Curvature vector fields on indicatrices and their covariant calculus.

The holonomy of a parallelogram loop at scale t, differentiated twice at
t = 0, produces a vertical vector field on the indicatrix at the base point:
the curvature field of the two loop directions.  This module computes those
fields directly from spray jets,

    xi^k(x, y) = R^k_{ij}(x, y) X^i(x) Y^j(x),
    R^k_{ij}   = dG^k_i/dx^j - dG^k_j/dx^i + G^l_i G^k_{jl} - G^l_j G^k_{il},

with G^k_i, G^k_{ij} the y-derivatives of the spray.  The sign is pinned by
the transport oracle: the second t-derivative of the parallelogram family
h_t(v) equals 2 xi(v), with no sign freedom left.

Fields are stored as jet evaluators over the bundle chart, so every field
can report its x- and y-derivatives to any order its construction supports.
From the curvature fields, two operations generate larger families:

  * the fiber bracket [xi, eta]^i = xi^k d eta^i/dy^k - eta^k d xi^i/dy^k,
  * the horizontal covariant derivative
    (D_X xi)^i = X^j (d xi^i/dx^j - G^k_j d xi^i/dy^k + G^i_{jk} xi^k),

whose closure up to a fixed depth is the generator set of the infinitesimal
holonomy algebra at the base point.  Before entering that closure, fields
are radially extended to homogeneity degree zero, xi(y) -> xi(y / F(y)),
which makes y-derivatives along the ray well defined; values on the
indicatrix itself do not change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .jets import Jet, SmoothMap, compose_table, grouped_space, jet_space
from .finsler import FinslerNorm, spray_jets

__all__ = [
    "PROVENANCE_TAGS",
    "IndicatrixVectorField",
    "coordinate_fields",
    "constant_base_field",
    "curvature_field",
    "berwald_covariant_derivative",
    "fiber_bracket",
    "horizontal_field",
    "vertical_field",
    "GeneratorSet",
    "ihol_generators",
]

PROVENANCE_TAGS = ("curvature", "bracket", "covariant-derivative", "user")


# -- fields on one indicatrix --------------------------------------------------


class IndicatrixVectorField:
    """A vertical vector field along the indicatrix over the base point p.

    Only fiber components are stored, so verticality is structural.  The
    field is a jet evaluator: `bundle_jets(xcap, ycap, y_center)` returns the
    components xi^i as jets in the bundle space with per-group caps
    (xcap, ycap), seeded at (p, y_center).  Fields built from spray data are
    therefore fibered: they know their x-dependence near p, which is what the
    covariant derivative consumes.

    `homogeneity` records the radial degree of the components in y when it
    is known: 1 for raw curvature fields, 0 after `radialized()`, None for
    fields without a definite degree (covariant derivatives, brackets, user
    fields).
    """

    def __init__(
        self,
        norm: FinslerNorm,
        p,
        evaluator,
        provenance: str,
        label: str,
        homogeneity=None,
        depth: int = 0,
        parents: tuple = (),
    ):
        if provenance not in PROVENANCE_TAGS:
            raise ValueError(
                f"unknown provenance {provenance!r}; expected one of {PROVENANCE_TAGS}"
            )
        self.norm = norm
        self.p = norm.manifold.require(np.asarray(p, dtype=float))
        self._evaluator = evaluator
        self.provenance = provenance
        self.label = label
        self.homogeneity = homogeneity
        self.depth = depth
        self.parents = tuple(parents)

    @property
    def dim(self) -> int:
        """Fiber dimension; fields act on y-space."""
        return self.norm.dim

    def __repr__(self):
        return (
            f"IndicatrixVectorField({self.label!r}, provenance={self.provenance!r}, "
            f"depth={self.depth})"
        )

    def bundle_jets(self, xcap: int, ycap: int, y_center) -> list:
        """Component jets in the bundle space ((n, xcap), (n, ycap)) at (p, y_center).

        y_center entries may be (B,) arrays for a batched evaluation.
        """
        return self._evaluator(int(xcap), int(ycap), np.asarray(y_center, dtype=float))

    def taylor(self, center, order: int) -> list:
        """Fiber-only jets at y = center, one per component, in jet_space(n, order)."""
        n = self.dim
        jets = self.bundle_jets(0, order, center)
        keep = tuple(range(n, 2 * n))
        return [j.drop_zero_vars(keep, ((n, order),)) for j in jets]

    def values(self, ys) -> np.ndarray:
        """Component values at y; accepts shape (n,) or (n, B)."""
        jets = self.bundle_jets(0, 0, ys)
        return np.stack([np.asarray(j.value) for j in jets])

    def tangency_residual(self, ys) -> float:
        """Largest relative violation of xi^i dF/dy^i = 0 over the given y's.

        The y's should sit on (or near) the indicatrix; the residual is scaled
        by |xi| |dF/dy|, and a zero field reports zero.
        """
        ys = np.asarray(ys, dtype=float)
        if ys.ndim == 1:
            ys = ys[:, None]
        n = self.dim
        E = self.norm.energy_jet(self.p, list(ys), xcap=0, ycap=1)
        Ey = np.stack([np.asarray(E.derivative_table(n + i).value) for i in range(n)])
        F = np.sqrt(2.0 * np.asarray(E.value))
        Fy = Ey / F  # dF/dy^i = (dE/dy^i) / F
        xi = self.values(ys)
        fscale = float(np.max(np.linalg.norm(xi, axis=0)))
        if fscale <= 1e-13:  # the zero field is tangent; don't amplify roundoff
            return 0.0
        resid = np.abs(np.sum(xi * Fy, axis=0))
        return float(np.max(resid / (fscale * np.linalg.norm(Fy, axis=0))))

    def radialized(self) -> "IndicatrixVectorField":
        """The degree-0 radial extension xi(y / F(y)); identical on the indicatrix.

        Realized by composing the field's own Taylor table, taken at the
        radial projection of the expansion point, with the jets of
        u(x, y) = y / F(x, y).  An x-derivative of the composite can fall on
        the u-arguments, so the inner table is requested with y-cap
        xcap + ycap.
        """
        if self.homogeneity == 0:
            return self
        parent = self
        norm, p, n = self.norm, self.p, self.dim

        def evaluator(xcap, ycap, yc):
            space = grouped_space(((n, xcap), (n, ycap)))
            E = norm.energy_jet(p, [yc[i] for i in range(n)], xcap=xcap, ycap=ycap)
            F = (2.0 * E).sqrt()
            if ycap:
                yj = [Jet.variable(space, n + i, yc[i]) for i in range(n)]
            else:
                yj = [Jet.constant(space, yc[i]) for i in range(n)]
            u = [yi / F for yi in yj]
            u0 = np.stack([np.asarray(ui.value) for ui in u])
            table = parent.bundle_jets(xcap, xcap + ycap, u0)
            if xcap:
                xj = [Jet.variable(space, i, p[i]) for i in range(n)]
            else:
                xj = [Jet.constant(space, p[i]) for i in range(n)]
            if u0.ndim > 1:
                xj = [xi + np.zeros(u0.shape[1]) for xi in xj]
            center = np.concatenate([np.broadcast_to(p[:, None], u0.shape), u0]) \
                if u0.ndim > 1 else np.concatenate([p, u0])
            return [compose_table(t, xj + u, center) for t in table]

        return IndicatrixVectorField(
            norm,
            p,
            evaluator,
            parent.provenance,
            parent.label,
            homogeneity=0,
            depth=parent.depth,
            parents=parent.parents,
        )


# -- base vector fields --------------------------------------------------------


def constant_base_field(manifold, vec, name: str = "") -> SmoothMap:
    """The constant vector field x -> vec on the chart."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (manifold.dim,):
        raise ValueError(f"expected a {manifold.dim}-vector, got shape {vec.shape}")

    def fun(xs):
        return [xs[0] * 0.0 + float(v) for v in vec]

    return SmoothMap(fun, manifold.dim, manifold.dim, lo=manifold.lo, hi=manifold.hi, name=name)


def coordinate_fields(manifold) -> list:
    """The constant unit fields e_0, ..., e_{n-1}; default generator directions."""
    out = []
    for i in range(manifold.dim):
        e = np.zeros(manifold.dim)
        e[i] = 1.0
        out.append(constant_base_field(manifold, e, name=f"e{i}"))
    return out


def _base_values_or_jets(X: SmoothMap, p, space, xcap: int, batch):
    # X depends on x only; with xcap = 0 plain values suffice
    if xcap:
        n = p.shape[0]
        xj = [Jet.variable(space, i, p[i]) for i in range(n)]
        if batch is not None:
            xj = [xi + np.zeros(batch) for xi in xj]
        return X.jets(xj)
    vals = X.value(p)
    return [float(v) for v in vals]


# -- curvature fields ----------------------------------------------------------


def curvature_field(norm: FinslerNorm, X: SmoothMap, Y: SmoothMap, p) -> IndicatrixVectorField:
    """The curvature vector field xi = R(X, Y) on the indicatrix at p.

    Components xi^k(x, y) = R^k_{ij}(x, y) X^i(x) Y^j(x) with

        R^k_{ij} = dG^k_i/dx^j - dG^k_j/dx^i + G^l_i G^k_{jl} - G^l_j G^k_{il}.

    The sign convention is pinned by the parallelogram transport oracle:
    d^2/dt^2 h_t(v) at t = 0 equals 2 xi(v).  Components are 1-homogeneous
    in y; the value at y depends on X and Y only through X(p), Y(p).
    """
    p = norm.manifold.require(np.asarray(p, dtype=float))
    n = norm.dim

    def evaluator(xcap, ycap, yc):
        target = ((n, xcap), (n, ycap))
        G = spray_jets(norm, p, [yc[i] for i in range(n)], xorder=xcap + 1, yorder=ycap + 2)
        Gy = [[G[k].derivative_table(n + i) for i in range(n)] for k in range(n)]
        Gyx = [
            [[Gy[k][i].derivative_table(j).truncated(target) for j in range(n)] for i in range(n)]
            for k in range(n)
        ]
        Gyt = [[Gy[k][i].truncated(target) for i in range(n)] for k in range(n)]
        Gyy = [
            [[Gy[k][i].derivative_table(n + j).truncated(target) for j in range(n)] for i in range(n)]
            for k in range(n)
        ]
        batch = G[0].batch
        space = grouped_space(target)
        Xc = _base_values_or_jets(X, p, space, xcap, batch)
        Yc = _base_values_or_jets(Y, p, space, xcap, batch)
        out = []
        for k in range(n):
            acc = Jet.constant(space, 0.0 if batch is None else np.zeros(batch))
            for i in range(n):
                for j in range(n):
                    R = Gyx[k][i][j] - Gyx[k][j][i]
                    for l in range(n):
                        R = R + Gyt[l][i] * Gyy[k][j][l] - Gyt[l][j] * Gyy[k][i][l]
                    acc = acc + R * Xc[i] * Yc[j]
            out.append(acc)
        return out

    label = f"R({X.name or 'X'},{Y.name or 'Y'})"
    return IndicatrixVectorField(norm, p, evaluator, "curvature", label, homogeneity=1)


# -- derived fields ------------------------------------------------------------


def berwald_covariant_derivative(
    norm: FinslerNorm, xi: IndicatrixVectorField, X: SmoothMap
) -> IndicatrixVectorField:
    """The horizontal covariant derivative D_X xi along the base field X,

        (D_X xi)^i = X^j (d xi^i/dx^j - G^k_j d xi^i/dy^k + G^i_{jk} xi^k),

    which equals the bundle commutator [X^h, xi] of the horizontal lift of X
    with the vertical field xi.  A field of known homogeneity degree 1 is
    radially extended to degree 0 first, so that y-derivatives act on the
    extension the algebra actually uses.
    """
    if xi.homogeneity == 1:
        xi = xi.radialized()
    p, n = xi.p, xi.dim

    def evaluator(xcap, ycap, yc):
        target = ((n, xcap), (n, ycap))
        parent = xi.bundle_jets(xcap + 1, ycap + 1, yc)
        G = spray_jets(norm, p, [yc[i] for i in range(n)], xorder=xcap, yorder=ycap + 2)
        Gy = [[G[k].derivative_table(n + j).truncated(target) for j in range(n)] for k in range(n)]
        Gyy = [
            [
                [G[i].derivative_table(n + j).derivative_table(n + k).truncated(target)
                 for k in range(n)]
                for j in range(n)
            ]
            for i in range(n)
        ]
        xi_x = [[parent[i].derivative_table(j).truncated(target) for j in range(n)] for i in range(n)]
        xi_y = [[parent[i].derivative_table(n + k).truncated(target) for k in range(n)] for i in range(n)]
        xi_t = [parent[i].truncated(target) for i in range(n)]
        batch = xi_t[0].batch
        space = grouped_space(target)
        Xc = _base_values_or_jets(X, p, space, xcap, batch)
        out = []
        for i in range(n):
            acc = Jet.constant(space, 0.0 if batch is None else np.zeros(batch))
            for j in range(n):
                term = xi_x[i][j]
                for k in range(n):
                    term = term - Gy[k][j] * xi_y[i][k] + Gyy[i][j][k] * xi_t[k]
                acc = acc + term * Xc[j]
            out.append(acc)
        return out

    label = f"D[{X.name or 'X'}]{xi.label}"
    return IndicatrixVectorField(
        norm,
        p,
        evaluator,
        "covariant-derivative",
        label,
        homogeneity=None,
        depth=xi.depth + 1,
        parents=(xi.label, X.name or "X"),
    )


def fiber_bracket(
    xi: IndicatrixVectorField, eta: IndicatrixVectorField
) -> IndicatrixVectorField:
    """The bracket [xi, eta]^i = xi^k d eta^i/dy^k - eta^k d xi^i/dy^k.

    Both fields must live over the same base point.  Inputs of known
    homogeneity degree 1 are radially extended first, matching the extension
    convention of the generator closure.
    """
    if not np.array_equal(xi.p, eta.p):
        raise ValueError("bracket requires fields over the same base point")
    if xi.norm is not eta.norm:
        raise ValueError("bracket requires fields of the same norm")
    if xi.homogeneity == 1:
        xi = xi.radialized()
    if eta.homogeneity == 1:
        eta = eta.radialized()
    n = xi.dim

    def evaluator(xcap, ycap, yc):
        target = ((n, xcap), (n, ycap))
        a = xi.bundle_jets(xcap, ycap + 1, yc)
        b = eta.bundle_jets(xcap, ycap + 1, yc)
        ay = [[a[i].derivative_table(n + k).truncated(target) for k in range(n)] for i in range(n)]
        by = [[b[i].derivative_table(n + k).truncated(target) for k in range(n)] for i in range(n)]
        at = [a[i].truncated(target) for i in range(n)]
        bt = [b[i].truncated(target) for i in range(n)]
        out = []
        for i in range(n):
            acc = at[0] * by[i][0] - bt[0] * ay[i][0]
            for k in range(1, n):
                acc = acc + at[k] * by[i][k] - bt[k] * ay[i][k]
            out.append(acc)
        return out

    label = f"[{xi.label},{eta.label}]"
    return IndicatrixVectorField(
        xi.norm,
        xi.p,
        evaluator,
        "bracket",
        label,
        homogeneity=None,
        depth=xi.depth + eta.depth + 1,
        parents=(xi.label, eta.label),
    )


# -- bundle-field adapters -----------------------------------------------------


class _BundleField:
    """A 2n-dimensional field on the bundle chart, for commutator checks."""

    def __init__(self, dim: int, taylor_fn, name: str = ""):
        self.dim = dim
        self._taylor = taylor_fn
        self.name = name

    def taylor(self, center, order: int) -> list:
        return self._taylor(np.asarray(center, dtype=float), int(order))


def horizontal_field(norm: FinslerNorm, X: SmoothMap) -> _BundleField:
    """The horizontal lift X^h = (X^j, -G^i_j X^j) as a field in (x, y)."""
    n = norm.dim

    def taylor(center, order):
        x0, y0 = center[:n], center[n:]
        gspace = grouped_space(((n, order), (n, order)))
        total = ((2 * n, order),)
        G = spray_jets(norm, x0, list(y0), xorder=order, yorder=order + 1)
        Gy = [[G[i].derivative_table(n + j) for j in range(n)] for i in range(n)]
        Xc = X.jets([Jet.variable(gspace, i, x0[i]) for i in range(n)])
        out = [Xc[i].truncated(total) for i in range(n)]
        for i in range(n):
            acc = Gy[i][0] * Xc[0]
            for j in range(1, n):
                acc = acc + Gy[i][j] * Xc[j]
            out.append((-acc).truncated(total))
        return out

    return _BundleField(2 * n, taylor, name=f"{X.name or 'X'}^h")


def vertical_field(xi: IndicatrixVectorField) -> _BundleField:
    """xi as a bundle field (0, xi^i); only valid over the field's base point."""
    n = xi.dim
    p = xi.p

    def taylor(center, order):
        if not np.allclose(center[:n], p, rtol=0.0, atol=1e-12):
            raise ValueError("fiber field is anchored at its base point")
        total = ((2 * n, order),)
        space = jet_space(2 * n, order)
        jets = xi.bundle_jets(order, order, center[n:])
        zero = Jet.constant(space, 0.0)
        return [zero] * n + [j.truncated(total) for j in jets]

    return _BundleField(2 * n, taylor, name=xi.label)


# -- generator sets ------------------------------------------------------------


@dataclass(frozen=True)
class ConstructionStep:
    """One replayable entry of a generator-set construction log."""

    index: int
    label: str
    provenance: str
    depth: int
    parents: tuple

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "label": self.label,
            "provenance": self.provenance,
            "depth": self.depth,
            "parents": list(self.parents),
        }


class GeneratorSet:
    """An ordered family of indicatrix fields over one base point, with its log.

    The log records how each field was produced (curvature pairing, covariant
    derivative, bracket) so the construction can be replayed; serialization
    additionally samples every field on indicatrix directions so that rank
    computations elsewhere can be reproduced byte for byte.
    """

    def __init__(self, norm: FinslerNorm, p, fields: list, base_fields: list, depth: int):
        self.norm = norm
        self.p = np.asarray(p, dtype=float)
        self.fields = list(fields)
        self.base_fields = list(base_fields)
        self.depth = int(depth)
        self.log = [
            ConstructionStep(i, f.label, f.provenance, f.depth, f.parents)
            for i, f in enumerate(self.fields)
        ]

    def __len__(self) -> int:
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    def up_to_depth(self, depth: int) -> list:
        return [f for f in self.fields if f.depth <= depth]

    def sampled_values(self, count: int = 8):
        """Indicatrix sample directions and every field's values on them."""
        from .transport import indicatrix_samples

        ys = indicatrix_samples(self.norm, self.p, count)
        return ys, [f.values(ys) for f in self.fields]

    def to_payload(self, sample_count: int = 8) -> dict:
        ys, vals = self.sampled_values(sample_count)
        return {
            "kind": "generator-set",
            "norm": self.norm.name,
            "base_point": [float(v) for v in self.p],
            "depth": self.depth,
            "base_fields": [b.name or f"field{i}" for i, b in enumerate(self.base_fields)],
            "log": [step.as_dict() for step in self.log],
            "samples": {
                "y": ys.T.tolist(),
                "values": [v.T.tolist() for v in vals],
            },
        }

    def to_json(self, sample_count: int = 8) -> str:
        return json.dumps(self.to_payload(sample_count), sort_keys=True, indent=2)


def ihol_generators(
    norm: FinslerNorm, p, fields=None, depth: int = 2
) -> GeneratorSet:
    """Generators of the infinitesimal holonomy algebra at p, up to `depth`.

    Starts from the curvature fields R(e_a, e_b) of the given base fields
    (coordinate fields by default), radially extended to degree 0, and closes
    under covariant derivatives along the base fields and fiber brackets.
    Depth counts applications along a construction path: D_X adds one, a
    bracket adds one plus the depths of its arguments.  Every produced field
    is kept, including zero fields; rank decisions belong to the caller.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    p = norm.manifold.require(np.asarray(p, dtype=float))
    if fields is None:
        fields = coordinate_fields(norm.manifold)
    base = []
    for a in range(len(fields)):
        for b in range(a + 1, len(fields)):
            base.append(curvature_field(norm, fields[a], fields[b], p).radialized())
    by_depth = {0: base}
    out = list(base)
    for d in range(1, depth + 1):
        new = []
        for f in by_depth[d - 1]:
            for X in fields:
                new.append(berwald_covariant_derivative(norm, f, X))
        for da in range(d):
            db = d - 1 - da
            if da > db:
                break
            lhs, rhs = by_depth.get(da, ()), by_depth.get(db, ())
            for i, f in enumerate(lhs):
                start = i + 1 if da == db else 0
                for g in list(rhs)[start:]:
                    new.append(fiber_bracket(f, g))
        by_depth[d] = new
        out.extend(new)
    return GeneratorSet(norm, p, out, fields, depth)
