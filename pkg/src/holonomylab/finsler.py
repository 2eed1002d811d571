"""Finsler norms and the tables derived from them.

A Finsler structure enters every computation through the energy E = F^2/2,
evaluated on truncated jets in the 2n bundle variables (x, y).  From E we
derive the fundamental tensor

    g_ij(x, y) = d^2 E / dy^i dy^j,

the spray coefficients via the Euler-Lagrange form

    G^i = 1/2 g^{il} ( y^k d^2 E / dx^k dy^l  -  dE / dx^l ),

and the nonlinear connection G^i_j = dG^i/dy^j together with its
y-derivatives G^i_{jk} (the Berwald connection).  All of these come out of a
single jet pipeline: seed (x, y) in a bundle jet space whose per-group caps
are exactly what the requested output needs, shift to differentiate, truncate
to the common target, and solve the small linear system with jet-valued
Gaussian elimination.  Positive definiteness of g makes elimination without
pivoting safe.

Caps are chosen per call:  output retaining xorder x-derivatives and yorder
y-derivatives of G^i needs E with caps (xorder + 1, yorder + 2).  Jet
truncation commutes with products on downward-closed index sets, so all
factors are truncated to the target before multiplying.

Everything is batched over trailing axes of y (a batch of tangent vectors at
a common base point), which is what the transport integrator wants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expressions import parse_expression
from .jets import (
    DomainBoxError,
    Jet,
    grouped_space,
)

__all__ = [
    "ChartDomainError",
    "ChartManifold",
    "ConicDomainError",
    "FinslerNorm",
    "MetricDegeneracyError",
    "MetricTensor",
    "NormReport",
    "SprayData",
    "catalog_norm",
    "catalog_names",
    "geodesic_coefficients",
    "horizontal_lift",
    "metric_tensor",
    "norm_diagnostics",
    "split_horizontal_vertical",
    "spray_jets",
]

CONDITION_LIMIT = 1e12


class ChartDomainError(DomainBoxError):
    """Point left the chart box of the manifold."""


class MetricDegeneracyError(ValueError):
    """Fundamental tensor not positive definite, or numerically singular."""


class ConicDomainError(DomainBoxError):
    """y = 0 requested; the tables live on the slit bundle y != 0."""


@dataclass(frozen=True)
class ChartManifold:
    """A single coordinate chart: an open box in R^dim.

    All geometry in this package happens in one chart.  Operations raise
    ChartDomainError rather than extrapolate outside the box.
    """

    dim: int
    lo: tuple
    hi: tuple
    name: str = "chart"

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != self.dim or len(hi) != self.dim:
            raise ValueError("bounds must have one entry per dimension")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("chart box must have lo < hi in every coordinate")

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lo) + margin
        hi = np.asarray(self.hi) - margin
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def require(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ValueError(f"point has {x.shape[0]} coordinates, chart has {self.dim}")
        # tolerate roundoff at the walls, an ODE step landing 1e-15 outside is fine
        span = np.asarray(self.hi) - np.asarray(self.lo)
        slack = 1e-9 * np.maximum(span, 1.0)
        lo = (np.asarray(self.lo) - slack)[:, None] if x.ndim > 1 else np.asarray(self.lo) - slack
        hi = (np.asarray(self.hi) + slack)[:, None] if x.ndim > 1 else np.asarray(self.hi) + slack
        if np.any(x < lo) or np.any(x > hi):
            raise ChartDomainError(
                f"{self.name}: point outside chart box "
                f"(lo={self.lo}, hi={self.hi})"
            )
        return x

    def interior_sampler(self, rng: np.random.Generator, margin_fraction: float = 0.1):
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        pad = margin_fraction * (hi - lo)

        def draw():
            return rng.uniform(lo + pad, hi - pad)

        return draw


class FinslerNorm:
    """A Finsler norm F(x, y) on a chart, entered via its energy F^2/2.

    `fsq` must map two lists of jets (x components, y components) to the jet
    of F^2; it is also called with plain floats/arrays by the sampling
    helpers, so it should stick to arithmetic and the sqrt/sin/cos/exp/log
    methods, which both jets and numpy arrays provide through the same
    operator surface.
    """

    def __init__(self, manifold: ChartManifold, fsq, name: str, params: dict | None = None):
        self.manifold = manifold
        self.dim = manifold.dim
        self._fsq = fsq
        self.name = name
        self.params = dict(params or {})

    def __repr__(self):
        return f"FinslerNorm({self.name!r}, dim={self.dim})"

    # -- plain evaluation ----------------------------------------------------

    def squared_value(self, x, y):
        x = self.manifold.require(x)
        y = np.asarray(y, dtype=float)
        return self._fsq(list(x), list(y))

    def value(self, x, y):
        """F(x, y); y may carry a trailing batch axis."""
        return np.sqrt(self.squared_value(x, y))

    def normalize(self, x, y):
        """Rescale y to the indicatrix F = 1."""
        f = self.value(x, y)
        if np.any(f <= 0.0):
            raise ValueError("cannot normalize a vector of zero norm")
        return np.asarray(y, dtype=float) / f

    # -- jet evaluation ------------------------------------------------------

    def energy_jet(self, x, y, xcap: int, ycap: int) -> Jet:
        """Jet of E = F^2/2 at (x, y) with per-group caps (xcap, ycap).

        y entries may be (B,) arrays for a batched evaluation at a shared x.
        """
        x = self.manifold.require(np.asarray(x, dtype=float))
        n = self.dim
        space = grouped_space(((n, xcap), (n, ycap)))
        # a cap-0 group cannot carry linear terms; seed those inputs as constants
        xj = [
            Jet.variable(space, i, x[i]) if xcap else Jet.constant(space, x[i])
            for i in range(n)
        ]
        yj = [
            Jet.variable(space, n + i, np.asarray(y[i], dtype=float))
            if ycap
            else Jet.constant(space, np.asarray(y[i], dtype=float))
            for i in range(n)
        ]
        return self._fsq(xj, yj) * 0.5

    @classmethod
    def from_expression(cls, text: str, lo, hi, name: str = "expression"):
        """Build a norm from an expression for F in x1..xn, y1..yn."""
        lo = tuple(float(v) for v in lo)
        dim = len(lo)
        manifold = ChartManifold(dim, lo, hi, name=name)
        names = tuple(f"x{i+1}" for i in range(dim)) + tuple(f"y{i+1}" for i in range(dim))
        expr = parse_expression(text, names)

        def fsq(xs, ys):
            f = expr(*xs, *ys)
            return f * f

        norm = cls(manifold, fsq, name=name, params={"expression": text})
        norm.expression = expr
        return norm


# -- catalog ------------------------------------------------------------------


def _euclidean_fsq(xs, ys):
    acc = ys[0] * ys[0]
    for v in ys[1:]:
        acc = acc + v * v
    return acc


def _make_euclidean(dim=2, halfwidth=10.0):
    man = ChartManifold(dim, (-halfwidth,) * dim, (halfwidth,) * dim, name="euclidean")
    return FinslerNorm(man, _euclidean_fsq, "euclidean", {"dim": dim, "halfwidth": halfwidth})


def _make_flat_torus(dim=2, period=2.0 * np.pi):
    # flat metric; the chart spans several fundamental domains so loops fit
    man = ChartManifold(dim, (-2 * period,) * dim, (2 * period,) * dim, name="flat_torus")
    return FinslerNorm(man, _euclidean_fsq, "flat_torus", {"dim": dim, "period": period})


def _make_sphere(radius=1.0, polar_margin=0.2):
    # round sphere in polar coordinates (theta, phi); stay away from the poles
    man = ChartManifold(
        2,
        (polar_margin, -2.0 * np.pi),
        (np.pi - polar_margin, 2.0 * np.pi),
        name="sphere",
    )
    r2 = radius * radius

    def fsq(xs, ys):
        s = xs[0].sin() if isinstance(xs[0], Jet) else np.sin(xs[0])
        return (ys[0] * ys[0] + (s * s) * (ys[1] * ys[1])) * r2

    return FinslerNorm(man, fsq, "sphere", {"radius": radius, "polar_margin": polar_margin})


def _make_funk_disk(box_halfwidth=0.63):
    # Funk metric on the unit disk; the chart is a box inscribed well inside
    man = ChartManifold(2, (-box_halfwidth,) * 2, (box_halfwidth,) * 2, name="funk_disk")

    def fsq(xs, ys):
        ip = xs[0] * ys[0] + xs[1] * ys[1]
        xx = xs[0] * xs[0] + xs[1] * xs[1]
        yy = ys[0] * ys[0] + ys[1] * ys[1]
        q = 1.0 - xx
        rad = q * yy + ip * ip
        root = rad.sqrt() if isinstance(rad, Jet) else np.sqrt(rad)
        f = (root + ip) / q
        return f * f

    return FinslerNorm(man, fsq, "funk_disk", {"box_halfwidth": box_halfwidth})


_CATALOG = {
    "euclidean": _make_euclidean,
    "flat_torus": _make_flat_torus,
    "sphere": _make_sphere,
    "funk_disk": _make_funk_disk,
}


def catalog_names() -> tuple:
    return tuple(sorted(_CATALOG))


def catalog_norm(name: str, **params) -> FinslerNorm:
    """Instantiate a catalog norm: euclidean, flat_torus, sphere, funk_disk."""
    try:
        maker = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown norm {name!r}; available: {', '.join(catalog_names())}") from None
    return maker(**params)


# -- derived tables -----------------------------------------------------------


@dataclass(frozen=True)
class MetricTensor:
    """Fundamental tensor at one (x, y), with inverse and conditioning."""

    matrix: np.ndarray
    inverse: np.ndarray
    condition: float
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class SprayData:
    """Spray coefficients and their y-derivatives at one (x, y).

    G has shape (n,), G_j has (n, n) with G_j[i, j] = dG^i/dy^j, and G_jk has
    (n, n, n) with G_jk[i, j, k] = d^2 G^i / dy^j dy^k.  Batched y appends a
    trailing axis to each.
    """

    G: np.ndarray
    G_j: np.ndarray
    G_jk: np.ndarray | None = None


def _check_y(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(np.sum(y * y, axis=0) == 0.0):
        raise ConicDomainError("tables are undefined at y = 0")
    return y


def metric_tensor(norm: FinslerNorm, x, y) -> MetricTensor:
    """g_ij = d^2(F^2/2)/dy^i dy^j at a single (x, y), y != 0."""
    y = _check_y(y)
    if y.ndim != 1:
        raise ValueError("metric_tensor takes a single tangent vector")
    n = norm.dim
    E = norm.energy_jet(x, y, xcap=0, ycap=2)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            alpha = [0] * (2 * n)
            alpha[n + i] += 1
            alpha[n + j] += 1
            g[i, j] = g[j, i] = E.derivative(tuple(alpha))
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= 0.0:
        raise MetricDegeneracyError(
            f"fundamental tensor not positive definite at x={x}, y={y}: eigenvalues {eig}"
        )
    condition = float(eig[-1] / eig[0])
    if condition > CONDITION_LIMIT:
        raise MetricDegeneracyError(
            f"fundamental tensor ill conditioned ({condition:.3e} > {CONDITION_LIMIT:.0e})"
        )
    return MetricTensor(g, np.linalg.inv(g), condition, eig)


def _jet_solve(A, b):
    """Solve A w = b for jets, A symmetric positive definite by value part.

    Plain elimination without pivoting; PD of the value part keeps pivots
    away from zero, and we check anyway.
    """
    n = len(b)
    A = [row[:] for row in A]
    b = list(b)
    for col in range(n):
        piv = A[col][col]
        if np.min(np.abs(np.asarray(piv.value))) < 1e-14:
            raise MetricDegeneracyError("zero pivot in fundamental tensor solve")
        inv = 1.0 / piv
        for r in range(col + 1, n):
            factor = A[r][col] * inv
            for c in range(col + 1, n):
                A[r][c] = A[r][c] - factor * A[col][c]
            b[r] = b[r] - factor * b[col]
    w = [None] * n
    for row in range(n - 1, -1, -1):
        acc = b[row]
        for c in range(row + 1, n):
            acc = acc - A[row][c] * w[c]
        w[row] = acc / A[row][row]
    return w


def spray_jets(norm: FinslerNorm, x, y, xorder: int = 0, yorder: int = 0) -> list:
    """Jets of the spray coefficients G^i at (x, y).

    The returned jets live in the bundle space with caps (xorder, yorder), so
    they retain xorder x-derivatives and yorder y-derivatives of each G^i.
    y may be batched: pass components that are (B,) arrays.
    """
    y = _check_y(y)
    n = norm.dim
    E = norm.energy_jet(x, list(y), xcap=xorder + 1, ycap=yorder + 2)
    target = ((n, xorder), (n, yorder))
    space = grouped_space(target)

    Ey = [E.derivative_table(n + l) for l in range(n)]  # caps (xorder+1, yorder+1)
    g = [[None] * n for _ in range(n)]
    for l in range(n):
        for j in range(l, n):
            gij = Ey[l].derivative_table(n + j).truncated(target)
            g[l][j] = g[j][l] = gij

    yjets = [Jet.variable(space, n + k, np.asarray(y[k], dtype=float)) for k in range(n)]
    rhs = []
    for l in range(n):
        acc = None
        for k in range(n):
            term = yjets[k] * Ey[l].derivative_table(k).truncated(target)
            acc = term if acc is None else acc + term
        rhs.append(acc - E.derivative_table(l).truncated(target))

    w = _jet_solve(g, rhs)
    return [wi * 0.5 for wi in w]


def _yderiv(jet: Jet, n: int, *ys) -> float | np.ndarray:
    alpha = [0] * (2 * n)
    for j in ys:
        alpha[n + j] += 1
    return jet.derivative(tuple(alpha))


def geodesic_coefficients(norm: FinslerNorm, x, y, with_second: bool = True) -> SprayData:
    """Spray values G^i, connection G^i_j, and optionally G^i_{jk} at (x, y)."""
    n = norm.dim
    G = spray_jets(norm, x, y, xorder=0, yorder=2 if with_second else 1)
    batch = G[0].batch
    shape = (n,) if batch is None else (n, batch)
    Gv = np.empty(shape)
    Gj = np.empty((n, n) if batch is None else (n, n, batch))
    for i in range(n):
        Gv[i] = G[i].value
        for j in range(n):
            Gj[i, j] = _yderiv(G[i], n, j)
    if not with_second:
        return SprayData(Gv, Gj, None)
    Gjk = np.empty((n, n, n) if batch is None else (n, n, n, batch))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                Gjk[i, j, k] = _yderiv(G[i], n, j, k)
    return SprayData(Gv, Gj, Gjk)


def connection_values(norm: FinslerNorm, x, y) -> np.ndarray:
    """G^i_j at (x, y); the parallel transport right-hand side. Batched in y."""
    n = norm.dim
    G = spray_jets(norm, x, y, xorder=0, yorder=1)
    batch = G[0].batch
    Gj = np.empty((n, n) if batch is None else (n, n, batch))
    for i in range(n):
        for j in range(n):
            Gj[i, j] = _yderiv(G[i], n, j)
    return Gj


def horizontal_lift(norm: FinslerNorm, x, y, X) -> np.ndarray:
    """Lift the base vector X to the horizontal subspace at (x, y).

    Returns the 2n bundle vector (X, -G_j X) with (G_j X)^i = G^i_j X^j.
    """
    X = np.asarray(X, dtype=float)
    Gj = connection_values(norm, x, y)
    if Gj.ndim == 3:
        vert = -np.einsum("ijb,jb->ib" if X.ndim > 1 else "ijb,j->ib", Gj, X)
        base = X if X.ndim > 1 else np.broadcast_to(X[:, None], vert.shape)
    else:
        vert = -Gj @ X
        base = X
    return np.concatenate([base, vert])


def split_horizontal_vertical(norm: FinslerNorm, x, y, V):
    """Split a bundle vector V = (a, b) at (x, y) into horizontal + vertical.

    The horizontal part is the lift of a; the vertical part is
    (0, b + G_j a).  Their sum is V.
    """
    V = np.asarray(V, dtype=float)
    n = norm.dim
    if V.shape[0] != 2 * n:
        raise ValueError(f"bundle vector must have {2*n} components")
    a, b = V[:n], V[n:]
    Gj = connection_values(norm, x, y)
    Ga = Gj @ a
    horizontal = np.concatenate([a, -Ga])
    vertical = np.concatenate([np.zeros(n), b + Ga])
    return horizontal, vertical


# -- diagnostics ---------------------------------------------------------------


@dataclass
class NormReport:
    """Sampled health check of a norm: positivity, homogeneity, convexity."""

    name: str
    samples: int
    positivity_failures: int
    homogeneity_residual: float
    convexity_failures: int
    min_eigenvalue: float
    max_condition: float
    jet_consistency: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = (
            self.positivity_failures == 0
            and self.convexity_failures == 0
            and self.homogeneity_residual < 1e-8
            and self.jet_consistency < 1e-10
        )

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": self.samples,
            "positivity_failures": self.positivity_failures,
            "homogeneity_residual": self.homogeneity_residual,
            "convexity_failures": self.convexity_failures,
            "min_eigenvalue": self.min_eigenvalue,
            "max_condition": self.max_condition,
            "jet_consistency": self.jet_consistency,
            "passed": self.passed,
        }


def norm_diagnostics(norm: FinslerNorm, samples: int = 40, seed: int = 0) -> NormReport:
    """Sample the chart and check the axioms that make the tables valid.

    Positivity of F away from y = 0, positive 1-homogeneity in y, positive
    definiteness of g, and agreement of the jet pipeline's value part with
    direct numeric evaluation.
    """
    rng = np.random.default_rng(seed)
    draw = norm.manifold.interior_sampler(rng)
    n = norm.dim
    positivity = 0
    convexity = 0
    hom = 0.0
    jet_consistency = 0.0
    min_eig = np.inf
    max_cond = 0.0
    for _ in range(samples):
        x = draw()
        y = rng.normal(size=n)
        y /= np.linalg.norm(y)
        f = float(norm.value(x, y))
        if not np.isfinite(f) or f <= 0.0:
            positivity += 1
            continue
        for lam in (0.5, 2.0, 3.7):
            hom = max(hom, abs(float(norm.value(x, lam * y)) - lam * f) / max(1.0, f))
        try:
            mt = metric_tensor(norm, x, y)
            min_eig = min(min_eig, float(mt.eigenvalues[0]))
            max_cond = max(max_cond, mt.condition)
        except MetricDegeneracyError:
            convexity += 1
        E = norm.energy_jet(x, y, xcap=0, ycap=2)
        jet_consistency = max(
            jet_consistency, abs(2.0 * float(E.value) - f * f) / max(1.0, f * f)
        )
    return NormReport(
        name=norm.name,
        samples=samples,
        positivity_failures=positivity,
        homogeneity_residual=hom,
        convexity_failures=convexity,
        min_eigenvalue=float(min_eig),
        max_condition=float(max_cond),
        jet_consistency=jet_consistency,
    )
