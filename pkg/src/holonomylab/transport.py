"""Nonlinear parallel transport, holonomy of loops, and parallelogram loops.

Transport of a tangent vector V along a base curve c solves

    dV^i/du + G^i_j(c(u), V) c'(u)^j = 0,

the horizontality condition for the curve u -> (c(u), V(u)).  The integrator
is classical RK4 with step doubling: a full step against two half steps gives
an embedded error estimate (the usual /15 factor), steps are halved or grown
by the standard safety rule, and a step that lands outside the chart or the
domain box of a vector field counts as a rejection.  States may carry a
trailing batch axis, so a whole fan of vectors rides along one curve in a
single solve.

Parallelogram loops:  for vector fields X, Y with flows phi, psi the outward
path alpha_t is the four flow segments (X for time t, Y for t, X for -t,
Y for -t), which in general does not close up.  The gap is bridged by the
curve

    beta_t(s) = psi_{-s} phi_{-s} psi_s phi_s (p),   s in [0, t],

and the loop is alpha_t followed by beta_t reversed.  Flow segments and
beta are realized as Chebyshev interpolants through Gauss-Lobatto nodes,
each node computed with the same RK4; endpoints are nodes, and beta's final
node reuses alpha's endpoint state, so the realized loop closes bitwise.
The derivatives of t -> h_t(v) are taken by central differences over the
fixed schedule t in {0.08, 0.04, 0.02, 0.01} with extrapolation in t^2;
differentiating through an adaptive integrator with jets is not defined, so
this stays a finite-difference path by design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .expressions import parse_expression
from .finsler import FinslerNorm, connection_values
from .jets import DomainBoxError, SmoothMap, richardson_extrapolate

__all__ = [
    "CurveSpec",
    "FlowEscapeError",
    "LoopSpec",
    "ParallelogramLoop",
    "ParallelogramTransporter",
    "TransportFailure",
    "TransportResult",
    "fibered_holonomy_family",
    "flow_curve",
    "flow_transport_discrepancy",
    "holonomy_map",
    "horizontal_flow",
    "indicatrix_samples",
    "parallel_transport",
    "parallelogram_derivatives",
    "parallelogram_holonomy",
]

ATOL = 1e-10
RTOL = 1e-9
H_SCHEDULE = (0.08, 0.04, 0.02, 0.01)
_JUNCTION_TOL = 1e-12


class TransportFailure(RuntimeError):
    """Integration could not continue; carries the last good state."""

    def __init__(self, reason: str, t: float, state: np.ndarray):
        super().__init__(f"{reason} (at parameter {t:.6g})")
        self.reason = reason
        self.t = t
        self.last_state = state


class FlowEscapeError(TransportFailure):
    """A parallelogram flow left the chart; reports the largest usable scale."""

    def __init__(self, reason, t, state, max_admissible_t):
        super().__init__(reason, t, state)
        self.max_admissible_t = max_admissible_t


# -- integrator ----------------------------------------------------------------


def _rk4_step(rhs, t, y, h, k1=None):
    if k1 is None:
        k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1


def integrate(rhs, t0, t1, y0, atol=ATOL, rtol=RTOL, h0=None, max_steps=200000):
    """Adaptive RK4 by step doubling from t0 to t1 (either direction).

    rhs(t, y) -> dy/dt, where y is (d,) or (d, B).  Returns (y_end, stats)
    with stats counting accepted/rejected steps and the largest accepted
    local error estimate.  Raises TransportFailure on step underflow, which
    is also how a domain-box violation that cannot be stepped over surfaces.
    """
    y = np.asarray(y0, dtype=float).copy()
    span = t1 - t0
    if span == 0.0:
        return y, {"accepted": 0, "rejected": 0, "max_local_error": 0.0}
    h = span if h0 is None else np.sign(span) * min(abs(h0), abs(span))
    h_min = 1e-13 * max(abs(span), 1.0)
    t = t0
    accepted = rejected = 0
    max_err = 0.0
    while (t1 - t) * np.sign(span) > 0.0:
        if abs(t1 - t) <= h_min:
            break  # remaining span is rounding noise
        if abs(h) > abs(t1 - t):
            h = t1 - t
        if abs(h) < h_min:
            raise TransportFailure("step size underflow", t, y)
        if accepted + rejected > max_steps:
            raise TransportFailure("step budget exhausted", t, y)
        try:
            full, k1 = _rk4_step(rhs, t, y, h)
            half, _ = _rk4_step(rhs, t, y, 0.5 * h, k1=k1)
            two_half, _ = _rk4_step(rhs, t + 0.5 * h, half, 0.5 * h)
        except DomainBoxError:
            rejected += 1
            h *= 0.5
            continue
        delta = (two_half - full) / 15.0
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(two_half))
        err = float(np.max(np.abs(delta) / scale))
        if err <= 1.0 or abs(h) <= h_min * 2.0:
            t += h
            y = two_half + delta
            accepted += 1
            max_err = max(max_err, float(np.max(np.abs(delta))))
        else:
            rejected += 1
        factor = 0.9 * err ** -0.2 if err > 0.0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return y, {"accepted": accepted, "rejected": rejected, "max_local_error": max_err}


# -- curve pieces ---------------------------------------------------------------


def _piece_point_velocity(piece: SmoothMap, u: float):
    fast = getattr(piece, "point_velocity", None)
    if fast is not None:
        return fast(u)
    out = piece.jet(np.array([u]), 1)
    return (
        np.array([j.value for j in out]),
        np.array([j.derivative(1) for j in out]),
    )


class _AffinePiece(SmoothMap):
    """Straight segment a + u (b - a), u in [0, 1]."""

    def __init__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        n = a.shape[0]

        def fun(args):
            return [a[i] + (b[i] - a[i]) * args[0] for i in range(n)]

        super().__init__(fun, 1, n, name="segment")
        self.a = a
        self.b = b

    def point_velocity(self, u):
        return self.a + (self.b - self.a) * u, self.b - self.a


class _ChebPiece(SmoothMap):
    """Chebyshev-series curve over u in [0, 1] (s = 2u - 1 internally)."""

    def __init__(self, coeffs: np.ndarray, name: str = "chebyshev"):
        coeffs = np.asarray(coeffs, dtype=float)
        n = coeffs.shape[1]

        def fun(args):
            s = 2.0 * args[0] - 1.0
            return [_cheb.chebval(s, coeffs[:, i]) for i in range(n)]

        super().__init__(fun, 1, n, name=name)
        self.coeffs = coeffs
        self._dcoeffs = 2.0 * _cheb.chebder(coeffs, axis=0)

    def point_velocity(self, u):
        s = 2.0 * u - 1.0
        return _cheb.chebval(s, self.coeffs), _cheb.chebval(s, self._dcoeffs)


class _ReversedPiece(SmoothMap):
    def __init__(self, inner: SmoothMap):
        def fun(args):
            return inner.fun([1.0 - args[0]])

        super().__init__(fun, 1, inner.dim_out, name=f"reversed {inner.name}")
        self._inner = inner

    def point_velocity(self, u):
        x, dx = _piece_point_velocity(self._inner, 1.0 - u)
        return x, -dx


class _ExpressionPiece(SmoothMap):
    def __init__(self, texts):
        exprs = [parse_expression(s, ("t",)) for s in texts]

        def fun(args):
            return [e(args[0]) for e in exprs]

        super().__init__(fun, 1, len(exprs), name="expression curve")
        self.texts = tuple(texts)


def _lobatto_nodes(m: int) -> np.ndarray:
    # Gauss-Lobatto points of [0, 1], ascending; endpoints included
    return 0.5 * (1.0 - np.cos(np.pi * np.arange(m + 1) / m))


def _fit_chebyshev(nodes01: np.ndarray, values: np.ndarray, name: str) -> _ChebPiece:
    s = 2.0 * nodes01 - 1.0
    coeffs = _cheb.chebfit(s, values, deg=len(nodes01) - 1)
    return _ChebPiece(coeffs, name=name)


class CurveSpec:
    """Piecewise-smooth base curve, globally parametrized over [0, 1].

    Pieces are maps [0, 1] -> chart with matching endpoints; junction
    mismatch beyond 1e-12 is a construction error.
    """

    def __init__(self, pieces):
        pieces = tuple(pieces)
        if not pieces:
            raise ValueError("a curve needs at least one piece")
        self.pieces = pieces
        self.dim = pieces[0].dim_out
        for i in range(len(pieces) - 1):
            a = _piece_point_velocity(pieces[i], 1.0)[0]
            b = _piece_point_velocity(pieces[i + 1], 0.0)[0]
            gap = float(np.max(np.abs(a - b)))
            if gap > _JUNCTION_TOL:
                raise ValueError(f"pieces {i} and {i+1} do not join (gap {gap:.3e})")

    @classmethod
    def line_segment(cls, a, b):
        return cls([_AffinePiece(a, b)])

    @classmethod
    def from_expressions(cls, texts):
        """One smooth piece from component expressions in t over [0, 1]."""
        return cls([_ExpressionPiece(texts)])

    @property
    def start(self):
        return _piece_point_velocity(self.pieces[0], 0.0)[0]

    @property
    def end(self):
        return _piece_point_velocity(self.pieces[-1], 1.0)[0]

    def point(self, t: float) -> np.ndarray:
        k, u = self._locate(t)
        return _piece_point_velocity(self.pieces[k], u)[0]

    def velocity(self, t: float) -> np.ndarray:
        k, u = self._locate(t)
        return len(self.pieces) * _piece_point_velocity(self.pieces[k], u)[1]

    def _locate(self, t: float):
        m = len(self.pieces)
        if not 0.0 <= t <= 1.0:
            raise ValueError("curve parameter must lie in [0, 1]")
        k = min(int(t * m), m - 1)
        return k, t * m - k

    def reverse(self) -> "CurveSpec":
        return CurveSpec([_ReversedPiece(p) for p in reversed(self.pieces)])

    def concat(self, other: "CurveSpec") -> "CurveSpec":
        return CurveSpec(self.pieces + other.pieces)

    def closure_gap(self) -> float:
        return float(np.max(np.abs(self.end - self.start)))

    def as_loop(self) -> "LoopSpec":
        return LoopSpec(self.pieces)


class LoopSpec(CurveSpec):
    """A CurveSpec whose endpoints coincide."""

    def __init__(self, pieces):
        super().__init__(pieces)
        gap = self.closure_gap()
        if gap > _JUNCTION_TOL:
            raise ValueError(f"loop does not close (gap {gap:.3e})")

    @classmethod
    def rectangle(cls, corner_a, corner_b):
        """Axis-aligned rectangle corner_a -> corner_b -> back, in the plane."""
        a = np.asarray(corner_a, dtype=float)
        c = np.asarray(corner_b, dtype=float)
        if a.shape != (2,) or c.shape != (2,):
            raise ValueError("rectangle corners must be planar points")
        b = np.array([c[0], a[1]])
        d = np.array([a[0], c[1]])
        return cls(
            [_AffinePiece(a, b), _AffinePiece(b, c), _AffinePiece(c, d), _AffinePiece(d, a)]
        )

    @classmethod
    def constant(cls, p):
        p = np.asarray(p, dtype=float)
        return cls([_AffinePiece(p, p)])


# -- transport ------------------------------------------------------------------


@dataclass
class TransportResult:
    """Outcome of one transport: end vector plus integrator diagnostics."""

    y_end: np.ndarray
    x_end: np.ndarray
    norm_start: float
    norm_end: float
    norm_drift: float
    accepted_steps: int
    rejected_steps: int
    max_local_error: float
    flagged: bool = field(default=False)


def parallel_transport(
    norm: FinslerNorm,
    curve: CurveSpec,
    y0,
    atol: float = ATOL,
    rtol: float = RTOL,
    drift_tolerance: float = 1e-8,
) -> TransportResult:
    """Transport y0 along the curve; y0 may be (n,) or a batch (n, B).

    The result is flagged when |F(end) - F(start)| exceeds
    drift_tolerance * F(start); drift is measured on the worst batch member.
    """
    if curve.dim != norm.dim:
        raise ValueError(f"curve dim {curve.dim} vs norm dim {norm.dim}")
    V = np.asarray(y0, dtype=float).copy()
    if np.any(np.sum(V * V, axis=0) == 0.0):
        raise ValueError("cannot transport the zero vector")
    f0 = norm.value(curve.start, V)
    accepted = rejected = 0
    max_err = 0.0
    for piece in curve.pieces:
        def rhs(u, W, piece=piece):
            x, dx = _piece_point_velocity(piece, u)
            Gj = connection_values(norm, x, W)
            if W.ndim == 2:
                return -np.einsum("ijb,j->ib", Gj, dx)
            return -(Gj @ dx)

        V, stats = integrate(rhs, 0.0, 1.0, V, atol=atol, rtol=rtol, h0=1.0)
        accepted += stats["accepted"]
        rejected += stats["rejected"]
        max_err = max(max_err, stats["max_local_error"])
    x_end = curve.end
    f1 = norm.value(x_end, V)
    drift = float(np.max(np.abs(f1 - f0)))
    return TransportResult(
        y_end=V,
        x_end=x_end,
        norm_start=float(np.max(f0)),
        norm_end=float(np.max(f1)),
        norm_drift=drift,
        accepted_steps=accepted,
        rejected_steps=rejected,
        max_local_error=max_err,
        flagged=bool(drift > drift_tolerance * max(float(np.max(f0)), 1e-300)),
    )


def indicatrix_samples(norm: FinslerNorm, p, count: int, offset: float = 0.0) -> np.ndarray:
    """`count` vectors on the indicatrix F(p, .) = 1, shape (n, count).

    Directions come from a uniform Euclidean grid (angles in the plane),
    rescaled radially by 1/F.  In dimension >= 3 the grid is replaced by a
    deterministic low-discrepancy spiral on the unit sphere.
    """
    p = np.asarray(p, dtype=float)
    n = norm.dim
    if count < 1:
        raise ValueError("need at least one sample")
    if n == 2:
        ang = offset + 2.0 * np.pi * np.arange(count) / count
        dirs = np.stack([np.cos(ang), np.sin(ang)])
    else:
        # Fibonacci-type spiral: deterministic, roughly even coverage
        k = np.arange(count) + 0.5
        golden = (1.0 + np.sqrt(5.0)) / 2.0
        if n == 3:
            z = 1.0 - 2.0 * k / count
            r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
            th = 2.0 * np.pi * k / golden
            dirs = np.stack([r * np.cos(th), r * np.sin(th), z])
        else:
            raise NotImplementedError("indicatrix sampling implemented for dim 2 and 3")
    return dirs / norm.value(p, dirs)


def holonomy_map(
    norm: FinslerNorm,
    loop: CurveSpec,
    samples,
    atol: float = ATOL,
    rtol: float = RTOL,
) -> np.ndarray:
    """Transport indicatrix samples around a closed loop; returns (n, B).

    Samples must satisfy F(p, v) = 1 within 1e-10 at the loop's base point.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] != norm.dim:
        samples = samples.T
    if loop.closure_gap() > _JUNCTION_TOL:
        raise ValueError("holonomy needs a closed loop")
    f = norm.value(loop.start, samples)
    if np.max(np.abs(f - 1.0)) > 1e-10:
        raise ValueError("samples must lie on the indicatrix at the base point")
    result = parallel_transport(norm, loop, samples, atol=atol, rtol=rtol)
    return result.y_end


# -- flows and the transport = flow identity ------------------------------------


def flow_curve(X: SmoothMap, p, T: float, nodes: int = 16) -> _ChebPiece:
    """The integral curve u -> flow_{uT}(p) of X, as one smooth piece.

    Solved node to node through Gauss-Lobatto points (so u = 0 and u = 1 are
    data, not extrapolation), then fit by a Chebyshev interpolant.  T may be
    negative: the flow runs backward.
    """
    p = np.asarray(p, dtype=float)
    if T == 0.0:
        return _AffinePiece(p, p)
    us = _lobatto_nodes(nodes)
    values = np.empty((nodes + 1, p.shape[0]))
    values[0] = p
    state = p

    def rhs(t, x):
        return X.value(x)

    for i in range(1, nodes + 1):
        state, _ = integrate(rhs, us[i - 1] * T, us[i] * T, state)
        values[i] = state
    if np.all(values == values[0]):
        piece = _AffinePiece(p, p)  # stationary point of X: keep velocity exactly 0
    else:
        piece = _fit_chebyshev(us, values, name="flow")
    piece.end_state = values[-1]
    return piece


def horizontal_flow(norm: FinslerNorm, X: SmoothMap, p, y0, t: float):
    """Flow (p, y0) along the horizontal lift X^h for time t.

    State is (x, V); dx/dt = X(x), dV^i/dt = -G^i_j(x, V) X(x)^j.  Returns
    (x_end, V_end).
    """
    p = np.asarray(p, dtype=float)
    V0 = np.asarray(y0, dtype=float)
    n = norm.dim

    def rhs(s, z):
        x, V = z[:n], z[n:]
        Xv = X.value(x)
        Gj = connection_values(norm, x, V)
        return np.concatenate([Xv, -(Gj @ Xv)])

    z, _ = integrate(rhs, 0.0, t, np.concatenate([p, V0]))
    return z[:n], z[n:]


def flow_transport_discrepancy(norm: FinslerNorm, X: SmoothMap, p, y0, t: float) -> float:
    """Distance between transporting y0 along the integral curve of X and
    flowing (p, y0) by the horizontal lift.  The two routes share nothing
    but the integrator, so agreement is a real check of both."""
    if t == 0.0:
        return 0.0
    curve = CurveSpec([flow_curve(X, p, t)])
    via_transport = parallel_transport(norm, curve, y0).y_end
    _, via_flow = horizontal_flow(norm, X, p, y0, t)
    return float(np.linalg.norm(via_transport - via_flow))


# -- parallelogram holonomy ------------------------------------------------------


@dataclass(frozen=True)
class ParallelogramLoop:
    """The realized loop alpha_t * beta_t^{-1} at scale t."""

    X: SmoothMap
    Y: SmoothMap
    p: np.ndarray
    t: float
    loop: LoopSpec


class ParallelogramTransporter:
    """Holonomy family h_t at a fixed (X, Y, p), cached over scales t.

    h_t transports indicatrix vectors around the parallelogram loop of X and
    Y at scale t; h_0 is the identity, both legs are rebuilt per scale, and
    negative t runs all flows backward (the family is smooth through 0, which
    the central-difference schedule relies on).
    """

    def __init__(
        self,
        norm: FinslerNorm,
        X: SmoothMap,
        Y: SmoothMap,
        p,
        atol: float = ATOL,
        rtol: float = RTOL,
        nodes: int = 16,
    ):
        self.norm = norm
        self.X = X
        self.Y = Y
        self.p = np.asarray(p, dtype=float)
        self.atol = atol
        self.rtol = rtol
        self.nodes = nodes
        self._loops: dict[float, ParallelogramLoop] = {}

    def _chain_point(self, s: float) -> np.ndarray:
        # psi_{-s} phi_{-s} psi_s phi_s (p)
        x = self.p

        def fX(t, z):
            return self.X.value(z)

        def fY(t, z):
            return self.Y.value(z)

        x, _ = integrate(fX, 0.0, s, x)
        x, _ = integrate(fY, 0.0, s, x)
        x, _ = integrate(fX, 0.0, -s, x)
        x, _ = integrate(fY, 0.0, -s, x)
        return x

    def loop(self, t: float) -> ParallelogramLoop:
        """Build (and cache) the closed loop at scale t."""
        hit = self._loops.get(t)
        if hit is not None:
            return hit
        if t == 0.0:
            loop = LoopSpec.constant(self.p)
            result = ParallelogramLoop(self.X, self.Y, self.p, 0.0, loop)
            self._loops[0.0] = result
            return result
        a1 = flow_curve(self.X, self.p, t, self.nodes)
        a2 = flow_curve(self.Y, a1.end_state, t, self.nodes)
        a3 = flow_curve(self.X, a2.end_state, -t, self.nodes)
        a4 = flow_curve(self.Y, a3.end_state, -t, self.nodes)
        # beta over s in [0, t]; its first/last nodes reuse p and alpha's
        # endpoint exactly, which is what closes the realized loop bitwise
        us = _lobatto_nodes(self.nodes)
        values = np.empty((self.nodes + 1, self.p.shape[0]))
        values[0] = self.p
        values[-1] = a4.end_state
        for i in range(1, self.nodes):
            values[i] = self._chain_point(us[i] * t)
        beta = _fit_chebyshev(us, values, name="gap curve")
        loop = LoopSpec([a1, a2, a3, a4, _ReversedPiece(beta)])
        result = ParallelogramLoop(self.X, self.Y, self.p, t, loop)
        self._loops[t] = result
        return result

    def transport(self, t: float, samples) -> np.ndarray:
        """h_t applied to samples (n,) or (n, B)."""
        samples = np.asarray(samples, dtype=float)
        if t == 0.0:
            return samples.copy()
        loop = self.loop(t)
        return parallel_transport(
            self.norm, loop.loop, samples, atol=self.atol, rtol=self.rtol
        ).y_end

    def max_admissible_t(self, t_target: float, iterations: int = 12) -> float:
        """Largest |t| <= |t_target| (same sign) whose loop stays in chart."""
        lo, hi = 0.0, abs(t_target)
        sgn = 1.0 if t_target >= 0 else -1.0
        if self._loop_ok(sgn * hi):
            return t_target
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if self._loop_ok(sgn * mid):
                lo = mid
            else:
                hi = mid
        return sgn * lo

    def _loop_ok(self, t: float) -> bool:
        try:
            self.loop(t)
            return True
        except (TransportFailure, DomainBoxError):
            return False


def parallelogram_holonomy(
    norm: FinslerNorm, X: SmoothMap, Y: SmoothMap, p, t: float, samples
) -> np.ndarray:
    """Transport samples by h_{t,p}; see ParallelogramTransporter.

    If a flow leaves the chart at scale t, raises FlowEscapeError carrying
    the largest scale that works.
    """
    tr = ParallelogramTransporter(norm, X, Y, p)
    try:
        return tr.transport(t, samples)
    except (TransportFailure, DomainBoxError) as exc:
        t_ok = tr.max_admissible_t(t)
        state = getattr(exc, "last_state", np.asarray(p, dtype=float))
        raise FlowEscapeError(
            f"parallelogram flow escapes chart at scale {t:.6g}; "
            f"max admissible is {t_ok:.6g}",
            t,
            state,
            t_ok,
        ) from exc


def parallelogram_derivatives(
    norm: FinslerNorm,
    X: SmoothMap,
    Y: SmoothMap,
    p,
    v,
    schedule=H_SCHEDULE,
    atol: float = ATOL,
    rtol: float = RTOL,
):
    """First and second t-derivatives of t -> h_t(v) at t = 0.

    Central differences over the fixed halving schedule, extrapolated in
    t^2; h_0(v) = v is exact and anchors the second-difference stencil.
    Returns (first, second) as DerivativeEstimate-like pairs
    ((value, error), (value, error)).
    """
    tr = ParallelogramTransporter(norm, X, Y, p, atol=atol, rtol=rtol)
    v = np.asarray(v, dtype=float)
    firsts, seconds = [], []
    for t in schedule:
        plus = tr.transport(t, v)
        minus = tr.transport(-t, v)
        firsts.append((plus - minus) / (2.0 * t))
        seconds.append((plus - 2.0 * v + minus) / (t * t))
    d1, e1 = richardson_extrapolate(firsts, schedule)
    d2, e2 = richardson_extrapolate(seconds, schedule)
    return (d1, e1), (d2, e2)


@dataclass
class FiberResult:
    p: np.ndarray
    samples: np.ndarray
    transported: np.ndarray | None
    ok: bool
    message: str = ""


@dataclass
class FamilyResult:
    t: float
    fibers: list
    num_failed: int

    @property
    def all_ok(self) -> bool:
        return self.num_failed == 0


def fibered_holonomy_family(
    norm: FinslerNorm,
    X: SmoothMap,
    Y: SmoothMap,
    base_grid,
    t: float,
    samples_per_fiber: int = 8,
) -> FamilyResult:
    """h_t over a grid of base points, one fiber at a time.

    Fibers are independent; failures (chart escapes, stiff spots) are
    collected per fiber and do not abort the rest.
    """
    fibers = []
    failed = 0
    for p in base_grid:
        p = np.asarray(p, dtype=float)
        samples = indicatrix_samples(norm, p, samples_per_fiber)
        try:
            out = parallelogram_holonomy(norm, X, Y, p, t, samples)
            fibers.append(FiberResult(p, samples, out, True))
        except (TransportFailure, DomainBoxError, ValueError) as exc:
            fibers.append(FiberResult(p, samples, None, False, str(exc)))
            failed += 1
    return FamilyResult(t=t, fibers=fibers, num_failed=failed)
