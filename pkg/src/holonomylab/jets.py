"""Truncated Taylor-jet arithmetic and finite-difference derivative estimates.

Forward-mode derivatives are carried as dense coefficient tables over a finite
multi-index set.  A jet stores Taylor coefficients (derivative divided by the
factorial of the multi-index), which makes multiplication a plain truncated
convolution; callers read derivatives back through :meth:`Jet.derivative`.

Two derivative routes are provided on purpose: exact jet propagation and
Richardson-extrapolated central differences.  They share no code beyond the
function being differentiated, so each one validates the other.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse

__all__ = [
    "DEFAULT_ORDER",
    "Jet",
    "JetSpace",
    "JetDomainError",
    "JetOrderError",
    "JetShapeError",
    "DomainBoxError",
    "SmoothMap",
    "DerivativeEstimate",
    "jet_space",
    "grouped_space",
    "jet_constant",
    "jet_variable",
    "jet_point",
    "jet_arithmetic",
    "compose_table",
    "curve_derivative",
    "mixed_partial",
    "finite_difference_weights",
    "richardson_extrapolate",
]

DEFAULT_ORDER = 4

_RICHARDSON_SCHEDULE = (0.1, 0.05, 0.025, 0.0125)


class JetDomainError(ValueError):
    """An elementary operation left its analytic domain (sqrt of a negative
    value part, log of a nonpositive one, division by a zero value part)."""


class JetShapeError(ValueError):
    """Operands live in different jet spaces."""


class JetOrderError(ValueError):
    """A derivative was requested beyond what the coefficient table carries."""


class DomainBoxError(ValueError):
    """A SmoothMap was evaluated outside its declared domain box."""


def _group_indices(size: int, cap: int) -> list[tuple[int, ...]]:
    """All multi-indices over `size` variables with total degree <= cap."""
    if size == 0:
        return [()]
    out = []
    for head in range(cap + 1):
        for tail in _group_indices(size - 1, cap - head):
            out.append((head,) + tail)
    return out


class JetSpace:
    """Multi-index bookkeeping shared by every jet of one shape.

    A space is described by variable groups ``((size, cap), ...)``: the index
    set holds each multi-index whose total degree inside every group stays at
    or below that group's cap.  A single group ``(n, m)`` is the ordinary
    complete table of mixed partials up to total degree ``m``.  Group caps let
    geometry code carry, say, one x-derivative alongside four y-derivatives
    without paying for a full degree-5 table; truncated products remain exact
    on every retained index because the index set is downward closed.
    """

    _cache: dict[tuple, "JetSpace"] = {}

    def __init__(self, groups: tuple[tuple[int, int], ...]):
        self.groups = groups
        self.num_vars = sum(size for size, _ in groups)
        self.caps = tuple(cap for _, cap in groups)
        self.max_total = sum(self.caps)
        # Largest total degree for which *all* multi-indices are present.
        self.order = min(self.caps) if groups else 0

        per_group = [_group_indices(size, cap) for size, cap in groups]
        tuples: list[tuple[int, ...]] = [()]
        for block in per_group:
            tuples = [t + b for t in tuples for b in block]
        tuples.sort(key=lambda t: (sum(t), t))
        self.tuples = tuples
        self.size = len(tuples)
        self.multi = np.array(tuples, dtype=np.int64).reshape(self.size, self.num_vars)
        self.position = {t: i for i, t in enumerate(tuples)}
        self.fact = np.array(
            [math.prod(math.factorial(d) for d in t) for t in tuples], dtype=float
        )

        # var -> group lookup
        self._group_of_var = []
        for g, (size, _) in enumerate(groups):
            self._group_of_var.extend([g] * size)

        self._mul = None
        self._shift: dict[int, tuple["JetSpace", np.ndarray, np.ndarray]] = {}
        self._trunc: dict[tuple, np.ndarray] = {}
        self._mono_parent: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def create(cls, groups: tuple[tuple[int, int], ...]) -> "JetSpace":
        space = cls._cache.get(groups)
        if space is None:
            space = cls._cache[groups] = cls(groups)
        return space

    def __repr__(self):  # pragma: no cover
        return f"JetSpace{self.groups}"

    # -- multiplication -------------------------------------------------

    def _mul_table(self):
        """Sparse fold matrix for the truncated convolution, built once.

        Multi-indices are encoded in a mixed radix wide enough that adding two
        admissible indices never carries, so pair sums can be looked up in a
        flat table.
        """
        if self._mul is not None:
            return self._mul
        radix = np.array(
            [2 * self.caps[self._group_of_var[v]] + 1 for v in range(self.num_vars)],
            dtype=np.int64,
        )
        stride = np.ones(self.num_vars, dtype=np.int64)
        for v in range(self.num_vars - 2, -1, -1):
            stride[v] = stride[v + 1] * radix[v + 1]
        codes = self.multi @ stride
        lookup = np.full(int(radix.prod()) if self.num_vars else 1, -1, dtype=np.int64)
        lookup[codes] = np.arange(self.size)
        pair_codes = codes[:, None] + codes[None, :]
        kk = lookup[pair_codes]
        ii, jj = np.nonzero(kk >= 0)
        kk = kk[ii, jj]
        fold = scipy.sparse.csr_matrix(
            (np.ones(len(kk)), (kk, np.arange(len(kk)))), shape=(self.size, len(kk))
        )
        self._mul = (ii, jj, fold)
        return self._mul

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        ii, jj, fold = self._mul_table()
        return fold @ (a[ii] * b[jj])

    # -- structural maps -------------------------------------------------

    def shift(self, var: int):
        """Space and index maps realizing the table of d/d(var)."""
        hit = self._shift.get(var)
        if hit is not None:
            return hit
        g = self._group_of_var[var]
        if self.caps[g] == 0:
            raise JetOrderError(
                f"derivative in variable {var} needs group cap >= 1, space has {self.groups}"
            )
        groups = tuple(
            (size, cap - 1) if i == g else (size, cap)
            for i, (size, cap) in enumerate(self.groups)
        )
        dst = JetSpace.create(groups)
        src_pos = np.empty(dst.size, dtype=np.int64)
        scale = np.empty(dst.size, dtype=float)
        for i, t in enumerate(dst.tuples):
            lifted = list(t)
            lifted[var] += 1
            src_pos[i] = self.position[tuple(lifted)]
            scale[i] = lifted[var]
        self._shift[var] = (dst, src_pos, scale)
        return self._shift[var]

    def truncation(self, groups: tuple[tuple[int, int], ...]) -> np.ndarray:
        """Positions in self of every index of the (smaller) target space."""
        hit = self._trunc.get(groups)
        if hit is None:
            dst = JetSpace.create(groups)
            hit = np.array([self.position[t] for t in dst.tuples], dtype=np.int64)
            self._trunc[groups] = hit
        return hit

    def monomial_parents(self):
        """(parent position, variable) pairs for incremental monomial building,
        valid because indices are stored in graded order."""
        if self._mono_parent is None:
            parents = np.zeros(self.size, dtype=np.int64)
            last_var = np.zeros(self.size, dtype=np.int64)
            for i, t in enumerate(self.tuples):
                if i == 0:
                    continue
                v = max(k for k, d in enumerate(t) if d > 0)
                down = list(t)
                down[v] -= 1
                parents[i] = self.position[tuple(down)]
                last_var[i] = v
            self._mono_parent = (parents, last_var)
        return self._mono_parent


def jet_space(num_vars: int, order: int) -> JetSpace:
    """The complete table of mixed partials up to total degree `order`."""
    return JetSpace.create(((num_vars, order),))


def grouped_space(groups: Sequence[tuple[int, int]]) -> JetSpace:
    return JetSpace.create(tuple((int(s), int(c)) for s, c in groups))


class Jet:
    """A truncated Taylor expansion.

    `coeffs` has shape ``(space.size,)`` or ``(space.size, batch)``; the batch
    axis carries independent expansions through every operation at once.
    Values are Taylor coefficients; :meth:`derivative` rescales by factorials.
    """

    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # -- construction ----------------------------------------------------

    @staticmethod
    def constant(space: JetSpace, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((space.size,) + value.shape)
        coeffs[0] = value
        return Jet(space, coeffs)

    @staticmethod
    def variable(space: JetSpace, var: int, value) -> "Jet":
        jet = Jet.constant(space, value)
        seed = tuple(1 if v == var else 0 for v in range(space.num_vars))
        pos = space.position.get(seed)
        if pos is None:
            raise JetOrderError(f"space {space.groups} cannot seed variable {var}")
        jet.coeffs[pos] = 1.0
        return jet

    # -- inspection --------------------------------------------------------

    @property
    def value(self):
        return self.coeffs[0]

    @property
    def batch(self):
        return None if self.coeffs.ndim == 1 else self.coeffs.shape[1]

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def num_vars(self) -> int:
        return self.space.num_vars

    def derivative(self, multi):
        """Mixed partial derivative for a multi-index (int allowed in 1 var)."""
        if isinstance(multi, numbers.Integral):
            multi = (int(multi),)
        multi = tuple(int(m) for m in multi)
        pos = self.space.position.get(multi)
        if pos is None:
            raise JetOrderError(
                f"multi-index {multi} not carried by space {self.space.groups}"
            )
        return self.coeffs[pos] * self.space.fact[pos]

    def derivatives_1d(self) -> np.ndarray:
        """All derivatives (0..order) of a one-variable jet."""
        if self.space.num_vars != 1:
            raise JetShapeError("derivatives_1d needs a one-variable jet")
        return self.coeffs * self.space.fact if self.coeffs.ndim == 1 else self.coeffs * self.space.fact[:, None]

    def copy(self) -> "Jet":
        return Jet(self.space, self.coeffs.copy())

    # -- ring operations ---------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise JetShapeError(
                    f"mixed spaces {self.space.groups} and {other.space.groups}"
                )
            return other
        return None

    def _with_operand(self, other):
        # a 1-d numeric operand acts per batch column; promote if unbatched
        arr = np.asarray(other, dtype=float)
        coeffs = self.coeffs
        if arr.ndim == 1 and coeffs.ndim == 1:
            coeffs = np.repeat(coeffs[:, None], arr.shape[0], axis=1)
        return coeffs, arr

    def __add__(self, other):
        rhs = self._coerce(other)
        if rhs is not None:
            a, b = self.coeffs, rhs.coeffs
            if a.ndim != b.ndim:
                a, b = (a[:, None], b) if a.ndim == 1 else (a, b[:, None])
            return Jet(self.space, a + b)
        coeffs, arr = self._with_operand(other)
        out = coeffs.copy() if coeffs is self.coeffs else coeffs
        out[0] = out[0] + arr
        return Jet(self.space, out)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            coeffs, arr = self._with_operand(other)
            return Jet(self.space, coeffs * arr)
        a, b = self.coeffs, rhs.coeffs
        if a.ndim != b.ndim:
            # scalar jet against batched jet: broadcast the thin one
            if a.ndim == 1:
                a = np.broadcast_to(a[:, None], b.shape)
            else:
                b = np.broadcast_to(b[:, None], a.shape)
        return Jet(self.space, self.space.multiply(a, b))

    __rmul__ = __mul__

    def __truediv__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            coeffs, arr = self._with_operand(other)
            return Jet(self.space, coeffs / arr)
        return self * rhs._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, numbers.Integral):
            p = int(p)
            if p < 0:
                return self._reciprocal() ** (-p)
            out = Jet.constant(self.space, np.ones(() if self.batch is None else (self.batch,)))
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return self._analytic(_pow_series(float(p)), f"power {p}", positive=True)

    # -- analytic functions -------------------------------------------------

    def _analytic(self, series_fn, label: str, positive=False, nonzero=False) -> "Jet":
        c = np.asarray(self.value, dtype=float)
        if positive and np.any(c <= 0.0):
            raise JetDomainError(f"{label} needs a positive value part, got {c!r}")
        if nonzero and np.any(c == 0.0):
            raise JetDomainError(f"{label} needs a nonzero value part")
        m = self.space.max_total
        series = series_fn(c, m)  # shape (m+1,) + c.shape
        w = self.copy()
        w.coeffs[0] = 0.0
        out = Jet.constant(self.space, series[m])
        for j in range(m - 1, -1, -1):
            out = out * w
            out.coeffs[0] = out.coeffs[0] + series[j]
        return out

    def _reciprocal(self) -> "Jet":
        return self._analytic(_recip_series, "division", nonzero=True)

    def sqrt(self) -> "Jet":
        if self.space.max_total == 0:
            if np.any(np.asarray(self.value) < 0.0):
                raise JetDomainError("sqrt of a negative value part")
            return Jet(self.space, np.sqrt(self.coeffs))
        return self._analytic(_sqrt_series, "sqrt", positive=True)

    def exp(self) -> "Jet":
        return self._analytic(_exp_series, "exp")

    def log(self) -> "Jet":
        return self._analytic(_log_series, "log", positive=True)

    def sin(self) -> "Jet":
        return self._analytic(_sin_series, "sin")

    def cos(self) -> "Jet":
        return self._analytic(_cos_series, "cos")

    # -- structural operations ----------------------------------------------

    def derivative_table(self, var: int) -> "Jet":
        """The jet of d(self)/d(var), one cap lower in var's group."""
        dst, src_pos, scale = self.space.shift(var)
        coeffs = self.coeffs[src_pos]
        coeffs = coeffs * (scale if coeffs.ndim == 1 else scale[:, None])
        return Jet(dst, coeffs)

    def truncated(self, groups) -> "Jet":
        groups = tuple(groups)
        take = self.space.truncation(groups)
        return Jet(JetSpace.create(groups), self.coeffs[take])

    def drop_zero_vars(self, keep: Sequence[int], groups) -> "Jet":
        """Restrict to the sub-table where all dropped variables have degree 0.

        `keep` lists surviving variable positions, `groups` describes the
        target space over exactly those variables.
        """
        dst = JetSpace.create(tuple(groups))
        take = np.empty(dst.size, dtype=np.int64)
        for i, t in enumerate(dst.tuples):
            full = [0] * self.space.num_vars
            for v, d in zip(keep, t):
                full[v] = d
            take[i] = self.space.position[tuple(full)]
        return Jet(dst, self.coeffs[take])


def jet_constant(space: JetSpace, value) -> Jet:
    return Jet.constant(space, value)


def jet_variable(space: JetSpace, var: int, value) -> Jet:
    return Jet.variable(space, var, value)


def jet_point(space: JetSpace, values) -> list[Jet]:
    """Seed one jet per variable, carrying `values` as the expansion point."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != space.num_vars:
        raise JetShapeError(
            f"expected {space.num_vars} coordinates, got {values.shape[0]}"
        )
    return [Jet.variable(space, v, values[v]) for v in range(space.num_vars)]


_UNARY = {"sqrt", "sin", "cos", "exp", "log"}


def jet_arithmetic(a: Jet, b=None, op: str = "add") -> Jet:
    """Named dispatch over the elementary jet operations.

    `b` is the second operand for add/sub/mul/div, the exponent for pow, and
    ignored for the unary functions.
    """
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "pow":
        return a ** b
    if op in _UNARY:
        return getattr(a, op)()
    raise ValueError(f"unknown jet operation {op!r}")


# -- Taylor series of the elementary functions at a point --------------------


def _stack(rows):
    return np.stack([np.asarray(r, dtype=float) for r in rows])


def _exp_series(c, m):
    e = np.exp(c)
    return _stack([e / math.factorial(j) for j in range(m + 1)])


def _log_series(c, m):
    rows = [np.log(c)]
    for j in range(1, m + 1):
        rows.append(((-1.0) ** (j - 1)) / (j * c**j))
    return _stack(rows)


def _sin_series(c, m):
    s, co = np.sin(c), np.cos(c)
    cycle = [s, co, -s, -co]
    return _stack([cycle[j % 4] / math.factorial(j) for j in range(m + 1)])


def _cos_series(c, m):
    s, co = np.sin(c), np.cos(c)
    cycle = [co, -s, -co, s]
    return _stack([cycle[j % 4] / math.factorial(j) for j in range(m + 1)])


def _sqrt_series(c, m):
    rows = [np.sqrt(c)]
    for j in range(1, m + 1):
        rows.append(rows[-1] * (0.5 - (j - 1)) / (j * c))
    return _stack(rows)


def _recip_series(c, m):
    rows = [1.0 / c]
    for j in range(1, m + 1):
        rows.append(-rows[-1] / c)
    return _stack(rows)


def _pow_series(p):
    def series(c, m):
        rows = [c**p]
        for j in range(1, m + 1):
            rows.append(rows[-1] * (p - (j - 1)) / (j * c))
        return _stack(rows)

    return series


def compose_table(table: Jet, args: Sequence[Jet], center) -> Jet:
    """Evaluate a Taylor table on jets whose value parts sit at its center.

    The displacement jets (argument minus center) are nilpotent, so plugging
    them into the table polynomial is exact at the outer truncation order.
    Monomials are built incrementally in graded order (one multiplication per
    table index).
    """
    center = np.asarray(center, dtype=float)
    if len(args) != table.space.num_vars:
        raise JetShapeError(
            f"table over {table.space.num_vars} variables, got {len(args)} arguments"
        )
    outer = args[0].space
    disp = []
    for a, c in zip(args, center):
        w = a - c
        w.coeffs[0] = 0.0 * w.coeffs[0]  # kill rounding dust; exactness needs it
        disp.append(w)
    parents, last_var = table.space.monomial_parents()
    monos: list[Jet | None] = [None] * table.space.size
    ones = np.ones(() if disp[0].batch is None else (disp[0].batch,))
    monos[0] = Jet.constant(outer, ones)
    out = monos[0] * table.coeffs[0]
    for i in range(1, table.space.size):
        monos[i] = monos[parents[i]] * disp[last_var[i]]
        out = out + monos[i] * table.coeffs[i]
    return out


# -- smooth maps --------------------------------------------------------------


class SmoothMap:
    """A jet-in/jet-out pure function with an axis-aligned validity box.

    The evaluator receives one jet per domain variable (all in one space) and
    returns one jet per codomain component.  Plain point evaluation runs the
    same evaluator on order-0 jets, so degenerate jets reproduce values by
    construction.  Evaluation outside the box raises, never extrapolates;
    a relative slack of 1e-9 absorbs rounding at the walls.
    """

    def __init__(
        self,
        fun: Callable[[list[Jet]], Sequence[Jet]],
        dim_in: int,
        dim_out: int,
        lo=None,
        hi=None,
        name: str = "",
    ):
        self.fun = fun
        self.dim_in = dim_in
        self.dim_out = dim_out
        self.lo = None if lo is None else np.asarray(lo, dtype=float)
        self.hi = None if hi is None else np.asarray(hi, dtype=float)
        self.name = name

    def _check_domain(self, values: np.ndarray):
        if self.lo is None and self.hi is None:
            return
        v = np.asarray(values)
        if self.lo is not None:
            slack = 1e-9 * np.maximum(1.0, np.abs(self.lo))
            low = v.T - self.lo if v.ndim > 1 else v - self.lo
            if np.any(low < -slack):
                raise DomainBoxError(
                    f"{self.name or 'map'}: point below domain box {self.lo}"
                )
        if self.hi is not None:
            slack = 1e-9 * np.maximum(1.0, np.abs(self.hi))
            high = self.hi - v.T if v.ndim > 1 else self.hi - v
            if np.any(high < -slack):
                raise DomainBoxError(
                    f"{self.name or 'map'}: point above domain box {self.hi}"
                )

    def jets(self, args: Sequence[Jet]) -> list[Jet]:
        if len(args) != self.dim_in:
            raise JetShapeError(f"{self.name}: expected {self.dim_in} arguments")
        values = np.stack([np.asarray(a.value) for a in args])
        self._check_domain(values)
        out = self.fun(list(args))
        return list(out)

    def jet(self, x, order: int) -> list[Jet]:
        """Jets of the map at the point x, seeded to total degree `order`."""
        x = np.asarray(x, dtype=float)
        space = jet_space(self.dim_in, order)
        return self.jets(jet_point(space, x))

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        space = jet_space(self.dim_in, 0)
        out = self.jets([Jet.constant(space, x[v]) for v in range(self.dim_in)])
        return np.stack([np.asarray(j.value) for j in out])

    def jacobian(self, x) -> np.ndarray:
        out = self.jet(x, 1)
        return np.stack(
            [[j.derivative(tuple(int(v == w) for w in range(self.dim_in)))
              for v in range(self.dim_in)] for j in out]
        )

    def __call__(self, x) -> np.ndarray:
        return self.value(x)


@dataclass(frozen=True)
class DerivativeEstimate:
    """A derivative value with its provenance.

    In richardson mode `error` is the last extrapolation correction (a live
    estimate of the remaining truncation error) and `converged` flags whether
    it cleared the requested threshold; jet mode is exact so error is 0.
    """

    value: np.ndarray
    error: float
    converged: bool
    mode: str


def finite_difference_weights(m: int, xs: Sequence[float], x0: float = 0.0) -> np.ndarray:
    """Fornberg weights for the m-th derivative at x0 on arbitrary nodes."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    d = np.zeros((n, n, m + 1))
    d[0, 0, 0] = 1.0
    c1 = 1.0
    for i in range(1, n):
        c2 = 1.0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            for k in range(min(i, m), -1, -1):
                d[i, j, k] = ((xs[i] - x0) * d[i - 1, j, k] - k * d[i - 1, j, k - 1]) / c3
        for k in range(min(i, m), -1, -1):
            d[i, i, k] = (c1 / c2) * (k * d[i - 1, i - 1, k - 1] - (xs[i - 1] - x0) * d[i - 1, i - 1, k])
        c1 = c2
    return d[n - 1, :, m]


def richardson_extrapolate(values: Sequence[np.ndarray], steps: Sequence[float], power: float = 2.0):
    """Neville extrapolation of step-dependent estimates to step -> 0.

    Assumes an error expansion in steps**power (central stencils give 2).
    Returns (limit, last correction magnitude).
    """
    T = [np.asarray(v, dtype=float) for v in values]
    n = len(T)
    if n != len(steps):
        raise ValueError("one value per step required")
    if n == 1:
        return T[0], float("inf")
    err = None
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            r = (steps[i - j] / steps[i]) ** power
            correction = (T[i] - T[i - 1]) / (r - 1.0)
            if i == n - 1:
                err = float(np.max(np.abs(correction)))
            T[i] = T[i] + correction
    return T[n - 1], err


def _call_value(c, t: float) -> np.ndarray:
    if isinstance(c, SmoothMap):
        return c.value(np.array([t]))
    return np.asarray(c(t), dtype=float)


def _call_jet(c, tjet: Jet):
    out = c.jets([tjet]) if isinstance(c, SmoothMap) else c(tjet)
    if isinstance(out, Jet):
        arr = np.empty((), dtype=object)
        arr[()] = out
        return arr
    return np.asarray(out, dtype=object)


def _collect(jet_arr: np.ndarray, extract) -> np.ndarray | float:
    """Map `extract` over an object array of jets, stacking batched results."""
    parts = [np.asarray(extract(j), dtype=float) for j in jet_arr.ravel()]
    flat = np.stack(parts) if parts else np.zeros((0,))
    value = flat.reshape(jet_arr.shape + flat.shape[1:])
    return float(value) if value.ndim == 0 else value


def _stencil(k: int) -> tuple[np.ndarray, np.ndarray]:
    m = (k + 1) // 2
    nodes = np.arange(-m, m + 1, dtype=float)
    return nodes, finite_difference_weights(k, nodes)


def curve_derivative(
    c,
    k: int,
    mode: str = "jet",
    schedule: Sequence[float] | None = None,
    threshold: float = 1e-5,
) -> DerivativeEstimate:
    """k-th derivative of a one-parameter map at t=0.

    `c` is a SmoothMap with one input or any callable accepting a float (and,
    in jet mode, a Jet).  Jet mode is exact truncated Taylor; richardson mode
    runs a central stencil over a halving step schedule and extrapolates,
    reporting the residual.  A residual above `threshold` (relative to the
    value scale) flags the estimate as non-converged; the value is still
    returned.
    """
    if k < 0:
        raise ValueError("derivative order must be >= 0")
    if mode == "jet":
        space = jet_space(1, k)
        jets = _call_jet(c, Jet.variable(space, 0, 0.0))
        return DerivativeEstimate(_collect(jets, lambda j: j.derivative(k)), 0.0, True, "jet")
    if mode != "richardson":
        raise ValueError(f"unknown mode {mode!r}")
    schedule = tuple(schedule) if schedule is not None else _RICHARDSON_SCHEDULE
    nodes, weights = _stencil(k)
    estimates = []
    for h in schedule:
        acc = None
        for node, w in zip(nodes, weights):
            if w == 0.0:
                continue
            term = w * _call_value(c, float(node * h))
            acc = term if acc is None else acc + term
        estimates.append(acc / h**k)
    value, err = richardson_extrapolate(estimates, schedule)
    if value.ndim == 0:
        value = float(value)
    scale = max(1.0, float(np.max(np.abs(value))))
    return DerivativeEstimate(value, err, bool(err <= threshold * scale), "richardson")


def mixed_partial(
    f,
    k: int,
    l: int,
    mode: str = "jet",
    schedule: Sequence[float] | None = None,
    threshold: float = 1e-5,
) -> DerivativeEstimate:
    """Mixed partial d^{k+l}/dt^k ds^l at the origin of a two-parameter map.

    `f` is a SmoothMap with two inputs or a callable f(t, s); jet mode seeds a
    two-group space carrying exactly (k, l) orders, richardson mode uses a
    tensor-product central stencil with both steps halved together.
    """
    if mode == "jet":
        space = grouped_space(((1, k), (1, l)))
        t = Jet.variable(space, 0, 0.0)
        s = Jet.variable(space, 1, 0.0)
        out = f.jets([t, s]) if isinstance(f, SmoothMap) else f(t, s)
        if isinstance(out, Jet):
            arr = np.empty((), dtype=object)
            arr[()] = out
        else:
            arr = np.asarray(out, dtype=object)
        value = _collect(arr, lambda j: j.derivative((k, l)))
        return DerivativeEstimate(value, 0.0, True, "jet")
    if mode != "richardson":
        raise ValueError(f"unknown mode {mode!r}")
    schedule = tuple(schedule) if schedule is not None else _RICHARDSON_SCHEDULE
    tn, tw = _stencil(k)
    sn, sw = _stencil(l)
    call = (lambda t, s: f.value(np.array([t, s]))) if isinstance(f, SmoothMap) else f
    estimates = []
    for h in schedule:
        acc = None
        for a, wa in zip(tn, tw):
            if wa == 0.0:
                continue
            for b, wb in zip(sn, sw):
                if wb == 0.0:
                    continue
                term = (wa * wb) * np.asarray(call(float(a * h), float(b * h)), dtype=float)
                acc = term if acc is None else acc + term
        estimates.append(acc / h ** (k + l))
    value, err = richardson_extrapolate(estimates, schedule)
    if value.ndim == 0:
        value = float(value)
    scale = max(1.0, float(np.max(np.abs(value))))
    return DerivativeEstimate(value, err, bool(err <= threshold * scale), "richardson")
