"""Truncated multivariate derivative tables (jets) and smooth functionals.

A jet holds every partial derivative of one scalar quantity of ``m``
variables up to a fixed total order ``K``, stored as *raw* derivative values
(not Taylor coefficients) indexed by sorted multi-index in graded
lexicographic order.  Arithmetic on jets propagates the tables exactly:
products use the multivariate Leibniz rule with multinomial weights,
elementary functions compose through a truncated Taylor expansion of the
outer function.  Any quantity assembled from lifted coordinates therefore
carries its exact derivative table along.

Jets are vectorised: each table entry may be a scalar or an array over a
batch of evaluation points, so one pass over an expression evaluates it on
a whole quadrature grid or Monte Carlo sample set.

The elementary closure is ``+ - * /``, powers, ``exp``, ``log``, ``sin``,
``cos``, ``sqrt`` and the flat unit step ``smoothstep`` (identically 0
left of 0, identically 1 right of 1, C-infinity in between).  The
module-level function wrappers fall back to numpy when handed plain
arrays, so the same coefficient code can run a fast numeric path and a
derivative-carrying path.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np


class JetError(Exception):
    """Base class for jet arithmetic failures."""


class CapabilityError(JetError):
    """A derivative order beyond the declared budget was requested."""


class SingularityError(JetError):
    """Division by a quantity whose order-0 value vanishes."""


class DomainError(JetError):
    """Elementary function evaluated outside its smooth domain."""


# ---------------------------------------------------------------------------
# multi-index tables


@lru_cache(maxsize=None)
def multi_indices(m: int, order: int) -> np.ndarray:
    """All multi-indices of ``m`` variables with total degree <= order.

    Rows are sorted graded-lexicographically (by total degree, then by the
    variable tuple), so the table for order K - 1 is a prefix of the table
    for order K.
    """
    if m < 0 or order < 0:
        raise ValueError("m and order must be nonnegative")
    rows = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(m), deg):
            alpha = [0] * m
            for i in combo:
                alpha[i] += 1
            rows.append(alpha)
    out = np.array(rows, dtype=np.int64).reshape(len(rows), m)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def table_size(m: int, order: int) -> int:
    return math.comb(m + order, order) if m > 0 else 1


@lru_cache(maxsize=None)
def _positions(m: int, order: int) -> dict:
    return {tuple(a): i for i, a in enumerate(multi_indices(m, order))}


def index_of(m: int, order: int, alpha) -> int:
    """Row of ``alpha`` in the order-``order`` table."""
    key = tuple(int(a) for a in alpha)
    if len(key) != m or any(a < 0 for a in key):
        raise ValueError(f"bad multi-index {alpha} for m={m}")
    if sum(key) > order:
        raise CapabilityError(f"|{alpha}| exceeds table order {order}")
    return _positions(m, order)[key]


@lru_cache(maxsize=None)
def _mul_table(m: int, order: int):
    """Sparse Leibniz table: out[iz] += coef * x[ix] * y[iy].

    Raw-derivative storage means the split (ax, ay) of az carries the
    multinomial weight prod_j C(az_j, ax_j).
    """
    idx = multi_indices(m, order)
    pos = _positions(m, order)
    degs = idx.sum(axis=1)
    terms = []
    for ix in range(len(idx)):
        ax = idx[ix]
        for iy in range(len(idx)):
            if degs[ix] + degs[iy] > order:
                continue
            az = ax + idx[iy]
            iz = pos[tuple(az)]
            coef = 1.0
            for j in range(m):
                coef *= math.comb(int(az[j]), int(ax[j]))
            terms.append((iz, ix, iy, coef))
    terms.sort(key=lambda t: (t[0], t[1], t[2]))
    iz = np.array([t[0] for t in terms], dtype=np.int64)
    ix = np.array([t[1] for t in terms], dtype=np.int64)
    iy = np.array([t[2] for t in terms], dtype=np.int64)
    cf = np.array([t[3] for t in terms], dtype=float)
    # group boundaries for reduceat; every output row occurs (az = az + 0)
    starts = np.searchsorted(iz, np.arange(len(idx)))
    return ix, iy, cf, starts


@lru_cache(maxsize=None)
def _shift_table(m: int, order: int, i: int) -> np.ndarray:
    """Gather map: row beta of the (order-1) table <- row beta+e_i."""
    if order < 1:
        raise CapabilityError("cannot differentiate an order-0 jet")
    pos = _positions(m, order)
    sub = multi_indices(m, order - 1)
    out = np.empty(len(sub), dtype=np.int64)
    for r, beta in enumerate(sub):
        b = list(beta)
        b[i] += 1
        out[r] = pos[tuple(b)]
    out.setflags(write=False)
    return out


# batch chunk cap for the Leibniz inner product, keeps peak memory bounded
_MUL_CHUNK = 1 << 22


class Jet:
    """Dense derivative table of one scalar quantity at one (batched) point.

    ``values`` has shape ``(table_size(m, order),) + batch`` and stores raw
    partial derivatives, one entry per sorted multi-index.  Binary
    operations align differing orders by truncating to the smaller one.
    """

    __slots__ = ("m", "order", "values")

    def __init__(self, m: int, order: int, values):
        if m < 0 or order < 0:
            raise ValueError("m and order must be nonnegative")
        values = np.asarray(values, dtype=float)
        nd = table_size(m, order)
        if values.ndim == 0 or values.shape[0] != nd:
            raise ValueError(
                f"values must have leading dimension {nd} for m={m}, order={order}"
            )
        self.m = m
        self.order = order
        self.values = values

    # -- basic access -------------------------------------------------

    @property
    def value(self):
        """Order-0 entry (the plain evaluation)."""
        return self.values[0]

    @property
    def batch_shape(self):
        return self.values.shape[1:]

    def partial(self, alpha):
        """Raw partial derivative for the sorted multi-index ``alpha``."""
        return self.values[index_of(self.m, self.order, alpha)]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise CapabilityError(
                f"cannot extend order {self.order} jet to order {order}"
            )
        if order == self.order:
            return self
        return Jet(self.m, order, self.values[: table_size(self.m, order)])

    def shift(self, i: int) -> "Jet":
        """Derivative table of the i-th partial, one order lower."""
        if not 0 <= i < self.m:
            raise ValueError(f"variable index {i} out of range for m={self.m}")
        gather = _shift_table(self.m, self.order, i)
        return Jet(self.m, self.order - 1, self.values[gather])

    def copy(self) -> "Jet":
        return Jet(self.m, self.order, self.values.copy())

    def __repr__(self):
        return f"Jet(m={self.m}, order={self.order}, value={self.value!r})"

    # -- ring operations ----------------------------------------------

    def _align(self, other: "Jet"):
        if self.m != other.m:
            raise ValueError("jets live over different coordinate spaces")
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.m, a.order, a.values + b.values)
        out = self.values.copy()
        out[0] = out[0] + other
        return Jet(self.m, self.order, out)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.m, self.order, -self.values)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.m, self.order, self.values * other)
        a, b = self._align(other)
        ix, iy, cf, starts = _mul_table(a.m, a.order)
        av, bv = a.values, b.values
        batch = np.broadcast_shapes(av.shape[1:], bv.shape[1:])
        bs = int(np.prod(batch)) if batch else 1
        if len(ix) * max(bs, 1) <= _MUL_CHUNK or not batch:
            prods = cf.reshape((-1,) + (1,) * len(batch)) * av[ix] * bv[iy]
            out = np.add.reduceat(prods, starts, axis=0)
        else:
            # chunk the batch axis to bound the (terms x batch) intermediate
            av = np.broadcast_to(av, (av.shape[0],) + batch).reshape(len(av), bs)
            bv = np.broadcast_to(bv, (bv.shape[0],) + batch).reshape(len(bv), bs)
            step = max(1, _MUL_CHUNK // len(ix))
            out = np.empty((table_size(a.m, a.order), bs))
            for lo in range(0, bs, step):
                hi = min(lo + step, bs)
                prods = cf[:, None] * av[ix, lo:hi] * bv[iy, lo:hi]
                out[:, lo:hi] = np.add.reduceat(prods, starts, axis=0)
            out = out.reshape((len(out),) + batch)
        return Jet(a.m, a.order, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * _reciprocal(other)
        return Jet(self.m, self.order, self.values / other)

    def __rtruediv__(self, other):
        return _reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)):
            p = int(p)
            if p < 0:
                return _reciprocal(self.__pow__(-p))
            out = constant(1.0, self.m, self.order, self.batch_shape)
            base = self
            while p:
                if p & 1:
                    out = out * base
                base = base * base if p > 1 else base
                p >>= 1
            return out
        return _powf(self, float(p))


# ---------------------------------------------------------------------------
# constructors


def constant(c, m: int, order: int, batch_shape=()) -> Jet:
    vals = np.zeros((table_size(m, order),) + tuple(batch_shape))
    vals[0] = c
    return Jet(m, order, vals)


def lift(point, order: int) -> list:
    """Coordinate jets of the evaluation point.

    ``point`` has shape ``(m,)`` or ``(m,) + batch``.  Returns one jet per
    coordinate: value the coordinate itself, first derivative 1 in its own
    slot, everything else 0.
    """
    point = np.asarray(point, dtype=float)
    if point.ndim == 0:
        raise ValueError("point must carry a leading coordinate axis")
    m = point.shape[0]
    batch = point.shape[1:]
    out = []
    for i in range(m):
        vals = np.zeros((table_size(m, order),) + batch)
        vals[0] = point[i]
        if order >= 1:
            e_i = [0] * m
            e_i[i] = 1
            vals[index_of(m, order, e_i)] = 1.0
        out.append(Jet(m, order, vals))
    return out


# ---------------------------------------------------------------------------
# composition with a univariate outer function


def compose(jet: Jet, derivs: np.ndarray) -> Jet:
    """Jet of f(X) from the outer derivatives f^(k)(X.value), k = 0..order.

    ``derivs`` has shape ``(order+1,) + batch``.  Uses the truncated Taylor
    form f(X) = sum_k f^(k)(x0)/k! (X - x0)^k evaluated by Horner in the
    jet ring; the shifted jet is nilpotent so the truncation is exact.
    """
    K = jet.order
    derivs = np.asarray(derivs, dtype=float)
    if derivs.shape[0] != K + 1:
        raise ValueError("need one outer derivative per order")
    shifted = jet.values.copy()
    shifted[0] = 0.0
    xt = Jet(jet.m, K, shifted)
    out = constant(0.0, jet.m, K, jet.batch_shape)
    out.values[0] = derivs[K] / math.factorial(K)
    for k in range(K - 1, -1, -1):
        out = out * xt
        out.values[0] = out.values[0] + derivs[k] / math.factorial(k)
    return out


def _outer_stack(fn, u0, K):
    return np.stack([fn(k, u0) for k in range(K + 1)])


def _reciprocal(x: Jet) -> Jet:
    u0 = np.asarray(x.value)
    if np.any(u0 == 0.0):
        raise SingularityError("division by a jet with vanishing value")
    derivs = _outer_stack(
        lambda k, u: ((-1.0) ** k) * math.factorial(k) * u ** (-(k + 1)), u0, x.order
    )
    return compose(x, derivs)


def _powf(x: Jet, p: float) -> Jet:
    u0 = np.asarray(x.value)
    if np.any(u0 <= 0.0):
        raise DomainError("fractional power of a nonpositive jet")

    def d(k, u):
        c = 1.0
        for j in range(k):
            c *= p - j
        return c * u ** (p - k)

    return compose(x, _outer_stack(d, u0, x.order))


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e0 = np.exp(np.asarray(x.value))
    return compose(x, np.stack([e0] * (x.order + 1)))


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    u0 = np.asarray(x.value)
    if np.any(u0 <= 0.0):
        raise DomainError("log of a nonpositive jet")

    def d(k, u):
        if k == 0:
            return np.log(u)
        return ((-1.0) ** (k - 1)) * math.factorial(k - 1) * u ** (-k)

    return compose(x, _outer_stack(d, u0, x.order))


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    return _powf(x, 0.5)


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    u0 = np.asarray(x.value)
    cycle = [np.sin(u0), np.cos(u0), -np.sin(u0), -np.cos(u0)]
    return compose(x, np.stack([cycle[k % 4] for k in range(x.order + 1)]))


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    u0 = np.asarray(x.value)
    cycle = [np.cos(u0), -np.sin(u0), -np.cos(u0), np.sin(u0)]
    return compose(x, np.stack([cycle[k % 4] for k in range(x.order + 1)]))


# ---------------------------------------------------------------------------
# the flat unit step


# Inside (_STEP_MARGIN, 1 - _STEP_MARGIN) the step is evaluated by jet
# arithmetic on exp(-1/t); outside, value and all derivatives are flat to
# far below double precision (at t = 5e-3 the largest order-6 term is
# ~ exp(-200) * 200^12, about 1e-60), so the plateaus are returned exactly.
_STEP_MARGIN = 5e-3


def smoothstep_derivs(t, order: int) -> np.ndarray:
    """Raw derivatives S^(k)(t), k = 0..order, of the flat unit step.

    S(t) = e(t) / (e(t) + e(1-t)) with e(t) = exp(-1/t) for t > 0 else 0;
    S is 0 on (-inf, 0], 1 on [1, inf) and strictly increasing between.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros((order + 1,) + t.shape)
    flat = t.reshape(-1)
    res = out.reshape(order + 1, -1)
    res[0][flat >= 1.0 - _STEP_MARGIN] = 1.0
    mid = (flat > _STEP_MARGIN) & (flat < 1.0 - _STEP_MARGIN)
    if np.any(mid):
        (tj,) = lift(flat[mid][None, :], order)
        e1 = exp(-(1.0 / tj))
        e2 = exp(-(1.0 / (1.0 - tj)))
        s = e1 / (e1 + e2)
        res[:, mid] = s.values
    return out


def smoothstep(x):
    """Flat unit step of a jet (or the plain values for an array)."""
    if not isinstance(x, Jet):
        return smoothstep_derivs(x, 0)[0]
    return compose(x, smoothstep_derivs(np.asarray(x.value), x.order))


# ---------------------------------------------------------------------------
# operation dispatch


_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "pow": lambda a, b: a ** b,
}

_UNARY = {
    "neg": lambda a: -a,
    "exp": exp,
    "log": log,
    "sin": sin,
    "cos": cos,
    "sqrt": sqrt,
    "smoothstep": smoothstep,
}


def combine(op: str, *args):
    """Apply a named elementary operation to jets or arrays."""
    if op in _BINARY:
        if len(args) != 2:
            raise ValueError(f"operation {op!r} takes two arguments")
        return _BINARY[op](*args)
    if op in _UNARY:
        if len(args) != 1:
            raise ValueError(f"operation {op!r} takes one argument")
        return _UNARY[op](*args)
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# functionals


class Functional:
    """Smooth map R^m -> R^d evaluated to jets of any requested order.

    ``fn`` receives the list of lifted coordinate jets and returns one jet
    (d = 1) or a sequence of d jets, built from the elementary closure.
    ``max_order`` declares the derivative budget; requests beyond it raise
    CapabilityError.
    """

    def __init__(self, input_dim: int, output_dim: int, fn, max_order: int = 6,
                 name: str = ""):
        if input_dim < 1 or output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.fn = fn
        self.max_order = max_order
        self.name = name

    def jets(self, point, order: int) -> list:
        if order < 0:
            raise ValueError("order must be nonnegative")
        if order > self.max_order:
            raise CapabilityError(
                f"order {order} exceeds budget {self.max_order}"
                + (f" of {self.name}" if self.name else "")
            )
        point = np.asarray(point, dtype=float)
        if point.shape[0] != self.input_dim:
            raise ValueError(
                f"point has {point.shape[0]} coordinates, expected {self.input_dim}"
            )
        coords = lift(point, order)
        out = self.fn(coords)
        if isinstance(out, Jet):
            out = [out]
        out = list(out)
        if len(out) != self.output_dim:
            raise ValueError(
                f"functional returned {len(out)} components, "
                f"declared {self.output_dim}"
            )
        fixed = []
        for j in out:
            if not isinstance(j, Jet):  # constant component
                j = constant(j, self.input_dim, order, point.shape[1:])
            fixed.append(j.truncate(order))
        return fixed

    def values(self, point) -> np.ndarray:
        """Order-0 evaluation, shape (output_dim,) + batch."""
        return np.stack([j.value for j in self.jets(point, 0)])

    def component(self, i: int) -> "Functional":
        if not 0 <= i < self.output_dim:
            raise ValueError(f"component {i} out of range")
        if self.output_dim == 1:
            return self
        return Functional(
            self.input_dim, 1, lambda coords: self.fn(coords)[i],
            max_order=self.max_order,
            name=f"{self.name}[{i}]" if self.name else "",
        )


def derivative(functional: Functional, point, alpha) -> np.ndarray:
    """Partial derivative table lookup for one multi-index."""
    alpha = tuple(int(a) for a in alpha)
    jets_ = functional.jets(point, sum(alpha))
    out = np.stack([j.partial(alpha) for j in jets_])
    return out[0] if functional.output_dim == 1 else out
