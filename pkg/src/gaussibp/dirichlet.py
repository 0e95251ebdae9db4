"""Gaussian instantiation of the integration-by-parts structure.

The underlying space is R^m with the standard normal law.  The carre du
champ is gamma(F, G) = sum_i dF/dx_i dG/dx_i and the generator is the
Ornstein-Uhlenbeck operator L F = Lap F - x . grad F, the unique pair for
which E(gamma(F, G)) = -E(F LG) holds exactly.

Expectations come from tensorised Gauss-Hermite quadrature for m <= 4 and
from seeded Monte Carlo beyond; quadrature results are exact up to the
rule's own error and are tagged with a zero standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermitenorm

from . import jets
from .jets import CapabilityError, DomainError, Jet, SingularityError

QUADRATURE_MAX_DIM = 4

_DEFAULT_QUAD = {1: 200, 2: 100, 3: 32, 4: 12}


@dataclass(frozen=True)
class Expectation:
    """One expectation with its uncertainty; ``se`` is 0 for quadrature."""

    value: float
    se: float
    method: str

    @property
    def exact(self) -> bool:
        return self.method == "quadrature"


class GaussianSpace:
    """Standard normal law on R^m with quadrature and seeded sampling."""

    def __init__(self, dim: int, quad_order: int | None = None, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = int(seed)
        if quad_order is None:
            quad_order = _DEFAULT_QUAD.get(dim, 0)
        self.quad_order = int(quad_order)
        self._nodes = None
        self._weights = None

    # -- quadrature ----------------------------------------------------

    @property
    def has_quadrature(self) -> bool:
        return self.dim <= QUADRATURE_MAX_DIM and self.quad_order > 0

    def nodes_weights(self):
        """Tensorised Gauss-Hermite rule for the standard normal weight."""
        if not self.has_quadrature:
            raise CapabilityError(
                f"no quadrature rule for dim={self.dim}, order={self.quad_order}"
            )
        if self._nodes is None:
            x, w = roots_hermitenorm(self.quad_order)
            w = w / np.sqrt(2.0 * np.pi)
            grids = np.meshgrid(*([x] * self.dim), indexing="ij")
            nodes = np.stack([g.ravel() for g in grids])
            weights = np.ones(nodes.shape[1])
            mesh_w = np.meshgrid(*([w] * self.dim), indexing="ij")
            for g in mesh_w:
                weights = weights * g.ravel()
            self._nodes, self._weights = nodes, weights
        return self._nodes, self._weights

    def expect(self, values) -> Expectation:
        """Quadrature expectation of values given on the node grid."""
        _, w = self.nodes_weights()
        values = np.asarray(values)
        if values.shape[-1] != w.shape[0]:
            raise ValueError("values do not match the quadrature grid")
        return Expectation(float(values @ w), 0.0, "quadrature")

    # -- sampling -------------------------------------------------------

    def rng(self, worker: int = 0) -> np.random.Generator:
        """Deterministic substream for (seed, worker index)."""
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(worker,))
        )

    def sample(self, n: int, worker: int = 0) -> np.ndarray:
        """Coordinates shaped (dim, n)."""
        if n < 1:
            raise ValueError("n must be positive")
        return self.rng(worker).standard_normal((self.dim, n))

    def expect_mc(self, values) -> Expectation:
        values = np.asarray(values, dtype=float)
        n = values.shape[-1]
        mean = float(values.mean(axis=-1))
        se = float(values.std(axis=-1, ddof=1) / np.sqrt(n)) if n > 1 else np.inf
        return Expectation(mean, se, "monte-carlo")


# ---------------------------------------------------------------------------
# carre du champ and generator


def gamma_jets(f: Jet, g: Jet) -> Jet:
    """gamma(F, G) at jet level; consumes one derivative order."""
    out = None
    for i in range(f.m):
        term = f.shift(i) * g.shift(i)
        out = term if out is None else out + term
    return out


def ou_jets(f: Jet, coords) -> Jet:
    """L F = Lap F - x . grad F at jet level; consumes two orders."""
    k = f.order - 2
    if k < 0:
        raise CapabilityError("generator needs at least an order-2 jet")
    out = None
    for i in range(f.m):
        term = f.shift(i).shift(i) - coords[i].truncate(k) * f.shift(i).truncate(k)
        out = term if out is None else out + term
    return out


def _single_jets(functional, point, order):
    return [j for j in functional.jets(point, order)]


def gamma(F, G, point, order: int = 0):
    """Carre du champ of two scalar functionals, as an order-``order`` jet."""
    if F.output_dim != 1 or G.output_dim != 1:
        raise ValueError("gamma takes scalar functionals; select a component")
    (f,) = F.jets(point, order + 1)
    (g,) = G.jets(point, order + 1)
    return gamma_jets(f, g)


def ou_generator(F, point, order: int = 0):
    """Ornstein-Uhlenbeck generator of a scalar functional."""
    if F.output_dim != 1:
        raise ValueError("the generator takes a scalar functional")
    (f,) = F.jets(point, order + 2)
    coords = jets.lift(np.asarray(point, dtype=float), order)
    return ou_jets(f, coords)


# ---------------------------------------------------------------------------
# covariance matrices


@dataclass
class CovarianceMatrix:
    """Malliavin covariance of a functional: jet entries plus determinant."""

    dim: int
    entries: list  # dim x dim nested list of Jet
    det: Jet

    def value(self) -> np.ndarray:
        """Order-0 matrix, shape (dim, dim) + batch."""
        return np.stack([
            np.stack([np.asarray(self.entries[i][j].value) for j in range(self.dim)])
            for i in range(self.dim)
        ])


def jet_det(entries, dim: int) -> Jet:
    """Determinant of a jet-valued matrix by cofactor expansion, dim <= 4."""
    if dim == 1:
        return entries[0][0]
    if dim > 4:
        raise CapabilityError("determinants supported for dim <= 4")

    def minor(rows, cols):
        n = len(rows)
        if n == 1:
            return entries[rows[0]][cols[0]]
        out = None
        for j, c in enumerate(cols):
            sub = minor(rows[1:], cols[:j] + cols[j + 1:])
            term = entries[rows[0]][c] * sub
            if j % 2:
                term = -term
            out = term if out is None else out + term
        return out

    idx = tuple(range(dim))
    return minor(idx, idx)


def jet_adjugate(entries, dim: int):
    """Adjugate of a jet-valued matrix (transpose of cofactors), dim <= 3."""
    if dim == 1:
        e = entries[0][0]
        return [[jets.constant(1.0, e.m, e.order, e.batch_shape)]]
    if dim == 2:
        a, b = entries[0]
        c, d = entries[1]
        return [[d, -b], [-c, a]]
    if dim == 3:
        def cof(i, j):
            rows = [r for r in range(3) if r != i]
            cols = [c for c in range(3) if c != j]
            m = (entries[rows[0]][cols[0]] * entries[rows[1]][cols[1]]
                 - entries[rows[0]][cols[1]] * entries[rows[1]][cols[0]])
            return m if (i + j) % 2 == 0 else -m

        # adjugate = cofactor transpose
        return [[cof(j, i) for j in range(3)] for i in range(3)]
    raise CapabilityError("adjugates supported for dim <= 3")


def malliavin_matrix(F, point, order: int = 0) -> CovarianceMatrix:
    """Covariance sigma_F[i,j] = gamma(F_i, F_j) with its determinant."""
    d = F.output_dim
    fj = F.jets(point, order + 1)
    entries = [[None] * d for _ in range(d)]
    for i in range(d):
        for j in range(i, d):
            g = gamma_jets(fj[i], fj[j])
            entries[i][j] = g
            entries[j][i] = g
    return CovarianceMatrix(d, entries, jet_det(entries, d))


# ---------------------------------------------------------------------------
# smooth cutoffs and the localized inverse


def smooth_step(kind: str, eta: float, x):
    """Flat cutoffs driven by one scale.

    kind "lower": 0 on (-inf, eta/2], 1 on [eta, inf).
    kind "upper": 1 on (-inf, eta], 0 on [2 eta, inf).
    Accepts a jet or a plain array.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if kind == "lower":
        t = (x * (2.0 / eta)) - 1.0 if isinstance(x, Jet) else 2.0 * np.asarray(x) / eta - 1.0
        return jets.smoothstep(t)
    if kind == "upper":
        t = (x * (1.0 / eta)) - 1.0 if isinstance(x, Jet) else np.asarray(x) / eta - 1.0
        s = jets.smoothstep(t)
        return 1.0 - s
    raise ValueError(f"unknown cutoff kind {kind!r}")


def _loc_inverse_derivs(u, eta: float, order: int) -> np.ndarray:
    """Raw derivatives of u -> step_lower(u; eta) / u.

    Flat 0 for u <= eta/2, exactly 1/u beyond the transition, jet
    arithmetic on the product inside [eta/2, eta].
    """
    u = np.asarray(u, dtype=float)
    out = np.zeros((order + 1,) + u.shape)
    flat = u.reshape(-1)
    res = out.reshape(order + 1, -1)
    lo = eta / 2.0
    t = (flat - lo) / lo  # unit-step argument
    hi_mask = t >= 1.0 - jets._STEP_MARGIN
    if np.any(hi_mask):
        uh = flat[hi_mask]
        for k in range(order + 1):
            res[k][hi_mask] = ((-1.0) ** k) * math.factorial(k) * uh ** (-(k + 1))
    mid_mask = (t > jets._STEP_MARGIN) & ~hi_mask
    if np.any(mid_mask):
        (uj,) = jets.lift(flat[mid_mask][None, :], order)
        val = smooth_step("lower", eta, uj) / uj
        res[:, mid_mask] = val.values
    return out


def localized_inverse(x, eta: float):
    """step_lower(x; eta) / x: a globally smooth stand-in for 1/x.

    Vanishes identically below eta/2, equals 1/x at and above eta.
    Accepts a jet (returns a jet) or a plain array.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if not isinstance(x, Jet):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        mask = x > eta / 2.0
        out[mask] = smooth_step("lower", eta, x[mask]) / x[mask]
        return out
    derivs = _loc_inverse_derivs(np.asarray(x.value), eta, x.order)
    return jets.compose(x, derivs)
