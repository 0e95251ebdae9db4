"""Integration-by-parts weights, Sobolev norms, and density representation.

The single-index weight follows the sign pattern obtained by deriving the
duality relation directly from E(gamma(F, G)) = -E(F LG):

    H_i(F, G) = - sum_k [ G gamma^{k,i} L F_k
                          + G gamma(gamma^{k,i}, F_k)
                          + gamma^{k,i} gamma(G, F_k) ]

with gamma^{k,i} the inverse (or localized inverse) of the Malliavin
covariance.  Multi-index weights iterate the single-index formula.

For localized weights the iteration halves the cutoff scale at each level:
the level applying index alpha_m uses eta, the next eta/2, and so on.  The
weight produced at one level vanishes identically wherever det sigma is
below half that level's cutoff, so the next level's cutoff factor is
exactly 1 on its support and the chain of substitutions stays an identity:

    E(d_alpha phi(F) G step(det sigma; eta)) = E(phi(F) H_{eta,alpha}(F, G))

holds for every smooth bounded test function, degenerate F included.
Reusing one cutoff scale at every level would instead leave an error term
supported on the transition strip {eta/2 <= det sigma <= eta}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import jets
from .dirichlet import (
    GaussianSpace,
    gamma_jets,
    jet_adjugate,
    jet_det,
    localized_inverse,
    ou_jets,
    smooth_step,
)
from .jets import CapabilityError, Functional, Jet, SingularityError


@dataclass(frozen=True)
class WeightRequest:
    """One integration-by-parts weight H_alpha(F, G) at a (batched) point.

    ``alpha`` lists 1-based component indices of F, applied right to left.
    ``G`` defaults to the constant 1.  ``eta`` switches on localization.
    """

    F: Functional
    alpha: tuple
    point: object
    G: Functional | None = None
    eta: float | None = None


def _sigma_struct(fj, order_cap=None):
    d = len(fj)
    entries = [[None] * d for _ in range(d)]
    for i in range(d):
        for j in range(i, d):
            g = gamma_jets(fj[i], fj[j])
            entries[i][j] = g
            entries[j][i] = g
    det = jet_det(entries, d)
    adj = jet_adjugate(entries, d)
    return entries, det, adj


def weight(req: WeightRequest) -> Jet:
    """Assemble the (possibly localized) IBP weight as a jet.

    The returned jet's order-0 entry is the weight value; leftover orders
    let callers embed it in further jet arithmetic.
    """
    F = req.F
    d = F.output_dim
    alpha = tuple(int(a) for a in req.alpha)
    if not alpha:
        raise ValueError("alpha must contain at least one index")
    if any(not 1 <= a <= d for a in alpha):
        raise ValueError(f"alpha entries must lie in 1..{d}")
    if d > 3:
        raise CapabilityError("weights supported for output_dim <= 3")
    K = 2 * len(alpha)
    if K > F.max_order:
        raise CapabilityError(
            f"|alpha|={len(alpha)} needs jets of order {K}, "
            f"budget is {F.max_order}"
        )
    point = np.asarray(req.point, dtype=float)
    fj = F.jets(point, K)
    coords = jets.lift(point, K)
    if req.G is None:
        g = jets.constant(1.0, F.input_dim, K, point.shape[1:])
    else:
        if req.G.output_dim != 1:
            raise ValueError("G must be scalar")
        (g,) = req.G.jets(point, K)
    _, det, adj = _sigma_struct(fj)
    lf = [ou_jets(f, coords) for f in fj]

    if req.eta is None:
        if np.any(np.asarray(det.value) <= 0.0):
            raise SingularityError(
                "covariance determinant vanishes; localization required"
            )
        inv_det = [1.0 / det] * len(alpha)
    else:
        if req.eta <= 0:
            raise ValueError("eta must be positive")
        inv_det = [localized_inverse(det, req.eta / 2.0 ** t)
                   for t in range(len(alpha))]

    for level, idx in enumerate(reversed(alpha)):
        i = idx - 1
        inv = inv_det[level]
        acc = None
        for k in range(d):
            gam_ki = adj[k][i] * inv
            term = (g * gam_ki * lf[k]
                    + g * gamma_jets(gam_ki, fj[k])
                    + gam_ki * gamma_jets(g, fj[k]))
            acc = term if acc is None else acc + term
        g = -acc
    return g


def weight_localized(req: WeightRequest, eta: float) -> Jet:
    return weight(WeightRequest(req.F, req.alpha, req.point, req.G, eta))


# ---------------------------------------------------------------------------
# Sobolev-type norms


@lru_cache(maxsize=None)
def _norm_weights(m: int, order: int):
    """Per-row (degree, tensor multiplicity) for the dense table."""
    idx = jets.multi_indices(m, order)
    degs = idx.sum(axis=1)
    mult = np.array([
        math.factorial(int(dg)) / math.prod(math.factorial(int(a)) for a in row)
        for row, dg in zip(idx, degs)
    ])
    return degs, mult


def jet_norm_1k(jet: Jet, k: int):
    """|F|_{1,k} = sum_{i<=k} |D^i F|, Euclidean norm of each order table."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > jet.order:
        raise CapabilityError(f"norm order {k} exceeds jet order {jet.order}")
    degs, mult = _norm_weights(jet.m, jet.order)
    sq = mult.reshape((-1,) + (1,) * len(jet.batch_shape)) * jet.values ** 2
    out = 0.0
    for i in range(1, k + 1):
        out = out + np.sqrt(sq[degs == i].sum(axis=0))
    return out


def jet_norm_k(jet: Jet, k: int):
    """|F|_k = |F| + |F|_{1,k}."""
    return np.abs(jet.value) + jet_norm_1k(jet, k)


def sobolev_norm(F: Functional, k: int, point):
    """|F|_{1,k} summed over components."""
    point = np.asarray(point, dtype=float)
    out = 0.0
    for j in F.jets(point, k):
        out = out + jet_norm_1k(j, k)
    return out


@dataclass
class NormReport:
    """Nondegeneracy statistics of one functional at a (batched) point."""

    n: int
    k: int
    sob: object          # |F|_{1,k+n+1}
    sob_gen: object      # |LF|_{k+n}
    det: object          # det sigma_F
    alpha_k: object
    beta_k: object
    K_nk: object
    C_n: object


def nondegeneracy_stats(F: Functional, point, n: int, k: int = 0) -> NormReport:
    """alpha_k, beta_k, K_{n,k} and C_n = K_{n,0} at the given point(s).

    Requires jets of order n + k + 2 (the generator costs two orders).
    """
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    d = F.output_dim
    point = np.asarray(point, dtype=float)
    order = n + k + 2
    fj = F.jets(point, order)
    coords = jets.lift(point, order)
    lfj = [ou_jets(f, coords) for f in fj]

    def gen_norm(order_):
        out = 0.0
        for lf in lfj:
            out = out + (jet_norm_k(lf, order_) if order_ >= 1 else np.abs(lf.value))
        return out

    sob = sum(jet_norm_1k(f, n + k + 1) for f in fj)
    sob_lo = sum(jet_norm_1k(f, k + 1) for f in fj)
    sob_gen = gen_norm(k + n)
    sob_gen_lo = gen_norm(k)
    _, det, _ = _sigma_struct(fj)
    detv = np.asarray(det.value)
    alpha_k = sob_lo ** (2 * (d - 1)) * (sob_lo + sob_gen_lo) / detv
    beta_k = sob_lo ** (2 * d) / detv
    K_nk = (sob + sob_gen) ** n * (1.0 + sob) ** (2 * d * (2 * n + k))
    if k == 0:
        C_n = K_nk
    else:
        sob0 = sum(jet_norm_1k(f, n + 1) for f in fj)
        C_n = (sob0 + gen_norm(n)) ** n * (1.0 + sob0) ** (4 * d * n)
    return NormReport(n, k, sob, sob_gen, detv, alpha_k, beta_k, K_nk, C_n)


# ---------------------------------------------------------------------------
# moments


# jackknife se above this fraction of the estimate marks an unstable moment
HEAVY_TAIL_RATIO = 0.1


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    se: float
    p: float

    @property
    def heavy_tail(self) -> bool:
        return not np.isfinite(self.se) or self.se > HEAVY_TAIL_RATIO * abs(self.value)


def lp_moment(samples, p: float, blocks: int = 50) -> MomentEstimate:
    """(E |X|^p)^(1/p) from samples, with a block-jackknife standard error."""
    samples = np.asarray(samples, dtype=float).ravel()
    n = samples.size
    if n < 100:
        raise ValueError("need at least 100 samples")
    if p < 1:
        raise ValueError("p must be >= 1")
    ap = np.abs(samples) ** p
    total = ap.sum()
    value = (total / n) ** (1.0 / p)
    blocks = min(blocks, n)
    edges = np.linspace(0, n, blocks + 1).astype(int)
    jk = []
    for b in range(blocks):
        lo, hi = edges[b], edges[b + 1]
        rest = (total - ap[lo:hi].sum()) / (n - (hi - lo))
        jk.append(rest ** (1.0 / p))
    jk = np.asarray(jk)
    se = float(np.sqrt((blocks - 1) / blocks * ((jk - jk.mean()) ** 2).sum()))
    return MomentEstimate(float(value), se, p)


# ---------------------------------------------------------------------------
# density representation


@dataclass
class DensityEstimate:
    points: np.ndarray
    values: np.ndarray
    ses: np.ndarray
    alpha: tuple
    n_samples: int
    warnings: tuple = ()


# Monte Carlo weight variance above this cap attaches a precision warning
WEIGHT_VARIANCE_CAP = 1.0e4


def density_ibp(space: GaussianSpace, F: Functional, points, n_samples: int,
                eta: float, alpha: tuple = (), worker: int = 0,
                chunk: int = 64) -> DensityEstimate:
    """Pointwise density (and derivative) estimates via the IBP identity.

    p_F(x) = E( prod_i 1{F_i > x_i} H_{eta,(1..d)}(F, 1) ), and each extra
    index in ``alpha`` differentiates once, flipping one sign.  Plain Monte
    Carlo on raw samples; indicators are never smoothed.
    """
    d = F.output_dim
    alpha = tuple(int(a) for a in alpha)
    full = tuple(range(1, d + 1)) + alpha
    x = space.sample(n_samples, worker)
    if space.dim != F.input_dim:
        raise ValueError("space dimension does not match the functional")
    w = weight(WeightRequest(F, full, x, None, eta)).value
    fv = F.values(x)
    sign = (-1.0) ** len(alpha)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != d:
        raise ValueError(f"points must have {d} columns")
    vals = np.empty(len(pts))
    ses = np.empty(len(pts))
    for lo in range(0, len(pts), chunk):
        hi = min(lo + chunk, len(pts))
        ind = np.all(fv[None, :, :] > pts[lo:hi, :, None], axis=1)
        contrib = sign * ind * w[None, :]
        vals[lo:hi] = contrib.mean(axis=1)
        ses[lo:hi] = contrib.std(axis=1, ddof=1) / np.sqrt(n_samples)
    warn = ()
    wv = float(np.var(w))
    if wv > WEIGHT_VARIANCE_CAP:
        warn = (f"weight variance {wv:.3g} exceeds cap {WEIGHT_VARIANCE_CAP:.3g}",)
    return DensityEstimate(pts, vals, ses, alpha, n_samples, warn)
