"""Distances between laws and the bound expressions they are tested against.

Estimators, by construction, carry a direction of bias and say so in their
method tag: the total-variation estimate is a density plug-in (two
bandwidths, spread folded into the error bar), the dictionary distance and
the sliced Wasserstein are lower bounds.  Rate experiments only consume
slopes, which survive a consistent bias.

`bound_rhs` evaluates the right-hand sides of the inequalities under test as
pure arithmetic in the measured norms; the universal constant in front is
always left to the caller to fit once per family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d, gaussian_filter

from . import jets

__all__ = [
    "EmpiricalLaw",
    "CoverageError",
    "DistanceEstimate",
    "BoundProfile",
    "RateFit",
    "save_law",
    "load_law",
    "estimate_tv",
    "estimate_w1",
    "estimate_cf",
    "estimate_dk",
    "bound_rhs",
    "smallball_exponent",
    "smoothing_order",
    "fit_rate",
    "BOUND_KINDS",
]


class CoverageError(ValueError):
    """The density grid lost more than the allowed probability mass."""


@dataclass(frozen=True)
class EmpiricalLaw:
    """Samples of one law, with the seed that reproduces them.

    ``density`` optionally carries a (grid, values) or (grid, values, ses)
    precomputed density table; the total-variation estimator can integrate
    such tables directly instead of smoothing the samples.
    """

    samples: np.ndarray
    seed: int = -1
    density: tuple | None = None

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if s.shape[0] == 1 and s.shape[1] > 1 and np.ndim(self.samples) == 1:
            s = s.T
        if s.shape[0] < 2:
            raise ValueError("need at least 2 samples")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def n(self) -> int:
        return self.samples.shape[0]


def save_law(law: EmpiricalLaw, path) -> None:
    with open(path, "w") as fh:
        fh.write("dim,n,seed\n")
        fh.write(f"{law.dim},{law.n},{law.seed}\n")
        np.savetxt(fh, law.samples, delimiter=",", fmt="%.17g")


def load_law(path) -> EmpiricalLaw:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "dim,n,seed":
            raise ValueError(f"unexpected header {header!r}")
        dim, n, seed = (int(v) for v in fh.readline().split(","))
        samples = np.loadtxt(fh, delimiter=",").reshape(n, dim)
    return EmpiricalLaw(samples, seed)


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    error: float
    method: str
    warnings: tuple = ()


# ---------------------------------------------------------------------------
# total variation


def _binned_density(samples, edges, bandwidths):
    """Histogram + Gaussian smoothing = binned KDE, one array per bandwidth."""
    dim = samples.shape[1]
    if dim == 1:
        counts, _ = np.histogram(samples[:, 0], bins=edges[0])
    else:
        counts, _, _ = np.histogram2d(samples[:, 0], samples[:, 1],
                                      bins=[edges[0], edges[1]])
    widths = [e[1] - e[0] for e in edges]
    dens = counts / (len(samples) * math.prod(widths))
    out = []
    for h in bandwidths:
        sig = [h / w for w in widths]
        if dim == 1:
            out.append(gaussian_filter1d(dens, sig[0], mode="constant"))
        else:
            out.append(gaussian_filter(dens, sig, mode="constant"))
    return out


def _tv_grids(lawF, lawG, grid_size, span):
    data = np.vstack([lawF.samples, lawG.samples])
    edges = []
    for j in range(lawF.dim):
        if span is not None:
            lo, hi = span[j]
        else:
            col = data[:, j]
            h = 1.06 * col.std() * len(col) ** -0.2
            lo, hi = col.min() - 6 * h, col.max() + 6 * h
        edges.append(np.linspace(lo, hi, grid_size + 1))
    return edges


def estimate_tv(lawF: EmpiricalLaw, lawG: EmpiricalLaw,
                method: str = "density-grid", grid_size: int | None = None,
                blocks: int = 20, span=None,
                bandwidth: float | None = None) -> DistanceEstimate:
    """L1 distance of density estimates: d_TV under the integral convention.

    ``density-grid`` smooths both sample sets on a shared grid with a shared
    bandwidth (and twice it; the spread goes into the error bar, jackknife
    blocks give the statistical part).  ``ibp-density`` integrates density
    tables the laws already carry.  ``span`` fixes the grid window per axis
    (useful to keep one grid across a refinement family); samples escaping
    the window surface as a coverage error.
    """
    if method == "ibp-density":
        if lawF.density is None or lawG.density is None:
            raise ValueError("ibp-density needs laws carrying density tables")
        gF, vF = lawF.density[0], lawF.density[1]
        gG, vG = lawG.density[0], lawG.density[1]
        if not np.array_equal(gF, gG):
            raise ValueError("density tables must share one grid")
        val = float(np.trapezoid(np.abs(np.asarray(vF) - np.asarray(vG)), gF))
        err = 0.0
        if len(lawF.density) > 2 and len(lawG.density) > 2:
            err = float(np.trapezoid(np.hypot(lawF.density[2], lawG.density[2]), gF))
        return DistanceEstimate(val, err, "ibp-density")
    if method != "density-grid":
        raise ValueError(f"unknown method {method!r}")
    if lawF.dim != lawG.dim:
        raise ValueError("laws must share a dimension")
    if lawF.dim > 2:
        raise jets.CapabilityError("density-grid total variation covers d <= 2")

    if grid_size is None:
        grid_size = 4096 if lawF.dim == 1 else 384
    edges = _tv_grids(lawF, lawG, grid_size, span)
    widths = [e[1] - e[0] for e in edges]
    cell = math.prod(widths)
    pooled = np.vstack([lawF.samples, lawG.samples])
    nmin = min(lawF.n, lawG.n)
    # point estimate at half the Silverman width: the rule-of-thumb h is
    # tuned for L2 of one density, too smooth for an L1 difference.  An
    # explicit bandwidth overrides the rule (coupled sample pairs tolerate
    # a wider kernel, which damps the mass-transport noise floor)
    h = bandwidth if bandwidth is not None \
        else 0.53 * float(np.mean(pooled.std(axis=0))) * nmin ** -0.2
    bws = (h, 2 * h)

    pF = _binned_density(lawF.samples, edges, bws)
    pG = _binned_density(lawG.samples, edges, bws)
    for p, tag in ((pF[0], "F"), (pG[0], "G")):
        mass = float(p.sum() * cell)
        if abs(mass - 1.0) > 0.01:
            raise CoverageError(f"law {tag} keeps only {mass:.4f} mass on the grid")

    tv = float(np.sum(np.abs(pF[0] - pG[0])) * cell)
    tv_coarse = float(np.sum(np.abs(pF[1] - pG[1])) * cell)

    # block jackknife at the estimation bandwidth
    rng_blocks = []
    for law in (lawF, lawG):
        cuts = np.linspace(0, law.n, blocks + 1).astype(int)
        rng_blocks.append([law.samples[cuts[b]:cuts[b + 1]] for b in range(blocks)])
    jk = np.empty(blocks)
    for b in range(blocks):
        sF = np.vstack([blk for i, blk in enumerate(rng_blocks[0]) if i != b])
        sG = np.vstack([blk for i, blk in enumerate(rng_blocks[1]) if i != b])
        qF = _binned_density(sF, edges, (h,))[0]
        qG = _binned_density(sG, edges, (h,))[0]
        jk[b] = np.sum(np.abs(qF - qG)) * cell
    se = math.sqrt((blocks - 1) / blocks * float(np.sum((jk - jk.mean()) ** 2)))

    err = math.hypot(se, abs(tv - tv_coarse))
    return DistanceEstimate(tv, err, "density-grid plug-in")


def estimate_tv_vs_density(law: EmpiricalLaw, density, grid_size: int | None = None,
                           blocks: int = 20, span=None) -> DistanceEstimate:
    """TV between a sample law and an exact reference density, d = 1 only.

    The reference is smoothed on the grid with the same kernel as the KDE,
    so the common smoothing bias cancels and the difference isolates the
    law gap.  ``density`` is a callable evaluated on the grid centers.
    """
    if law.dim != 1:
        raise jets.CapabilityError("reference-density total variation covers d = 1")
    if grid_size is None:
        grid_size = 4096
    if span is not None:
        lo, hi = span[0]
    else:
        col = law.samples[:, 0]
        pad = 1.06 * col.std() * law.n ** -0.2
        lo, hi = col.min() - 6 * pad, col.max() + 6 * pad
    edges = [np.linspace(lo, hi, grid_size + 1)]
    width = edges[0][1] - edges[0][0]
    centers = (edges[0][:-1] + edges[0][1:]) / 2.0
    q = np.asarray(density(centers), dtype=float)

    h = 0.53 * float(law.samples.std()) * law.n ** -0.2
    bws = (h, 2 * h)
    p = _binned_density(law.samples, edges, bws)
    if abs(float(p[0].sum() * width) - 1.0) > 0.01:
        raise CoverageError("law keeps less than 99% mass on the grid")
    if abs(float(q.sum() * width) - 1.0) > 0.01:
        raise CoverageError("reference density keeps less than 99% mass on the grid")
    qs = [gaussian_filter1d(q, b / width, mode="constant") for b in bws]

    tv = float(np.sum(np.abs(p[0] - qs[0])) * width)
    tv_coarse = float(np.sum(np.abs(p[1] - qs[1])) * width)

    cuts = np.linspace(0, law.n, blocks + 1).astype(int)
    blks = [law.samples[cuts[b]:cuts[b + 1]] for b in range(blocks)]
    jk = np.empty(blocks)
    for b in range(blocks):
        s = np.vstack([blk for i, blk in enumerate(blks) if i != b])
        jk[b] = np.sum(np.abs(_binned_density(s, edges, (h,))[0] - qs[0])) * width
    se = math.sqrt((blocks - 1) / blocks * float(np.sum((jk - jk.mean()) ** 2)))
    err = math.hypot(se, abs(tv - tv_coarse))
    return DistanceEstimate(tv, err, "density-grid vs reference")


# ---------------------------------------------------------------------------
# Wasserstein


def _quantiles(sorted_samples, u):
    n = len(sorted_samples)
    return np.interp(u, (np.arange(n) + 0.5) / n, sorted_samples)


def estimate_w1(lawF: EmpiricalLaw, lawG: EmpiricalLaw,
                directions: int = 64, seed: int = 0) -> DistanceEstimate:
    """W1: exact sorted-sample coupling in d = 1, sliced lower bound above."""
    if lawF.dim != lawG.dim:
        raise ValueError("laws must share a dimension")
    if lawF.dim == 1:
        a = np.sort(lawF.samples[:, 0])
        b = np.sort(lawG.samples[:, 0])
        if lawF.n == lawG.n:
            return DistanceEstimate(float(np.mean(np.abs(a - b))), 0.0,
                                    "exact empirical")
        u = (np.arange(max(lawF.n, lawG.n)) + 0.5) / max(lawF.n, lawG.n)
        val = float(np.mean(np.abs(_quantiles(a, u) - _quantiles(b, u))))
        return DistanceEstimate(val, 0.0, "quantile-interpolated")

    rng = np.random.default_rng(seed)
    vals = np.empty(directions)
    for i in range(directions):
        v = rng.standard_normal(lawF.dim)
        v /= np.linalg.norm(v)
        a = np.sort(lawF.samples @ v)
        b = np.sort(lawG.samples @ v)
        if lawF.n == lawG.n:
            vals[i] = np.mean(np.abs(a - b))
        else:
            u = (np.arange(max(lawF.n, lawG.n)) + 0.5) / max(lawF.n, lawG.n)
            vals[i] = np.mean(np.abs(_quantiles(a, u) - _quantiles(b, u)))
    return DistanceEstimate(float(vals.mean()),
                            float(vals.std(ddof=1) / math.sqrt(directions)),
                            "sliced (lower bound)")


# ---------------------------------------------------------------------------
# characteristic functions


def _empirical_cf(samples, thetas, chunk=200):
    out = np.empty(len(thetas), dtype=complex)
    for lo in range(0, len(thetas), chunk):
        phase = samples @ thetas[lo:lo + chunk].T
        out[lo:lo + chunk] = np.exp(1j * phase).mean(axis=0)
    return out


def _cf_grid(dim, radius, per_axis):
    axes = [np.linspace(-radius, radius, per_axis)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    keep = np.linalg.norm(pts, axis=1) <= radius + 1e-12
    return pts[keep]


def estimate_cf(lawF: EmpiricalLaw, lawG: EmpiricalLaw, radius: float,
                grid_points: int = 129) -> DistanceEstimate:
    """Max empirical characteristic-function gap over a ball grid.

    The grid is refined once (doubled density); a change above 5% attaches a
    resolution warning instead of silently trusting the coarse sup.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if lawF.dim != lawG.dim:
        raise ValueError("laws must share a dimension")
    per = grid_points if lawF.dim == 1 else max(17, grid_points // 4)
    vals = []
    for n_axis in (per, 2 * per - 1):
        thetas = _cf_grid(lawF.dim, radius, n_axis)
        gap = np.abs(_empirical_cf(lawF.samples, thetas)
                     - _empirical_cf(lawG.samples, thetas))
        vals.append(float(gap.max()))
    coarse, fine = vals
    warnings = ()
    if fine > 0 and abs(fine - coarse) > 0.05 * fine:
        warnings = (f"grid refinement moved the sup by "
                    f"{abs(fine - coarse) / fine:.1%}",)
    noise = 2.0 / math.sqrt(min(lawF.n, lawG.n))
    return DistanceEstimate(fine, noise, "grid sup", warnings)


# ---------------------------------------------------------------------------
# smooth-dictionary distance


def _homogeneous_sum(theta, k):
    # sum over |alpha| = k of prod |theta_i|^alpha_i  (no multinomial factors)
    d = len(theta)
    table = jets.multi_indices(d, k)
    degs = table.sum(axis=1)
    tot = 0.0
    for alpha in table[degs == k]:
        tot += float(np.prod(np.abs(theta) ** alpha))
    return tot


def _bump_scale(center, width, k, dim):
    # sum over |alpha| = k of sup |d^alpha exp(-|x-c|^2 / 2 w^2)| on a box grid
    axes = [np.linspace(c - 5 * width, c + 5 * width, 41) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    coords = jets.lift(pts.T, k)
    sq = None
    for i in range(dim):
        t = (coords[i] - float(center[i])) * (1.0 / width)
        sq = t * t if sq is None else sq + t * t
    bump = jets.exp(sq * -0.5)
    table = jets.multi_indices(dim, k)
    degs = table.sum(axis=1)
    tot = 0.0
    for alpha in table[degs == k]:
        idx = jets.index_of(dim, k, tuple(alpha))
        tot += float(np.max(np.abs(bump.values[idx])))
    return tot


def estimate_dk(lawF: EmpiricalLaw, lawG: EmpiricalLaw, k: int,
                dictionary: int = 256, seed: int = 0) -> DistanceEstimate:
    """Lower bound for the order-k smooth-test-function distance.

    Random-frequency sinusoids and Gaussian bumps, each rescaled so the sum
    of the sups of its order-k derivatives is one, evaluated on both sample
    sets; the reported value is the largest expectation gap seen.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if lawF.dim != lawG.dim:
        raise ValueError("laws must share a dimension")
    d = lawF.dim
    rng = np.random.default_rng(seed)
    best, best_se = 0.0, 0.0
    scale = float(np.vstack([lawF.samples, lawG.samples]).std())

    for j in range(dictionary):
        if j % 2 == 0:
            theta = rng.standard_normal(d) / max(scale, 1e-12)
            phase = rng.uniform(0, 2 * np.pi)
            norm = _homogeneous_sum(theta, k)
            if norm < 1e-12:
                continue
            fF = np.sin(lawF.samples @ theta + phase) / norm
            fG = np.sin(lawG.samples @ theta + phase) / norm
        else:
            center = rng.normal(0.0, 2.0 * scale, size=d)
            width = rng.uniform(0.3, 1.5) * scale
            norm = _bump_scale(center, width, k, d)
            fF = np.exp(-np.sum((lawF.samples - center) ** 2, axis=1)
                        / (2 * width ** 2)) / norm
            fG = np.exp(-np.sum((lawG.samples - center) ** 2, axis=1)
                        / (2 * width ** 2)) / norm
        gap = abs(float(fF.mean()) - float(fG.mean()))
        if gap > best:
            best = gap
            best_se = math.hypot(float(fF.std(ddof=1)) / math.sqrt(lawF.n),
                                 float(fG.std(ddof=1)) / math.sqrt(lawG.n))
    return DistanceEstimate(best, best_se, "dictionary (lower bound)")


# ---------------------------------------------------------------------------
# right-hand sides


BOUND_KINDS = (
    "localized",            # P-term + delta^q eta^{-2q} C_{q,1}
    "localized-deriv",      # derivative version, extra order m
    "smallball",            # power-law small-ball condition, exponent kq/(k+2q)
    "moment",               # strong nondegeneracy, delta^q Q_{q+m}
    "tv-from-dk",           # (Q_q(F)+Q_q(G))^{k/(q+k)} dk^{q/(q+k)}
    "tv-from-dk-smallball", # small-ball variant with its own exponent a
    "tv-one-sided",         # no nondegeneracy on G; (d_p + d_{p'})^{1-eps}
    "chaos-fourth-moment",  # |log x| sqrt(x)
)


@dataclass(frozen=True)
class BoundProfile:
    """A named right-hand side plus its parameters and measured norms."""

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")
        p = self.params
        for key, lo in (("q", 1.0), ("k", 1.0), ("p", 1.0), ("p_prime", 1.0)):
            if key in p and p[key] < lo:
                raise ValueError(f"{key} must be >= {lo}")
        if "eta" in p and p["eta"] <= 0:
            raise ValueError("eta must be positive")
        if "delta" in p and not 0 < p["delta"] <= 1:
            raise ValueError("delta must be in (0, 1]")
        if "eps" in p and not 0 < p["eps"] < 1:
            raise ValueError("eps must be in (0, 1)")
        if "kappa" in p and p["kappa"] <= 0:
            raise ValueError("kappa must be positive")


def smallball_exponent(kappa: float, q: float) -> float:
    """Mollification-gap exponent under the power-law small-ball condition."""
    return kappa * q / (kappa + 2.0 * q)


def smoothing_order(p: int, p_prime: int, eps: float) -> int:
    """Sobolev order the one-sided bound needs at accuracy loss eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    return max(math.floor(4 * p / eps) + 1, math.floor(p_prime / (2 * eps)) + 1)


def bound_rhs(profile: BoundProfile) -> float:
    """The named right-hand side, without its universal constant."""
    p = profile.params
    kind = profile.kind
    if kind == "localized":
        return p["prob"] + p["delta"] ** p["q"] * p["eta"] ** (-2 * p["q"]) * p["c_q1"]
    if kind == "localized-deriv":
        dsup = p.get("deriv_sup", 1.0)
        return (dsup * p["prob"]
                + p["delta"] ** p["q"] * p["eta"] ** (-2 * (p["q"] + p["m"]))
                * p["c_qm1"])
    if kind == "smallball":
        kappa, q = p["kappa"], p["q"]
        return (p["c_q1"] ** (kappa / (kappa + 2 * q))
                * p["theta"] ** (2 * q / (kappa + 2 * q))
                * p["delta"] ** smallball_exponent(kappa, q))
    if kind == "moment":
        return p["delta"] ** p["q"] * p["q_norm"]
    if kind == "tv-from-dk":
        q, k = p["q"], p["k"]
        return (p["q_f"] + p["q_g"]) ** (k / (q + k)) * p["dk"] ** (q / (q + k))
    if kind == "tv-from-dk-smallball":
        kappa, q, k = p["kappa"], p["q"], p["k"]
        a = smallball_exponent(kappa, q)
        cf = p["theta_f"] ** (2 * q / (kappa + 2 * q)) \
            * p["c_q2_f"] ** (kappa / (kappa + 2 * q))
        cg = p["theta_g"] ** (2 * q / (kappa + 2 * q)) \
            * p["c_q2_g"] ** (kappa / (kappa + 2 * q))
        return (cf + cg) ** (k / (k + a)) * p["dk"] ** (a / (k + a))
    if kind == "tv-one-sided":
        eps = p["eps"]
        const = 1.0 + p["q_f"] + p["c_g"]
        return const * (p["dp"] + p["dp_det"]) ** (1.0 - eps)
    if kind == "chaos-fourth-moment":
        x = p["x"]
        if x <= 0:
            raise ValueError("chaos bound needs a positive argument")
        return abs(math.log(x)) * math.sqrt(x)
    raise AssertionError(kind)


# ---------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_se: float
    ci: tuple  # normal-approximation 95% band
    n: int


def fit_rate(scales, values) -> RateFit:
    """OLS slope of log(value) against log(scale)."""
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    if scales.size != values.size or scales.size < 3:
        raise ValueError("need at least 3 (scale, value) pairs")
    if np.any(scales <= 0) or np.any(values <= 0):
        raise ValueError("scales and values must be positive")
    x, y = np.log(scales), np.log(values)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    slope = float(coef[0])
    return RateFit(slope, float(coef[1]), se,
                   (slope - 1.96 * se, slope + 1.96 * se), len(x))
