"""Second-chaos vectors as explicit quadratic functionals.

A component is F_i(x) = x.A_i x - tr(A_i) with A_i symmetric, so every
jet is exact and the carre du champ has the closed form
Gamma[F_i, F_j](x) = 4 x.A_i A_j x.  Fourth-moment quantities reduce to
traces; the module exposes both the exact formulas and seeded Monte
Carlo estimates of the same objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import distances, ibp, jets
from .dirichlet import GaussianSpace
from .jets import Functional

SYMMETRY_TOL = 1e-10
NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class QuadraticChaos:
    """Component matrices of a q=2 chaos vector, shape (dim, m, m).

    identity_covariance asserts 2 tr(A_i A_j) = delta_ij, the convention
    under which the vector has identity covariance.
    """

    matrices: np.ndarray
    identity_covariance: bool = False

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("matrices must be (dim, m, m)")
        for i, a in enumerate(mats):
            if np.abs(a - a.T).max() > SYMMETRY_TOL:
                raise ValueError(f"component {i} is not symmetric")
        object.__setattr__(self, "matrices", mats)
        if self.identity_covariance:
            gap = np.abs(self.covariance() - np.eye(self.dim)).max()
            if gap > NORMALIZATION_TOL:
                raise ValueError(
                    f"identity covariance violated by {gap:.2e}; "
                    "rescale or drop the flag")

    @property
    def dim(self) -> int:
        return self.matrices.shape[0]

    @property
    def m(self) -> int:
        return self.matrices.shape[1]

    def covariance(self) -> np.ndarray:
        """Cov(F_i, F_j) = 2 tr(A_i A_j)."""
        return 2.0 * np.einsum("ikl,jlk->ij", self.matrices, self.matrices)


def identity_chaos(m: int) -> QuadraticChaos:
    """The reference family A = I_m / sqrt(2m); fourth cumulant 12/m."""
    if m < 1:
        raise ValueError("m must be positive")
    return QuadraticChaos(np.eye(m)[None] / np.sqrt(2.0 * m), identity_covariance=True)


def banded_chaos(m: int, eps: float = 0.3) -> QuadraticChaos:
    """Identity plus a first off-diagonal band, renormalized to Var F = 1."""
    if m < 2:
        raise ValueError("m must be at least 2")
    b = np.eye(m) + eps * (np.eye(m, k=1) + np.eye(m, k=-1))
    a = b / np.sqrt(2.0 * np.trace(b @ b))
    return QuadraticChaos(a[None], identity_covariance=True)


def gram_chaos(m: int, dim: int, seed: int = 0) -> QuadraticChaos:
    """Random components, orthonormal in the inner product 2 tr(AB)."""
    if dim > (m * (m + 1)) // 2:
        raise ValueError("dim exceeds the symmetric-matrix dimension")
    rng = np.random.default_rng(seed)
    comps = []
    for _ in range(dim):
        g = rng.standard_normal((m, m))
        s = (g + g.T) / 2.0
        for prev in comps:
            s = s - 2.0 * np.trace(s @ prev) * prev
        s = s / np.sqrt(2.0 * np.trace(s @ s))
        comps.append(s)
    return QuadraticChaos(np.stack(comps), identity_covariance=True)


def values(spec: QuadraticChaos, x) -> np.ndarray:
    """Component values at points x of shape (m,) + batch."""
    x = np.asarray(x, dtype=float)
    quad = np.einsum("ijk,j...,k...->i...", spec.matrices, x, x)
    traces = np.trace(spec.matrices, axis1=1, axis2=2)
    return quad - traces.reshape((spec.dim,) + (1,) * (x.ndim - 1))


def gamma_values(spec: QuadraticChaos, x) -> np.ndarray:
    """Carre du champ Gamma[F_i, F_j](x) = 4 x.A_i A_j x, (dim, dim) + batch."""
    x = np.asarray(x, dtype=float)
    ax = np.einsum("ijk,k...->ij...", spec.matrices, x)
    return 4.0 * np.einsum("il...,jl...->ij...", ax, ax)


def chaos_functional(spec: QuadraticChaos) -> Functional:
    mats = spec.matrices
    traces = np.trace(mats, axis1=1, axis2=2)
    d, m = spec.dim, spec.m

    def quad(x):
        # A_i x is linear in the coordinates, so assemble it directly on
        # the stacked value tables and pay only m jet multiplications
        vals = np.stack([np.asarray(c.values) for c in x])
        out = []
        for i in range(d):
            yv = np.tensordot(mats[i], vals, axes=(1, 0))
            comp = None
            for j in range(m):
                term = x[j] * jets.Jet(m, x[j].order, yv[j])
                comp = term if comp is None else comp + term
            out.append(comp - traces[i])
        return out

    return Functional(m, d, quad, name=f"chaos-{d}x{m}")


def fourth_gap_exact(spec: QuadraticChaos) -> float:
    """E|F|^4 - E|N|^4 by the trace formula; scalar chaoses only."""
    if spec.dim != 1:
        raise ValueError("trace formula implemented for dim 1 only")
    if not spec.identity_covariance:
        raise ValueError("needs the identity-covariance normalization")
    a = spec.matrices[0]
    return 48.0 * float(np.trace(np.linalg.matrix_power(a, 4)))


def gamma_gap_exact(spec: QuadraticChaos) -> float:
    """Sum_ij E((delta_ij - Gamma_ij/2)^2), exactly.

    delta_ij - Gamma_ij/2 is a centered quadratic form x.Mx - E with
    M = 2 A_i A_j, and Var(x.Mx) = tr(M M) + tr(M M*).
    """
    if not spec.identity_covariance:
        raise ValueError("needs the identity-covariance normalization")
    total = 0.0
    for ai in spec.matrices:
        for aj in spec.matrices:
            m2 = 2.0 * ai @ aj
            total += float(np.trace(m2 @ m2) + np.trace(m2 @ m2.T))
    return total


@dataclass(frozen=True)
class FourthMomentReport:
    """Fourth-moment gap, carre-du-champ gap, and the covariance-determinant
    Wasserstein distance to its Gaussian limit det D = 2^dim."""

    dim: int
    m: int
    samples: int
    seed: int
    fourth_gap: float        # E|F|^4 - E|N|^4, exact trace value when dim=1
    fourth_gap_se: float     # 0 when exact
    fourth_gap_mc: float     # always the Monte Carlo estimate
    fourth_gap_mc_se: float
    gamma_gap: float         # exact trace value of the Gamma discrepancy
    gamma_gap_mc: float
    gamma_gap_se: float
    det_gap: float           # d_W(det sigma_F, 2^dim)
    det_gap_se: float

    def bound_satisfied(self, n_se: float = 3.0) -> bool:
        """gamma gap <= fourth gap, within n_se combined errors."""
        slack = n_se * float(np.hypot(self.gamma_gap_se, self.fourth_gap_se))
        return self.gamma_gap_mc <= self.fourth_gap + slack


def fourth_moment_stats(spec: QuadraticChaos, samples: int = 200_000,
                        seed: int = 0, worker: int = 0) -> FourthMomentReport:
    if not spec.identity_covariance:
        raise ValueError("fourth-moment statistics need identity covariance")
    if samples < 100:
        raise ValueError("need at least 100 samples")
    x = GaussianSpace(spec.m, seed=seed).sample(samples, worker)
    f = values(spec, x)
    gam = gamma_values(spec, x)

    # lp_moment reports the norm; undo the 1/4 power, delta-method se
    norm4 = ibp.lp_moment(np.sqrt((f ** 2).sum(axis=0)), 4)
    fourth_mc = norm4.value ** 4 - spec.dim * (spec.dim + 2)
    fourth_mc_se = 4.0 * norm4.value ** 3 * norm4.se
    if spec.dim == 1:
        fourth, fourth_se = fourth_gap_exact(spec), 0.0
    else:
        fourth, fourth_se = fourth_mc, fourth_mc_se

    eye = np.eye(spec.dim).reshape(spec.dim, spec.dim, 1)
    disc = ibp.lp_moment(((eye - gam / 2.0) ** 2).sum(axis=(0, 1)), 1)

    if spec.dim == 1:
        dets = gam[0, 0]
    else:
        dets = np.linalg.det(np.moveaxis(gam, -1, 0))
    ref = np.full(samples, 2.0 ** spec.dim)
    w1 = distances.estimate_w1(distances.EmpiricalLaw(dets, seed=seed),
                               distances.EmpiricalLaw(ref, seed=seed))
    det_se = ibp.lp_moment(np.abs(dets - ref), 1).se

    return FourthMomentReport(
        dim=spec.dim, m=spec.m, samples=samples, seed=seed,
        fourth_gap=fourth, fourth_gap_se=fourth_se,
        fourth_gap_mc=fourth_mc, fourth_gap_mc_se=fourth_mc_se,
        gamma_gap=gamma_gap_exact(spec),
        gamma_gap_mc=disc.value, gamma_gap_se=disc.se,
        det_gap=w1.value, det_gap_se=det_se)


def save_chaos(spec: QuadraticChaos, path) -> None:
    """CSV: header dim,m,identity_covariance then dim*m rows of m entries."""
    with open(path, "w") as fh:
        fh.write("dim,m,identity_covariance\n")
        fh.write(f"{spec.dim},{spec.m},{int(spec.identity_covariance)}\n")
        np.savetxt(fh, spec.matrices.reshape(-1, spec.m), fmt="%.17g", delimiter=",")


def load_chaos(path) -> QuadraticChaos:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "dim,m,identity_covariance":
            raise ValueError(f"unrecognized chaos file header: {header!r}")
        dim, m, flag = (int(v) for v in fh.readline().split(","))
        mats = np.loadtxt(fh, delimiter=",", ndmin=2)
    return QuadraticChaos(mats.reshape(dim, m, m), identity_covariance=bool(flag))
