"""Shared fixtures for the quadrature-backed identity checks.

Gauss-Hermite rules handle smooth integrands, but weights with an active
cutoff transition have features the rule cannot resolve at any practical
order (the step has flat pieces, so its Hermite coefficients decay too
slowly).  For those we integrate against the normal density on a dense
trapezoid grid instead: every derivative of the integrand vanishes at the
truncated tails, so the trapezoid rule converges spectrally.
"""

import numpy as np
from scipy.special import roots_hermitenorm

from gaussibp import dirichlet as dr
from gaussibp import ibp
from gaussibp.ibp import WeightRequest


def gh_grid(m, order):
    return dr.GaussianSpace(m, order).nodes_weights()


def trapz_grid(m, n, lim=8.0):
    """Tensor trapezoid grid weighted by the standard normal density."""
    xs = np.linspace(-lim, lim, n)
    wd = np.gradient(xs) * np.exp(-xs * xs / 2) / np.sqrt(2 * np.pi)
    mesh = np.meshgrid(*([xs] * m), indexing="ij")
    W = np.ones(mesh[0].shape)
    for i in range(m):
        shape = [1] * m
        shape[i] = -1
        W = W * wd.reshape(shape)
    return np.stack([g.ravel() for g in mesh]), W.ravel()


def mixed_grid(m, dense_axis, n_dense, gh_order, lim=8.0):
    """Dense trapezoid on one axis, Gauss-Hermite on the rest.

    For functionals whose Malliavin determinant depends on a single
    coordinate and whose remaining dependence is polynomial, this is
    machine-exact at small GH orders.
    """
    xs = np.linspace(-lim, lim, n_dense)
    wd = np.gradient(xs) * np.exp(-xs * xs / 2) / np.sqrt(2 * np.pi)
    zn, zw = roots_hermitenorm(gh_order)
    zw = zw / zw.sum()
    axes = [xs if i == dense_axis else zn for i in range(m)]
    wts = [wd if i == dense_axis else zw for i in range(m)]
    mesh = np.meshgrid(*axes, indexing="ij")
    W = np.ones(mesh[0].shape)
    for i in range(m):
        shape = [1] * m
        shape[i] = -1
        W = W * wts[i].reshape(shape)
    return np.stack([g.ravel() for g in mesh]), W.ravel()


def identity_residual(F, alpha, eta, phi, dphi, grid, G=None, chunk=150000):
    """|E(d_alpha phi(F) G Psi_eta(det sigma)) - E(phi(F) H_alpha(F,G))|.

    Returns (residual, lhs) so callers can check the identity is not
    trivially 0 = 0.  Evaluation is chunked; the sandbox is small.
    """
    pts, W = grid
    lhs = 0.0
    rhs = 0.0
    for s in range(0, pts.shape[1], chunk):
        p = pts[:, s : s + chunk]
        w = W[s : s + chunk]
        fv = F.values(p)
        gv = G.values(p)[0] if G is not None else 1.0
        if eta is None:
            psi = 1.0
        else:
            det = dr.malliavin_matrix(F, p, 2).det.value
            psi = dr.smooth_step("lower", eta, det)
        lhs += np.sum(dphi(fv) * gv * psi * w)
        H = ibp.weight(WeightRequest(F, alpha, p, G, eta)).value
        rhs += np.sum(phi(fv) * H * w)
    return abs(lhs - rhs), lhs
