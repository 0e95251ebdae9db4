import numpy as np
import pytest

from gaussibp import jets as J
from gaussibp.jets import CapabilityError, Functional, lift
from gaussibp import dirichlet as dr
from gaussibp.dirichlet import (
    GaussianSpace,
    gamma,
    jet_adjugate,
    jet_det,
    localized_inverse,
    malliavin_matrix,
    ou_generator,
    smooth_step,
)


def test_quadrature_moments():
    sp = GaussianSpace(1, 60)
    x, w = sp.nodes_weights()
    assert sp.expect(np.ones_like(w)).value == pytest.approx(1.0, abs=1e-14)
    assert sp.expect(x[0] ** 2).value == pytest.approx(1.0, abs=1e-12)
    assert sp.expect(x[0] ** 4).value == pytest.approx(3.0, abs=1e-11)
    assert sp.expect(x[0] ** 3).value == pytest.approx(0.0, abs=1e-12)


def test_quadrature_2d_cross_moment():
    sp = GaussianSpace(2, 40)
    x, _ = sp.nodes_weights()
    assert sp.expect(x[0] ** 2 * x[1] ** 2).value == pytest.approx(1.0, abs=1e-11)


def test_no_quadrature_beyond_dim_cap():
    with pytest.raises(CapabilityError):
        GaussianSpace(5).nodes_weights()


def test_sampling_reproducible_and_worker_independent():
    sp = GaussianSpace(3, seed=11)
    a = sp.sample(100)
    b = GaussianSpace(3, seed=11).sample(100)
    np.testing.assert_array_equal(a, b)
    c = sp.sample(100, worker=1)
    assert not np.allclose(a, c)


def test_expectation_exact_flag():
    sp = GaussianSpace(1, 20)
    x, w = sp.nodes_weights()
    assert sp.expect(x[0] ** 2).exact
    assert not sp.expect_mc(np.array([1.0, 2.0, 3.0])).exact


def test_carre_du_champ_product_value():
    # Gamma(F,G) = sum_i dF/dx_i dG/dx_i
    F = Functional(2, 1, lambda c: c[0] * c[0] + c[1])
    G = Functional(2, 1, lambda c: c[0] * c[1])
    pt = np.array([[1.5], [-0.5]])
    # dF = (2x1, 1), dG = (x2, x1): Gamma = 2*1.5*(-0.5) + 1.5 = 0
    assert gamma(F, G, pt).value[0] == pytest.approx(2 * 1.5 * -0.5 + 1.5)


def test_generator_on_hermite_polynomials():
    # L He_k = -k He_k for the OU generator
    pts = np.linspace(-2, 2, 9)[None, :]
    he2 = Functional(1, 1, lambda c: c[0] * c[0] - 1.0)
    he3 = Functional(1, 1, lambda c: c[0] * c[0] * c[0] - 3.0 * c[0])
    np.testing.assert_allclose(
        ou_generator(he2, pts).value, -2 * (pts[0] ** 2 - 1), atol=1e-12
    )
    np.testing.assert_allclose(
        ou_generator(he3, pts).value, -3 * (pts[0] ** 3 - 3 * pts[0]), atol=1e-12
    )


def test_duality_quadrature():
    # E(Gamma(F,G)) = -E(F LG) for the Gaussian measure
    sp = GaussianSpace(2, 48)
    nodes, _ = sp.nodes_weights()
    F = Functional(2, 1, lambda c: J.sin(c[0]) + c[1] * c[1])
    G = Functional(2, 1, lambda c: J.exp(c[1] / 2.0) * c[0])
    lhs = sp.expect(gamma(F, G, nodes).value).value
    rhs = -sp.expect(F.values(nodes)[0] * ou_generator(G, nodes).value).value
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_chain_rule_for_gamma():
    # Gamma(phi(F), G) = phi'(F) Gamma(F, G)
    F = Functional(2, 1, lambda c: c[0] + c[1] * c[1])
    G = Functional(2, 1, lambda c: c[0] * c[1])
    phiF = Functional(2, 1, lambda c: J.sin(c[0] + c[1] * c[1]))
    pts = np.random.default_rng(0).normal(size=(2, 50))
    lhs = gamma(phiF, G, pts).value
    rhs = np.cos(F.values(pts)[0]) * gamma(F, G, pts).value
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_malliavin_matrix_known_entries():
    # F = (x1, x1 + x2): sigma = [[1, 1], [1, 2]], det = 1
    F = Functional(2, 2, lambda c: (c[0], c[0] + c[1]))
    pt = np.array([[0.3], [0.7]])
    cov = malliavin_matrix(F, pt)
    np.testing.assert_allclose(cov.value()[:, :, 0], [[1, 1], [1, 2]])
    assert cov.det.value[0] == pytest.approx(1.0)


def test_jet_det_adjugate_match_numpy():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(3, 20))
    x = lift(pts, 2)
    entries = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            e = x[i] * x[j] + (2.0 if i == j else 0.0)
            entries[i][j] = e
            entries[j][i] = e
    det = jet_det(entries, 3)
    adj = jet_adjugate(entries, 3)
    M = np.einsum("ik,jk->kij", pts, pts) + 2 * np.eye(3)
    np.testing.assert_allclose(det.value, np.linalg.det(M), rtol=1e-12)
    inv = np.linalg.inv(M)
    for i in range(3):
        for j in range(3):
            np.testing.assert_allclose(
                adj[i][j].value, inv[:, i, j] * np.linalg.det(M), rtol=1e-10
            )


def test_smooth_step_regions():
    eta = 0.5
    x = np.array([0.0, 0.2, 0.25, 0.375, 0.5, 1.0])
    lo = smooth_step("lower", eta, x)
    assert lo[0] == 0.0 and lo[1] == 0.0 and lo[2] == 0.0
    assert 0.0 < lo[3] < 1.0
    assert lo[4] == 1.0 and lo[5] == 1.0
    up = smooth_step("upper", eta, np.array([0.0, 0.5, 0.75, 1.0, 1.5]))
    np.testing.assert_allclose(up[[0, 1]], 1.0)
    assert up[4] == 0.0
    assert 0.0 < up[2] < 1.0


def test_smooth_step_monotone():
    xs = np.linspace(0.0, 1.2, 500)
    lo = smooth_step("lower", 0.5, xs)
    assert np.all(np.diff(lo) >= -1e-15)


def test_localized_inverse_plateau_is_exact_inverse():
    eta = 0.4
    x = np.array([0.5, 1.0, 3.0])
    np.testing.assert_allclose(localized_inverse(x, eta), 1.0 / x, rtol=1e-14)


def test_localized_inverse_vanishes_below_half_eta():
    np.testing.assert_array_equal(
        localized_inverse(np.array([0.0, 0.05, 0.19]), 0.4), 0.0
    )


def test_localized_inverse_jet_derivatives():
    # compare jet derivatives to central differences in the transition zone
    eta = 0.5

    def f(v):
        return localized_inverse(np.asarray(v, dtype=float), eta)

    x0 = 0.35
    x = lift(np.array([[x0]]), 2)[0]
    jet = localized_inverse(x, eta)
    h = 1e-6
    fd1 = (f(x0 + h) - f(x0 - h)) / (2 * h)
    fd2 = (f(x0 + h) - 2 * f(x0) + f(x0 - h)) / h**2
    assert jet.partial((1,))[0] == pytest.approx(fd1, rel=1e-7)
    assert jet.partial((2,))[0] == pytest.approx(fd2, rel=1e-4)


def test_localized_inverse_exact_region_derivatives():
    # above eta the derivatives are those of 1/x
    x = lift(np.array([[2.0]]), 3)[0]
    jet = localized_inverse(x, 0.5)
    np.testing.assert_allclose(jet.values[:, 0], [0.5, -0.25, 0.25, -0.375], rtol=1e-13)
