import numpy as np
import pytest

from gaussibp import chaos, dirichlet


def test_identity_family_exact_gaps():
    for m in (8, 16, 32, 64):
        spec = chaos.identity_chaos(m)
        assert spec.covariance() == pytest.approx(np.eye(1), abs=1e-14)
        assert chaos.fourth_gap_exact(spec) == pytest.approx(12.0 / m, rel=1e-12)
        assert chaos.gamma_gap_exact(spec) == pytest.approx(2.0 / m, rel=1e-12)
    # the Gaussian limit: both gaps vanish as m grows
    assert chaos.fourth_gap_exact(chaos.identity_chaos(4096)) < 3e-3


def test_gamma_dual_path():
    spec = chaos.identity_chaos(8)
    F = chaos.chaos_functional(spec)
    x = np.random.default_rng(0).standard_normal((8, 100))
    g = dirichlet.gamma(F.component(0), F.component(0), x)
    closed = chaos.gamma_values(spec, x)[0, 0]
    assert np.abs(np.asarray(g.value) - closed).max() < 1e-10


def test_values_match_functional():
    spec = chaos.gram_chaos(6, 2, seed=4)
    F = chaos.chaos_functional(spec)
    x = np.random.default_rng(1).standard_normal((6, 40))
    assert np.abs(chaos.values(spec, x) - F.values(x)).max() < 1e-12


def test_quadrature_moments_match_traces():
    rng = np.random.default_rng(3)
    for m in (2, 3, 4):
        g = rng.standard_normal((m, m))
        a = (g + g.T) / 2.0
        spec = chaos.QuadraticChaos(a[None])
        space = dirichlet.GaussianSpace(m)
        nodes, _ = space.nodes_weights()
        f = chaos.values(spec, nodes)[0]
        t2 = 2.0 * np.trace(a @ a)
        t4 = 3.0 * t2 ** 2 + 48.0 * np.trace(np.linalg.matrix_power(a, 4))
        assert space.expect(f).value == pytest.approx(0.0, abs=1e-10)
        assert space.expect(f ** 2).value == pytest.approx(t2, rel=1e-10)
        assert space.expect(f ** 4).value == pytest.approx(t4, rel=1e-10)


def test_banded_family():
    spec = chaos.banded_chaos(16, eps=0.4)
    assert spec.covariance() == pytest.approx(np.eye(1), abs=1e-14)
    assert chaos.fourth_gap_exact(spec) == pytest.approx(1.30367, rel=1e-4)
    assert chaos.gamma_gap_exact(spec) == pytest.approx(0.21728, rel=1e-4)
    # eps=0 degenerates to the identity family
    flat = chaos.banded_chaos(16, eps=0.0)
    assert chaos.fourth_gap_exact(flat) == pytest.approx(12.0 / 16, rel=1e-12)


def test_gram_family_orthonormal():
    spec = chaos.gram_chaos(12, 3, seed=5)
    assert spec.covariance() == pytest.approx(np.eye(3), abs=1e-12)
    with pytest.raises(ValueError, match="exceeds"):
        chaos.gram_chaos(2, 5)


def test_fourth_moment_stats_identity():
    rep = chaos.fourth_moment_stats(chaos.identity_chaos(8), samples=200_000, seed=11)
    assert rep.fourth_gap == pytest.approx(1.5, rel=1e-12) and rep.fourth_gap_se == 0.0
    assert abs(rep.fourth_gap_mc - 1.5) < 3 * rep.fourth_gap_mc_se
    assert rep.gamma_gap == pytest.approx(0.25, rel=1e-12)
    assert abs(rep.gamma_gap_mc - rep.gamma_gap) < 3 * rep.gamma_gap_se
    # det sigma = Gamma is asymptotically N(2, 8/m): folded-normal mean
    theory = np.sqrt(2.0 / np.pi * 8.0 / 8)
    assert rep.det_gap == pytest.approx(theory, rel=0.05)
    assert rep.bound_satisfied()


def test_fourth_moment_stats_multid():
    rep = chaos.fourth_moment_stats(chaos.gram_chaos(12, 2, seed=5),
                                    samples=150_000, seed=3)
    assert rep.fourth_gap > 0 and rep.fourth_gap_se > 0
    assert abs(rep.gamma_gap_mc - rep.gamma_gap) < 3 * rep.gamma_gap_se
    assert rep.bound_satisfied()


def test_fourth_moment_bound_on_random_specs():
    for seed in (1, 2, 9):
        spec = chaos.gram_chaos(10, 3, seed=seed)
        rep = chaos.fourth_moment_stats(spec, samples=120_000, seed=seed + 50)
        assert rep.bound_satisfied(), f"seed {seed}"


def test_csv_roundtrip(tmp_path):
    spec = chaos.banded_chaos(6, eps=0.25)
    path = tmp_path / "spec.csv"
    chaos.save_chaos(spec, path)
    back = chaos.load_chaos(path)
    assert np.array_equal(back.matrices, spec.matrices)
    assert back.identity_covariance
    path.write_text("m,dim\n2,2\n")
    with pytest.raises(ValueError, match="header"):
        chaos.load_chaos(path)


def test_validation():
    with pytest.raises(ValueError, match="not symmetric"):
        chaos.QuadraticChaos(np.arange(9.0).reshape(1, 3, 3))
    with pytest.raises(ValueError, match="identity covariance"):
        chaos.QuadraticChaos(np.eye(3)[None], identity_covariance=True)
    with pytest.raises(ValueError, match="identity covariance"):
        chaos.fourth_moment_stats(chaos.QuadraticChaos(np.eye(3)[None]))
    with pytest.raises(ValueError, match="samples"):
        chaos.fourth_moment_stats(chaos.identity_chaos(4), samples=10)
    with pytest.raises(ValueError, match="dim 1"):
        chaos.fourth_gap_exact(chaos.gram_chaos(8, 2))
    with pytest.raises(ValueError, match="at least 2"):
        chaos.banded_chaos(1)
