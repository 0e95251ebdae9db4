"""End-to-end acceptance checks, one test per shipped guarantee.

Run ``pytest -v tests/test_acceptance.py`` to get a pass/fail line per item;
add ``-s`` to see the measured numbers. Every test enforces the wall-clock
budget it is allowed.

test_criterion_6_hypoelliptic_tv_rate states the guaranteed-rate window for
the Grushin refinements and is expected to fail: the coupled scheme decays
near order 1, faster than the window it is held to. We keep the stated
window rather than widening it after the fact; see the line the test prints.
"""

import json
import math
import time

import numpy as np
import pytest

from gaussibp import cli
from gaussibp import dirichlet as dr
from gaussibp import distances
from gaussibp import jets as J
from gaussibp import superkernel as sk
from gaussibp.dirichlet import GaussianSpace, gamma, ou_generator
from gaussibp.experiments import ExperimentConfig, run
from gaussibp.jets import Functional

from helpers import gh_grid, identity_residual, mixed_grid, trapz_grid


def _rows(report, block, param=None):
    out = [r for r in report.rows if r.block == block]
    if param is not None:
        out = [r for r in out if r.param == param]
    return out


def _fit(report, block):
    (row,) = _rows(report, block, "fit")
    return row


# -- 1: integration-by-parts identities --------------------------------------

# (label, F, alpha, eta, phi, dphi, grid factory, G); every case was measured
# before freezing, and each lhs is checked to be away from zero so a parity
# cancellation cannot turn the identity into 0 = 0.
_IBP_CASES = [
    ("m1-stein",
     lambda: Functional(1, 1, lambda c: [c[0]]), (1,), None,
     lambda f: np.sin(f[0]), lambda f: np.cos(f[0]),
     lambda: gh_grid(1, 60), None),
    ("m1-iterated",
     lambda: Functional(1, 1, lambda c: [c[0]]), (1, 1), None,
     lambda f: np.cos(f[0]), lambda f: -np.cos(f[0]),
     lambda: gh_grid(1, 60), None),
    ("m1-sq-loc-0.25",
     lambda: Functional(1, 1, lambda c: [c[0] * c[0]]), (1,), 0.25,
     lambda f: np.cos(f[0]), lambda f: -np.sin(f[0]),
     lambda: trapz_grid(1, 50001), None),
    ("m1-sq-loc-0.5",
     lambda: Functional(1, 1, lambda c: [c[0] * c[0]]), (1,), 0.5,
     lambda f: np.cos(f[0]), lambda f: -np.sin(f[0]),
     lambda: trapz_grid(1, 50001), None),
    ("m1-sq-loc-1.0",
     lambda: Functional(1, 1, lambda c: [c[0] * c[0]]), (1,), 1.0,
     lambda f: np.cos(f[0]), lambda f: -np.sin(f[0]),
     lambda: trapz_grid(1, 50001), None),
    ("m1-sq-loc-G",
     lambda: Functional(1, 1, lambda c: [c[0] * c[0]]), (1,), 0.5,
     lambda f: np.cos(f[0]), lambda f: -np.sin(f[0]),
     lambda: trapz_grid(1, 50001),
     lambda: Functional(1, 1, lambda c: [J.cos(c[0])])),
    ("m1-cubic-tanh",
     lambda: Functional(1, 1, lambda c: [c[0] + c[0] * c[0] * c[0] / 3.0]),
     (1,), None,
     lambda f: np.tanh(f[0]), lambda f: 1 / np.cosh(f[0]) ** 2,
     lambda: trapz_grid(1, 50001), None),
    ("m1-loc-cos-F",
     lambda: Functional(1, 1, lambda c: [J.cos(c[0])]), (1,), 0.3,
     lambda f: f[0] ** 2 / 2, lambda f: f[0],
     lambda: trapz_grid(1, 50001), None),
    ("m1-loc-triple",
     lambda: Functional(1, 1, lambda c: [c[0] * c[0]]), (1, 1, 1), 0.8,
     lambda f: np.sin(f[0]), lambda f: -np.cos(f[0]),
     lambda: trapz_grid(1, 50001), None),
    ("m1-affine-sq-loc",
     lambda: Functional(1, 1, lambda c: [c[0] * c[0] + c[0]]), (1,), 0.5,
     lambda f: np.sin(f[0]), lambda f: np.cos(f[0]),
     lambda: trapz_grid(1, 50001),
     lambda: Functional(1, 1, lambda c: [c[0]])),
    ("m2-d1-unloc",
     lambda: Functional(2, 1, lambda c: [c[0] + c[1] * c[1]]), (1,), None,
     lambda f: np.sin(f[0]), lambda f: np.cos(f[0]),
     lambda: mixed_grid(2, 1, 20001, 24), None),
    ("m2-d1-G-sin",
     lambda: Functional(2, 1, lambda c: [c[0] + c[1] * c[1]]), (1,), None,
     lambda f: np.sin(f[0]), lambda f: np.cos(f[0]),
     lambda: mixed_grid(2, 1, 20001, 24),
     lambda: Functional(2, 1, lambda c: [J.sin(c[0]) + c[1]])),
    ("m2-d1-sin-diffusion",
     lambda: Functional(2, 1, lambda c: [c[0] + J.sin(c[1])]), (1,), None,
     lambda f: np.cos(f[0] - 0.7), lambda f: -np.sin(f[0] - 0.7),
     lambda: mixed_grid(2, 1, 20001, 24), None),
    ("m2-d2-unit-det",
     lambda: Functional(2, 2, lambda c: (c[0], c[1] + c[0] * c[0])),
     (1, 2), None,
     lambda f: np.sin(f[0]) * f[1] ** 3 / 6,
     lambda f: np.cos(f[0]) * f[1] ** 2 / 2,
     lambda: gh_grid(2, 40), None),
    ("m2-d2-loc",
     lambda: Functional(2, 2, lambda c: (c[0], c[0] + c[1] * c[1])),
     (2,), 0.5,
     lambda f: f[1] ** 3 / 6, lambda f: f[1] ** 2 / 2,
     lambda: mixed_grid(2, 1, 20001, 12), None),
    ("m2-radial-loc",
     lambda: Functional(2, 1, lambda c: [c[0] * c[0] + c[1] * c[1]]),
     (1,), 1.0,
     lambda f: np.cos(f[0]), lambda f: -np.sin(f[0]),
     lambda: trapz_grid(2, 2401), None),
    ("m3-d1-const-sigma",
     lambda: Functional(3, 1, lambda c: [c[0] + c[1] + c[2]]), (1,), None,
     lambda f: np.sin(f[0]), lambda f: np.cos(f[0]),
     lambda: gh_grid(3, 16),
     lambda: Functional(3, 1, lambda c: [c[1] * c[2]])),
    ("m3-d2-pair",
     lambda: Functional(3, 2, lambda c: (c[0] + c[2], c[1] - c[2])),
     (1, 2), None,
     lambda f: np.sin(f[0]) * np.sin(f[1]),
     lambda f: np.cos(f[0]) * np.cos(f[1]),
     lambda: gh_grid(3, 16), None),
    ("m3-d3-diag",
     lambda: Functional(3, 3, lambda c: (c[0], c[1], c[2])), (1, 2, 3), None,
     lambda f: np.sin(f[0]) * f[1] ** 3 * f[2] ** 3 / 36,
     lambda f: np.cos(f[0]) * f[1] ** 2 * f[2] ** 2 / 4,
     lambda: gh_grid(3, 16), None),
    ("m3-rational-weight",
     lambda: Functional(3, 1, lambda c: [c[0] + c[1] * c[2]]), (1,), None,
     lambda f: np.sin(f[0]), lambda f: np.cos(f[0]),
     lambda: trapz_grid(3, 161), None),
]


def test_criterion_1_ibp_identities():
    t0 = time.time()
    assert len(_IBP_CASES) >= 20
    worst = ("", 0.0)
    for label, F, alpha, eta, phi, dphi, grid, G in _IBP_CASES:
        func = F()
        assert func.input_dim <= 3 and len(alpha) <= 3
        res, lhs = identity_residual(func, alpha, eta, phi, dphi, grid(),
                                     G=None if G is None else G())
        assert abs(lhs) > 1e-2, f"{label}: identity is trivially zero"
        assert res <= 1e-6, f"{label}: residual {res:.3e}"
        if res > worst[1]:
            worst = (label, res)
    elapsed = time.time() - t0
    print("criterion 1: %d cases, worst residual %.2e (%s), %.1fs"
          % (len(_IBP_CASES), worst[1], worst[0], elapsed))
    assert elapsed < 60


# -- 2: generator calculus ----------------------------------------------------


def test_criterion_2_generator_calculus():
    t0 = time.time()
    # duality E(Gamma(F,G)) = -E(F LG) = -E(G LF), quadrature-exact
    pairs = [
        (GaussianSpace(1, 60),
         Functional(1, 1, lambda c: J.sin(c[0])),
         Functional(1, 1, lambda c: J.exp(c[0] / 2.0))),
        (GaussianSpace(2, 48),
         Functional(2, 1, lambda c: J.sin(c[0]) + c[1] * c[1]),
         Functional(2, 1, lambda c: J.exp(c[1] / 2.0) * c[0])),
        (GaussianSpace(3, 24),
         Functional(3, 1, lambda c: c[0] * c[1] + c[2]),
         Functional(3, 1, lambda c: J.sin(c[2]) + c[0])),
    ]
    for sp, F, G in pairs:
        nodes, _ = sp.nodes_weights()
        lhs = sp.expect(gamma(F, G, nodes).value).value
        rhs_g = -sp.expect(F.values(nodes)[0] * ou_generator(G, nodes).value).value
        rhs_f = -sp.expect(G.values(nodes)[0] * ou_generator(F, nodes).value).value
        assert lhs == pytest.approx(rhs_g, abs=1e-8)
        assert lhs == pytest.approx(rhs_f, abs=1e-8)

    pts = np.random.default_rng(3).normal(size=(2, 200))
    F = Functional(2, 1, lambda c: c[0] + c[1] * c[1])
    G = Functional(2, 1, lambda c: J.sin(c[0]) + c[1])
    FG = Functional(2, 1, lambda c: (c[0] + c[1] * c[1]) * (J.sin(c[0]) + c[1]))
    phiF = Functional(2, 1, lambda c: J.sin(c[0] + c[1] * c[1]))

    # chain rule: L(phi(F)) = phi'(F) LF + phi''(F) Gamma(F,F)
    f = F.values(pts)[0]
    lhs = ou_generator(phiF, pts).value
    rhs = (np.cos(f) * ou_generator(F, pts).value
           - np.sin(f) * gamma(F, F, pts).value)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
    # and for the carre du champ: Gamma(phi(F), G) = phi'(F) Gamma(F, G)
    np.testing.assert_allclose(gamma(phiF, G, pts).value,
                               np.cos(f) * gamma(F, G, pts).value, atol=1e-10)

    # product rule: L(FG) = F LG + G LF + 2 Gamma(F,G)
    g = G.values(pts)[0]
    lhs = ou_generator(FG, pts).value
    rhs = (f * ou_generator(G, pts).value + g * ou_generator(F, pts).value
           + 2.0 * gamma(F, G, pts).value)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    elapsed = time.time() - t0
    print("criterion 2: duality at m=1,2,3 and chain/product rules, %.1fs"
          % elapsed)
    assert elapsed < 60


# -- 3: super-kernel ----------------------------------------------------------


def test_criterion_3_superkernel():
    t0 = time.time()
    kernel = sk.build()
    mt = sk.moments(kernel)
    assert abs(mt.signed[0] - 1.0) <= 1e-8
    assert np.max(np.abs(mt.signed[1:9])) <= 1e-6

    xs = np.linspace(-1.5, 1.5, 301)
    got = sk.mollify(kernel, lambda t: t ** 2, 0.3, xs)
    assert np.max(np.abs(got - xs ** 2)) <= 1e-6

    sign = lambda t: np.sign(t)
    deltas = np.array([0.2, 0.1, 0.05, 0.025])
    grid = np.union1d(np.linspace(-1.5, 1.5, 1201),
                      np.linspace(-0.1, 0.1, 2001))
    slopes = []
    for beta in (1, 2):
        sups = [np.max(np.abs(sk.mollify(kernel, sign, d, grid, beta=beta)))
                for d in deltas]
        fit = distances.fit_rate(deltas, np.asarray(sups))
        slopes.append(fit.slope)
        assert fit.slope == pytest.approx(-beta, abs=0.1)

    elapsed = time.time() - t0
    print("criterion 3: moments exact to %.1e, blow-up slopes %.3f / %.3f, %.1fs"
          % (np.max(np.abs(mt.signed[1:9])), slopes[0], slopes[1], elapsed))
    assert elapsed < 60


# -- 4-8: experiment drivers at their default scale ---------------------------


def test_criterion_4_smallball_rate():
    t0 = time.time()
    rep = run(ExperimentConfig("E1", seed=42))
    elapsed = time.time() - t0
    assert rep.error is None
    kappa = _fit(rep, "smallball").slope
    moll = _fit(rep, "mollification").slope
    print("criterion 4: kappa %.4f, mollification slope %.4f, %.0fs"
          % (kappa, moll, elapsed))
    assert elapsed < 300
    assert 0.45 <= kappa <= 0.55
    assert 0.25 <= moll <= 0.60
    assert rep.passed


def test_criterion_5_euler_tv_rates():
    t0 = time.time()
    rep = run(ExperimentConfig("E3", seed=42))
    elapsed = time.time() - t0
    assert rep.error is None
    slopes = {m: _fit(rep, m).slope for m in ("linear-ou", "elliptic-2d")}
    print("criterion 5: TV slopes %s, %.0fs"
          % ({k: round(v, 4) for k, v in slopes.items()}, elapsed))
    assert elapsed < 900
    for name, slope in slopes.items():
        assert -1.25 <= slope <= -0.70, f"{name}: slope {slope:.4f}"
    assert rep.passed


def test_criterion_6_hypoelliptic_tv_rate():
    t0 = time.time()
    rep = run(ExperimentConfig("E4", seed=42))
    elapsed = time.time() - t0
    assert rep.error is None
    depth0 = _rows(rep, "hormander", "depth=0")[0].lhs
    depth1 = _rows(rep, "hormander", "depth=1")[0].lhs
    slope = _fit(rep, "tv").slope
    print("criterion 6: lambdas %.2e / %.4f, TV slope %.4f "
          "(window [-0.85, -0.35]), %.0fs" % (depth0, depth1, slope, elapsed))
    assert elapsed < 900
    assert depth0 <= 1e-10 < depth1
    # known red: the coupled refinements decay near order 1, outside the
    # guaranteed window; the window is stated as shipped, not widened to fit
    assert -0.85 <= slope <= -0.35, (
        f"measured slope {slope:.4f} outside the guaranteed window; "
        "decay is faster than guaranteed")


def test_criterion_7_chaos_tv_rate():
    t0 = time.time()
    rep = run(ExperimentConfig("E5", seed=42))
    elapsed = time.time() - t0
    assert rep.error is None
    slope = _fit(rep, "tv").slope
    print("criterion 7: TV-vs-gap slope %.4f, %.0fs" % (slope, elapsed))
    assert elapsed < 600
    assert 0.40 <= slope <= 0.60
    for row in _rows(rep, "bound"):
        assert row.lhs <= row.rhs + 3 * row.lhs_se, row.param
    for block in ("fourth", "gamma"):
        for row in _rows(rep, block):
            assert abs(row.lhs - row.rhs) <= 3 * row.lhs_se, (block, row.param)
    assert rep.passed


def test_criterion_8_density_distance_upgrade():
    t0 = time.time()
    rep = run(ExperimentConfig("E2", seed=42))
    elapsed = time.time() - t0
    assert rep.error is None
    rows = _rows(rep, "prop-p")
    scales = [r for r in rows if r.param != "fit"]
    assert len(scales) == 3
    cs = {r.fit_c for r in scales}
    assert len(cs) == 1  # one constant across every scale
    headroom = max(r.lhs / r.rhs for r in scales)
    print("criterion 8: c %.4f, headroom %.4f (limit 1.5), %.0fs"
          % (cs.pop(), headroom, elapsed))
    assert elapsed < 300
    assert headroom <= 1.5
    assert rep.passed


# -- 9: deterministic reports --------------------------------------------------


def test_criterion_9_deterministic_reports(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"experiment": "E1", "seed": 42,
                               "samples": 150_000}))
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        rc = cli.main(["run", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        outs.append((out / "report.csv").read_bytes())
    assert outs[0] == outs[1]
    print("criterion 9: %d-byte reports byte-identical across reruns"
          % len(outs[0]))
