"""Euler schemes as Gaussian functionals, with covariance flows and
Hormander bracket diagnostics.

A model's drift and diffusion coefficients are callables that take a list
of state coordinates and return a list of components, built from +, -, *
and scalars only.  The same callable then serves three evaluation modes:
plain float arrays (fast path simulation), order-1 jets (step Jacobians),
and higher-order jets (the scheme as a `jets.Functional`).  Constants are
written ``1.0 + 0.0 * x[0]`` so batch shapes propagate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import jets
from .jets import CapabilityError, Functional


@dataclass(frozen=True)
class SdeModel:
    """Autonomous SDE dX = b(X) dt + sum_j sigma_j(X) dB^j."""

    name: str
    state_dim: int
    noise_dim: int
    drift: object
    diffusions: tuple
    smoothness: int = 6

    def __post_init__(self):
        if self.state_dim < 1 or self.noise_dim < 1:
            raise ValueError("state_dim and noise_dim must be positive")
        if len(self.diffusions) != self.noise_dim:
            raise ValueError("need one diffusion field per noise coordinate")


def _zero_drift(x):
    return [0.0 * c for c in x]


MODELS = {
    "brownian": SdeModel("brownian", 1, 1, _zero_drift, (lambda x: [1.0 + 0.0 * x[0]],)),
    "linear-ou": SdeModel("linear-ou", 1, 1, lambda x: [-x[0]], (lambda x: [1.0 + 0.0 * x[0]],)),
    "elliptic-2d": SdeModel(
        "elliptic-2d",
        2,
        2,
        lambda x: [-x[0], -x[1]],
        (
            lambda x: [1.0 + 0.0 * x[0], 0.0 * x[0]],
            lambda x: [0.0 * x[0], 1.0 + 0.0 * x[0]],
        ),
    ),
    # weak Hormander example: noise enters x2 only through the bracket with b
    "hormander-grushin": SdeModel(
        "hormander-grushin",
        2,
        1,
        lambda x: [0.0 * x[0], x[0]],
        (lambda x: [1.0 + 0.0 * x[0], 0.0 * x[0]],),
    ),
}


def get_model(name: str) -> SdeModel:
    try:
        return MODELS[name]
    except KeyError:
        known = ", ".join(sorted(MODELS))
        raise ValueError(f"unknown model {name!r} (built-ins: {known})") from None


def _check_scheme_args(model, x0, T, n):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != model.state_dim:
        raise ValueError(f"x0 must have {model.state_dim} coordinates")
    if not T > 0:
        raise ValueError("T must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    return x0


def euler_functional(model: SdeModel, x0, T: float, n: int) -> Functional:
    """The Euler terminal value as a functional of n*noise_dim Gaussians.

    Input coordinate k*noise_dim + j is the standard normal driving noise j
    over step k; the scheme scales it by sqrt(T/n).
    """
    x0 = _check_scheme_args(model, x0, T, n)
    d, m_b = model.state_dim, model.noise_dim
    h = T / n
    sqh = math.sqrt(h)

    def scheme(g):
        state = [x0[i] + 0.0 * g[0] for i in range(d)]
        for k in range(n):
            b = model.drift(state)
            sig = [field(state) for field in model.diffusions]
            step = []
            for i in range(d):
                acc = state[i] + h * b[i]
                for j in range(m_b):
                    acc = acc + (sig[j][i] * g[k * m_b + j]) * sqh
                step.append(acc)
            state = step
        return state

    return Functional(n * m_b, d, scheme, max_order=model.smoothness,
                      name=f"euler-{model.name}-n{n}")


def euler_terminals(model: SdeModel, x0, T: float, n: int, increments) -> np.ndarray:
    """Fast order-0 path: terminal states, shape (state_dim,) + batch.

    `increments` holds standard normal coordinates shaped
    (n*noise_dim,) + batch, in the euler_functional layout.
    """
    x0 = _check_scheme_args(model, x0, T, n)
    g = np.asarray(increments, dtype=float)
    if g.shape[0] != n * model.noise_dim:
        raise ValueError(f"increments must have {n * model.noise_dim} leading coordinates")
    h = T / n
    sqh = math.sqrt(h)
    m_b = model.noise_dim
    state = [np.full(g.shape[1:], x0[i]) for i in range(model.state_dim)]
    for k in range(n):
        b = model.drift(state)
        sig = [field(state) for field in model.diffusions]
        state = [
            state[i] + h * b[i]
            + sum(sig[j][i] * g[k * m_b + j] for j in range(m_b)) * sqh
            for i in range(model.state_dim)
        ]
    return np.stack([np.asarray(c, dtype=float) for c in state])


def _as_jets(components, m, order, batch_shape):
    out = []
    for c in components:
        if not isinstance(c, jets.Jet):
            c = jets.constant(c, m, order, batch_shape)
        out.append(c)
    return out


def _coefficient_frame(model, state):
    """Values and state-Jacobians of b and the sigma_j at a batch of states.

    state: (d,) + batch.  Returns (bval, bjac, sigval, sigjac) with
    bval (d,)+batch, bjac (d,d)+batch ordered [component, partial],
    sigval (m_b,d)+batch, sigjac (m_b,d,d)+batch.
    """
    d = model.state_dim
    batch = state.shape[1:]
    coords = jets.lift(state, 1)
    idx = [jets.index_of(d, 1, tuple(int(i == l) for l in range(d))) for i in range(d)]

    def frame(comps):
        comps = _as_jets(comps, d, 1, batch)
        val = np.stack([np.asarray(c.value, dtype=float) for c in comps])
        jac = np.stack([
            np.stack([np.asarray(c.values[idx[l]], dtype=float) for l in range(d)])
            for c in comps
        ])
        return val, jac

    bval, bjac = frame(model.drift(coords))
    pairs = [frame(field(coords)) for field in model.diffusions]
    sigval = np.stack([p[0] for p in pairs])
    sigjac = np.stack([p[1] for p in pairs])
    return bval, bjac, sigval, sigjac


def _flow(model, x0, T, n, g, keep_steps):
    d, m_b = model.state_dim, model.noise_dim
    h = T / n
    sqh = math.sqrt(h)
    batch = g.shape[1:]
    state = np.broadcast_to(x0.reshape((d,) + (1,) * len(batch)), (d,) + batch).copy()
    eye = np.broadcast_to(np.eye(d).reshape((d, d) + (1,) * len(batch)), (d, d) + batch)
    cov = np.zeros((d, d) + batch)
    steps = [] if keep_steps else None
    for k in range(n):
        bval, bjac, sigval, sigjac = _coefficient_frame(model, state)
        a = eye + h * bjac
        noise = np.zeros((d,) + batch)
        fresh = np.zeros((d, d) + batch)
        for j in range(m_b):
            gk = g[k * m_b + j]
            a = a + sqh * sigjac[j] * gk
            noise = noise + sigval[j] * gk
            fresh = fresh + np.einsum("i...,j...->ij...", sigval[j], sigval[j])
        # older increments propagate through the step map; the step's own
        # increment enters directly, so its term skips this congruence
        cov = np.einsum("il...,lm...,jm...->ij...", a, cov, a) + h * fresh
        state = state + h * bval + sqh * noise
        if keep_steps:
            steps.append(a)
    return state, cov, steps


def euler_malliavin(model: SdeModel, x0, T: float, n: int, sample) -> np.ndarray:
    """Malliavin covariance of the Euler terminal, by the flow recursion.

    sample: increments shaped (n*noise_dim,) + batch.  Returns
    (state_dim, state_dim) + batch.  Matches dirichlet.malliavin_matrix
    applied to euler_functional at the same sample (independent AD path).
    """
    x0 = _check_scheme_args(model, x0, T, n)
    g = np.asarray(sample, dtype=float)
    if g.shape[0] != n * model.noise_dim:
        raise ValueError(f"sample must have {n * model.noise_dim} leading coordinates")
    return _flow(model, x0, T, n, g, keep_steps=False)[1]


@dataclass(frozen=True)
class EulerResult:
    """One scheme run: terminal states, step transition flow, covariance."""

    terminal: np.ndarray    # (d,) + batch
    flow: np.ndarray        # (n+1, d, d) + batch; flow[k] = dX_T / dX_k
    malliavin: np.ndarray   # (d, d) + batch
    grid: np.ndarray        # (n+1,) times k*T/n


def euler_run(model: SdeModel, x0, T: float, n: int, sample) -> EulerResult:
    """Scheme run keeping the whole Jacobian flow (small n and batch only)."""
    x0 = _check_scheme_args(model, x0, T, n)
    g = np.asarray(sample, dtype=float)
    if g.shape[0] != n * model.noise_dim:
        raise ValueError(f"sample must have {n * model.noise_dim} leading coordinates")
    terminal, cov, steps = _flow(model, x0, T, n, g, keep_steps=True)
    d = model.state_dim
    batch = g.shape[1:]
    flow = np.empty((n + 1, d, d) + batch)
    flow[n] = np.broadcast_to(np.eye(d).reshape((d, d) + (1,) * len(batch)), (d, d) + batch)
    for k in range(n - 1, -1, -1):
        flow[k] = np.einsum("il...,lj...->ij...", flow[k + 1], steps[k])
    grid = np.linspace(0.0, T, n + 1)
    return EulerResult(terminal, flow, cov, grid)


def coarsen_increments(fine, noise_dim: int, factor: int) -> np.ndarray:
    """Refinement coupling: coarse standard normals from summed fine ones.

    fine: (n_fine*noise_dim,) + batch with the euler_functional layout.
    Consecutive groups of `factor` steps sum to one coarse Brownian
    increment; dividing by sqrt(factor) renormalizes to unit variance.
    """
    g = np.asarray(fine, dtype=float)
    if factor < 1:
        raise ValueError("factor must be at least 1")
    n_fine, rem = divmod(g.shape[0], noise_dim)
    if rem or n_fine % factor:
        raise ValueError("fine grid size must be a multiple of factor * noise_dim")
    shaped = g.reshape((n_fine // factor, factor, noise_dim) + g.shape[1:])
    coarse = shaped.sum(axis=1) / math.sqrt(factor)
    return coarse.reshape((n_fine // factor * noise_dim,) + g.shape[1:])


# ---------------------------------------------------------------------------
# Lie brackets and the Hormander spanning diagnostic


def _bracket(phi, phi_depth, psi, psi_depth, d):
    """[phi, psi] = <phi, grad psi> - <psi, grad phi> as a field closure."""
    depth = max(phi_depth, psi_depth) + 1

    def field(coords):
        # a depth-q field returns jets of order r - q, so everything here
        # is available at least to order target + 1 and can be shifted once
        target = coords[0].order - depth
        f = phi(coords)
        p = psi(coords)
        out = []
        for k in range(d):
            acc = None
            for i in range(d):
                term = f[i].truncate(target) * p[k].shift(i).truncate(target) \
                    - p[i].truncate(target) * f[k].shift(i).truncate(target)
                acc = term if acc is None else acc + term
            out.append(acc)
        return out

    return field, depth


@dataclass(frozen=True)
class HormanderReport:
    """Bracket fields at a point and the spanning spectrum by depth.

    lambdas[k] is the minimum eigenvalue of sum psi(x) psi(x)* over the
    fields of bracket depth <= k; the quadratic form over unit directions
    attains exactly this value.
    """

    point: np.ndarray
    depth: int
    names: tuple
    depths: tuple
    vectors: np.ndarray   # (n_fields, d)
    lambdas: np.ndarray   # (depth + 1,)

    def spanning_depth(self, tol: float = 1e-10):
        """First depth whose fields span R^d, or None."""
        for k, lam in enumerate(self.lambdas):
            if lam > tol:
                return k
        return None


def hormander(model: SdeModel, x, depth: int) -> HormanderReport:
    """Evaluate the bracket hierarchy A_0..A_depth at x.

    A_0 holds the diffusion fields; each level adds the brackets of the
    previous level's new fields with every sigma_j and with the drift.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = model.state_dim
    if x.shape[0] != d:
        raise ValueError(f"x must have {d} coordinates")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth + 1 > model.smoothness:
        raise CapabilityError(
            f"depth {depth} needs order {depth + 1} coefficient jets; "
            f"model smoothness is {model.smoothness}")

    def wrap(raw):
        def field(coords):
            return _as_jets(raw(coords), d, coords[0].order, coords[0].batch_shape)
        return field

    base = [(f"s{j + 1}", wrap(model.diffusions[j]), 0) for j in range(model.noise_dim)]
    drift = ("b", wrap(model.drift), 0)

    fields = list(base)
    new = list(base)
    for _ in range(depth):
        grown = []
        for name, closure, q in new:
            for bname, bclosure, bq in base + [drift]:
                made, made_depth = _bracket(closure, q, bclosure, bq, d)
                grown.append((f"[{name},{bname}]", made, made_depth))
        fields.extend(grown)
        new = grown

    coords = jets.lift(x, depth)
    vectors = np.stack([
        np.array([float(np.asarray(c.value)) for c in closure(coords)])
        for _, closure, _ in fields
    ])
    depths = tuple(q for _, _, q in fields)
    lambdas = np.empty(depth + 1)
    for k in range(depth + 1):
        sel = vectors[np.asarray(depths) <= k]
        gram = sel.T @ sel
        lambdas[k] = float(np.linalg.eigvalsh(gram)[0])
    return HormanderReport(x, depth, tuple(f[0] for f in fields), depths, vectors, lambdas)
