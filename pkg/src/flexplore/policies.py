"""Exploration policies.

``flex_step`` is the greedy linearized D-optimal input: it predicts the next
state under ``u = 0``, linearizes the information gain of the next feature row
in ``u`` and solves the resulting ball-constrained quadratic exactly. The other
functions are the baselines it is compared against. ``Policy`` subclasses wrap
each rule with the small amount of state it needs between steps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gram import DEFAULT_EPS, GramState
from .inputsolver import QuadraticSubproblem, solve_ball_qp

ROW_SELECTIONS = ("round_robin", "fixed", "random")


@dataclass
class PolicyConfig:
    gamma: float = 1.0
    row_selection: str = "round_robin"
    k: int = 0                       # 0-based output row for row_selection="fixed"
    seed: int = 0
    omega0: float = 1.0              # periodic baseline angular frequency
    uniform_steps: int = 100
    uniform_step_size: float = 0.1   # as a fraction of gamma
    horizon: int = 50                # episodic planning horizon
    replan: int = 0                  # steps between replans, 0 means every horizon
    plan_iters: int = 200
    plan_step: float = 0.05          # as a fraction of gamma
    plan_init: str = "random"        # "random" or "zeros"
    lookahead: int = 1               # model steps over which FLEX propagates u_t

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.row_selection not in ROW_SELECTIONS:
            raise ValueError(f"row_selection must be one of {ROW_SELECTIONS}")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.lookahead < 1:
            raise ValueError("lookahead must be at least 1")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.plan_init not in ("random", "zeros"):
            raise ValueError("plan_init must be 'random' or 'zeros'")


def project_ball(u, gamma: float) -> np.ndarray:
    """Euclidean projection onto ``{|u| <= gamma}`` (last axis)."""
    u = np.asarray(u, dtype=float)
    norm = np.linalg.norm(u, axis=-1, keepdims=True)
    scale = np.minimum(1.0, gamma / np.maximum(norm, 1e-300))
    return u * scale


# -- FLEX --------------------------------------------------------------------

def predicted_state(model, theta, x_t, dt: float, lookahead: int = 1):
    """State after ``lookahead`` zero-input model steps and its sensitivity to ``u_t``.

    With ``lookahead = 1`` this is ``x_bar = x_t + dt f(x_t, 0)`` and
    ``B = dt df/du(x_t, 0)``. Larger values apply ``u_t`` for one step and zero
    afterwards, chaining ``I + dt df/dx`` along the prediction.
    """
    x = np.asarray(x_t, dtype=float)
    zero = np.zeros(model.m)
    B = model.input_jacobian(x, theta, dt)
    x = x + dt * model.predict(x, zero, theta)
    for _ in range(lookahead - 1):
        B = B + dt * model.state_jacobian(x, zero, theta) @ B
        x = x + dt * model.predict(x, zero, theta)
    return x, B


def flex_subproblem(model, theta, gram: GramState, x_t, dt: float, k: int, gamma: float,
                    lookahead: int = 1, prediction=None):
    """Build ``(Q, b)`` for output row ``k`` around the ``u = 0`` prediction.

    ``prediction`` may carry a precomputed ``predicted_state`` result.
    """
    zero = np.zeros(model.m)
    if prediction is None:
        prediction = predicted_state(model, theta, x_t, dt, lookahead)
    x_bar, B = prediction
    v = model.feature_row(x_bar, zero, theta, k)
    D = model.feature_state_jacobian(x_bar, zero, theta, k)
    DB = D @ B
    MinvDB = gram.M_inv @ DB
    Q = DB.T @ MinvDB
    b = -MinvDB.T @ v
    return QuadraticSubproblem(Q, b, gamma)


def flex_step(model, theta, gram: GramState, x_t, dt: float, cfg: PolicyConfig, k=None,
              prediction=None):
    """Greedy one-step D-optimal input; ``k`` overrides ``cfg.k`` when given."""
    if gram.n != model.n:
        raise ValueError(f"Gram dimension {gram.n} does not match model n={model.n}")
    row = cfg.k if k is None else k
    sol = solve_ball_qp(flex_subproblem(model, theta, gram, x_t, dt, row, cfg.gamma,
                                        cfg.lookahead, prediction))
    u = sol.u_star
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("flex_step produced a non-finite input")
    return u


def informative_rows(model, theta, x_t, dt: float, lookahead: int = 1,
                     prediction=None) -> list[int]:
    """Rows whose feature vector or state derivative is nonzero at the ``u = 0`` prediction."""
    zero = np.zeros(model.m)
    if prediction is None:
        prediction = predicted_state(model, theta, x_t, dt, lookahead)
    x_bar = prediction[0]
    V = model.features(x_bar, zero, theta)
    T = model.feature_state_tensor(x_bar, zero, theta)
    active = np.any(V != 0, axis=1) | np.any(T != 0, axis=(1, 2))
    return [int(i) for i in np.flatnonzero(active)]


# -- baselines ---------------------------------------------------------------

def random_step(cfg: PolicyConfig, rng, m: int) -> np.ndarray:
    """Uniform on the cube of half-width ``gamma / sqrt(m)``, hence inside the ball."""
    return cfg.gamma / np.sqrt(m) * rng.uniform(-1.0, 1.0, size=m)


def periodic_step(cfg: PolicyConfig, t: int, dt: float, m: int = 1) -> np.ndarray:
    """``gamma sin(omega0 t dt)``; for ``m > 1`` every coordinate carries the same
    signal scaled by ``1/sqrt(m)``."""
    return np.full(m, cfg.gamma / np.sqrt(m) * np.sin(cfg.omega0 * t * dt))


def uniform_step(model, theta, history, x_t, dt: float, cfg: PolicyConfig, rng=None):
    """Projected gradient ascent on ``1/2 sum_s |x(u) - x_s|^2`` with
    ``x(u) = x_t + dt f(x_t, u, theta)``; returns the best iterate."""
    history = np.atleast_2d(np.asarray(history, dtype=float))
    if history.size == 0:
        raise ValueError("uniform_step needs a non-empty history")
    x_t = np.asarray(x_t, dtype=float)
    gamma = cfg.gamma
    if not np.any(model.input_jacobian(x_t, theta, dt)):
        return np.zeros(model.m)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    total = history.sum(axis=0)
    count = len(history)

    def value_and_grad(u):
        x_u = x_t + dt * model.predict(x_t, u, theta)
        diff = x_u - history
        value = 0.5 * float(np.sum(diff**2))
        J = model.input_jacobian(x_t, theta, dt, u=u)
        return value, J.T @ (count * x_u - total)

    u = project_ball(1e-3 * gamma * rng.standard_normal(model.m), gamma)
    best_u, best_val = u, -np.inf
    step = cfg.uniform_step_size * gamma
    for _ in range(cfg.uniform_steps):
        val, g = value_and_grad(u)
        if val > best_val:
            best_u, best_val = u, val
        norm = np.linalg.norm(g)
        if norm == 0:
            break
        u = project_ball(u + step * g / norm, gamma)
    val, _ = value_and_grad(u)
    if val > best_val:
        best_u = u
    return best_u


def rollout(model, theta, x0, U, dt: float) -> np.ndarray:
    """Noise-free Euler rollout; returns states ``x_0 .. x_H``."""
    X = np.empty((len(U) + 1, model.d))
    X[0] = x0
    for t, u in enumerate(U):
        X[t + 1] = X[t] + dt * model.predict(X[t], u, theta)
    return X


def plan_objective(model, theta, M, x0, U, dt: float) -> float:
    """``log det(M + sum_{t=1..H} V(x_t, 0)^T V(x_t, 0))`` along the rollout."""
    X = rollout(model, theta, x0, U, dt)
    V = model.features(X[1:], np.zeros((len(U), model.m)), theta)
    A = M + np.einsum("tki,tkj->ij", V, V)
    return float(np.linalg.slogdet(A)[1])


def plan_gradient(model, theta, M, x0, U, dt: float):
    """Objective value and its gradient with respect to the input sequence (adjoint method)."""
    H = len(U)
    X = rollout(model, theta, x0, U, dt)
    zeros = np.zeros((H, model.m))
    V = model.features(X[1:], zeros, theta)                      # (H, d, n)
    A = M + np.einsum("tki,tkj->ij", V, V)
    value = float(np.linalg.slogdet(A)[1])
    A_inv = np.linalg.inv(A)
    T = model.feature_state_tensor(X[1:], zeros, theta)         # (H, d, n, d)
    g_x = 2.0 * np.einsum("tkn,tknj->tj", V @ A_inv, T)          # d value / d x_{t+1}
    Jx = model.state_jacobian(X[:-1], U, theta)                  # (H, d, d)
    Ju = model.input_derivative(X[:-1], U, theta)                # (H, d, m)
    grad = np.empty_like(U)
    lam = np.zeros(model.d)
    for t in range(H - 1, -1, -1):
        lam = lam + g_x[t]                                       # adjoint of x_{t+1}
        grad[t] = dt * Ju[t].T @ lam
        lam = lam + dt * Jx[t].T @ lam
    return value, grad


def episodic_plan(model, theta, x_t, H: int, dt: float, cfg: PolicyConfig, M=None, rng=None):
    """Projected gradient ascent on the horizon-``H`` log-determinant; best iterate returned."""
    if H < 1:
        raise ValueError("H must be at least 1")
    M = DEFAULT_EPS * np.eye(model.n) if M is None else np.asarray(M, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    gamma = cfg.gamma
    if cfg.plan_init == "zeros":
        U = np.zeros((H, model.m))
    else:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        U = project_ball(gamma / np.sqrt(model.m) * rng.uniform(-1, 1, size=(H, model.m)), gamma)
    step = cfg.plan_step * gamma
    best_U, best_val = U.copy(), -np.inf
    for _ in range(cfg.plan_iters):
        val, g = plan_gradient(model, theta, M, x_t, U, dt)
        if not np.isfinite(val):
            break
        if val > best_val:
            best_U, best_val = U.copy(), val
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        direction = np.divide(g, norms, out=np.zeros_like(g), where=norms > 0)
        if not np.any(direction):
            break
        U = project_ball(U + step * direction, gamma)
    else:
        val = plan_objective(model, theta, M, x_t, U, dt)
        if np.isfinite(val) and val > best_val:
            best_U = U.copy()
    return best_U


# -- stateful wrappers ---------------------------------------------------------

class Policy:
    """Common interface: ``act(t, x, theta, gram, history) -> u``."""

    name = "policy"

    def __init__(self, model, cfg: PolicyConfig, dt: float, rng=None):
        self.model = model
        self.cfg = cfg
        self.dt = dt
        self.rng = np.random.default_rng(cfg.seed) if rng is None else rng

    def act(self, t, x, theta, gram, history):
        raise NotImplementedError


class FlexPolicy(Policy):
    name = "flex"

    def __init__(self, model, cfg, dt, rng=None):
        super().__init__(model, cfg, dt, rng)
        self.counter = 0

    def select_row(self, x, theta, prediction=None) -> int:
        cfg = self.cfg
        if cfg.row_selection == "fixed":
            return self.model._row(cfg.k)
        rows = informative_rows(self.model, theta, x, self.dt, cfg.lookahead, prediction)
        if not rows:
            return 0
        if cfg.row_selection == "random":
            return rows[int(self.rng.integers(len(rows)))]
        k = rows[self.counter % len(rows)]
        self.counter += 1
        return k

    def act(self, t, x, theta, gram, history):
        pred = predicted_state(self.model, theta, x, self.dt, self.cfg.lookahead)
        k = self.select_row(x, theta, pred)
        return flex_step(self.model, theta, gram, x, self.dt, self.cfg, k=k, prediction=pred)


class RandomPolicy(Policy):
    name = "random"

    def act(self, t, x, theta, gram, history):
        return random_step(self.cfg, self.rng, self.model.m)


class PeriodicPolicy(Policy):
    name = "periodic"

    def act(self, t, x, theta, gram, history):
        return periodic_step(self.cfg, t, self.dt, self.model.m)


class UniformPolicy(Policy):
    name = "uniform"

    def act(self, t, x, theta, gram, history):
        return uniform_step(self.model, theta, history, x, self.dt, self.cfg, self.rng)


class EpisodicPolicy(Policy):
    """Plans ``horizon`` inputs at once and replays them until the next replan."""

    name = "episodic"

    def __init__(self, model, cfg, dt, rng=None):
        super().__init__(model, cfg, dt, rng)
        self.plan = np.zeros((0, model.m))
        self.cursor = 0
        self.period = cfg.replan or cfg.horizon

    def act(self, t, x, theta, gram, history):
        if self.cursor >= min(self.period, len(self.plan)):
            M = gram.M if gram is not None else None
            self.plan = episodic_plan(self.model, theta, x, self.cfg.horizon, self.dt,
                                      self.cfg, M=M, rng=self.rng)
            self.cursor = 0
        u = self.plan[self.cursor]
        self.cursor += 1
        return u


POLICIES = {cls.name: cls for cls in
            (FlexPolicy, RandomPolicy, PeriodicPolicy, UniformPolicy, EpisodicPolicy)}


def make_policy(name: str, model, cfg: PolicyConfig, dt: float, rng=None) -> Policy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(model, cfg, dt, rng)
