"""Online parameter estimation.

``RecursiveLeastSquares`` keeps the exact regularized least-squares estimate
for models that are affine in their parameters, sharing its Gram matrix with
the exploration policy. ``OnlineGradientDescent`` takes one adaptive-moment
step per observation on the loss averaged over a small ring buffer.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .gram import DEFAULT_EPS, GramState


@dataclass(frozen=True)
class Target:
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray


def make_target(x_t, u_t, x_next, dt: float) -> Target:
    """Finite-difference velocity target ``(x_next - x_t) / dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x_t = np.asarray(x_t, dtype=float)
    y = (np.asarray(x_next, dtype=float) - x_t) / dt
    return Target(x_t.copy(), np.asarray(u_t, dtype=float).copy(), y)


class RecursiveLeastSquares:
    """Row-wise recursive least squares on ``y - c(z) = V(z) theta``.

    After any prefix of data the estimate equals
    ``(eps I + sum V^T V)^-1 sum V^T (y - c)`` when started from ``theta = 0``.
    The estimate is formed from the accumulated right-hand side rather than by
    correcting the previous estimate, so rounding errors made while ``M`` is
    still nearly singular do not persist once it becomes well conditioned.
    """

    def __init__(self, model, gram: GramState | None = None, theta0=None,
                 eps_reg: float = DEFAULT_EPS):
        if not getattr(model, "linear", False):
            raise ValueError(f"recursive least squares needs a linear model, got {model.name!r}")
        self.model = model
        self.gram = GramState(model.n, eps_reg) if gram is None else gram
        self.theta = np.zeros(model.n) if theta0 is None else np.asarray(theta0, float).copy()
        self.rhs = self.gram.M @ self.theta

    def update(self, target: Target) -> np.ndarray:
        V = self.model.features(target.x, target.u)
        residual_target = target.y - self.model.offset(target.x, target.u)
        for v, y in zip(V, residual_target):
            if not np.any(v):
                continue
            self.gram.rank_one_update(v)
            self.rhs = self.rhs + v * y
            self.theta = self.gram.M_inv @ self.rhs
        return self.theta


class OnlineGradientDescent:
    """Adam steps on the buffer-averaged squared error ``1/2 |f(z, theta) - y|^2``."""

    def __init__(self, model, theta0, lr: float = 0.01, capacity: int = 100,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 clip: float = 1e3):
        self.model = model
        self.theta = np.asarray(theta0, dtype=float).copy()
        self.lr, self.beta1, self.beta2, self.eps, self.clip = lr, beta1, beta2, eps, clip
        self.buffer = deque(maxlen=int(capacity))
        self.m1 = np.zeros_like(self.theta)
        self.m2 = np.zeros_like(self.theta)
        self.steps = 0

    def _batch(self):
        X = np.array([t.x for t in self.buffer])
        U = np.array([t.u for t in self.buffer])
        Y = np.array([t.y for t in self.buffer])
        return X, U, Y

    def loss(self, theta=None) -> float:
        theta = self.theta if theta is None else theta
        X, U, Y = self._batch()
        r = self.model.predict(X, U, theta) - Y
        return 0.5 * float(np.mean(np.sum(r**2, axis=-1)))

    def gradient(self, theta=None) -> np.ndarray:
        theta = self.theta if theta is None else theta
        X, U, Y = self._batch()
        r = self.model.predict(X, U, theta) - Y
        V = self.model.features(X, U, theta)
        return np.einsum("bkn,bk->n", V, r) / len(self.buffer)

    def update(self, target: Target) -> np.ndarray:
        self.buffer.append(target)
        g = self.gradient()
        norm = float(np.linalg.norm(g))
        if norm > self.clip:
            g = g * (self.clip / norm)
        self.steps += 1
        self.m1 = self.beta1 * self.m1 + (1 - self.beta1) * g
        self.m2 = self.beta2 * self.m2 + (1 - self.beta2) * g**2
        m1_hat = self.m1 / (1 - self.beta1**self.steps)
        m2_hat = self.m2 / (1 - self.beta2**self.steps)
        self.theta = self.theta - self.lr * m1_hat / (np.sqrt(m2_hat) + self.eps)
        return self.theta


def rls_update(state: RecursiveLeastSquares, target: Target) -> RecursiveLeastSquares:
    state.update(target)
    return state


def ogd_update(state: OnlineGradientDescent, target: Target) -> OnlineGradientDescent:
    state.update(target)
    return state
