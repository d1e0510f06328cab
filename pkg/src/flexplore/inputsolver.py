"""Exact maximization of a convex quadratic over a Euclidean ball.

Solves

    maximize  u^T Q u - 2 b^T u   subject to  ||u||_2 <= gamma

for symmetric positive semidefinite ``Q``. The maximizer lies on the sphere
``||u|| = gamma`` and satisfies ``(Q + mu I) u = b`` with ``alpha_i + mu <= 0``
for every eigenvalue ``alpha_i`` of ``Q``. In the eigenbasis of ``Q`` the norm
condition becomes the scalar secular equation

    sum_i b_i^2 / (alpha_i + mu)^2 = gamma^2,

which is solved by safeguarded Newton iterations on a bracket. When ``b`` has
no component on the dominant eigenspace and the secular equation has no root
on the maximizing branch (the "hard case"), the dominant eigenvector completes
the solution to the sphere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10
MAX_ITER = 200


class SolverFailure(RuntimeError):
    """Raised when the secular root-finder does not converge."""


@dataclass(frozen=True)
class QuadraticSubproblem:
    Q: np.ndarray
    b: np.ndarray
    gamma: float

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        m = b.shape[0]
        if Q.shape != (m, m):
            raise ValueError(f"Q has shape {Q.shape}, expected ({m}, {m})")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(b))):
            raise ValueError("Q and b must be finite")
        scale = max(1.0, float(np.max(np.abs(Q))))
        if np.max(np.abs(Q - Q.T)) > SYMMETRY_TOL * scale:
            raise ValueError("Q is not symmetric")
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def m(self) -> int:
        return self.b.shape[0]

    def objective(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(u @ self.Q @ u - 2.0 * self.b @ u)


@dataclass(frozen=True)
class BallSolution:
    u_star: np.ndarray
    mu: float
    objective: float
    kkt_residual: float
    hard_case: bool = field(default=False)


def _canonical_sign(vec: np.ndarray) -> np.ndarray:
    """Flip ``vec`` so its lowest-index nonzero coordinate is positive."""
    nz = np.flatnonzero(np.abs(vec) > 1e-12)
    if nz.size and vec[nz[0]] < 0:
        return -vec
    return vec


def secular_root(alphas, b_rot, gamma: float, tol: float = 1e-10):
    """Multiplier ``mu`` solving the norm equation on the maximizing branch.

    ``alphas`` are the eigenvalues of ``Q`` (any order) and ``b_rot`` the
    coordinates of ``b`` in the matching eigenbasis. Returns ``None`` in the
    hard case, where the norm equation has no root with ``mu < -max(alphas)``.
    """
    alphas = np.asarray(alphas, dtype=float)
    b_rot = np.asarray(b_rot, dtype=float)
    gamma = float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    a_max = float(np.max(alphas))
    scale = max(1.0, abs(a_max), float(np.max(np.abs(alphas))))
    dominant = alphas >= a_max - 1e-12 * scale
    b_norm = float(np.linalg.norm(b_rot))
    b_dom = float(np.linalg.norm(b_rot[dominant]))
    if b_norm == 0.0:
        return None

    # Work with s = -(a_max + mu) > 0: psi(s) = sum b_i^2 / (s + delta_i)^2 is
    # decreasing, and the root lies in [b_dom / gamma, b_norm / gamma].
    delta = np.where(dominant, 0.0, a_max - alphas)
    b2 = b_rot**2
    target = gamma**2

    def psi(s):
        return float(np.sum(b2 / (s + delta) ** 2))

    if b_dom <= 1e-13 * max(b_norm, gamma * scale):
        b2, delta = b2[~dominant], delta[~dominant]
        at_pole = float(np.sum(b2 / delta**2))
        if abs(at_pole - target) <= tol * target:
            return -a_max
        if at_pole < target:
            return None
        b_dom = 0.0

    lo, hi = b_dom / gamma, b_norm / gamma
    if hi - lo <= 1e-15 * hi:
        return -(a_max + hi)
    s = hi
    for _ in range(MAX_ITER):
        r = s + delta
        p = float(np.sum(b2 / r**2))
        if abs(p - target) <= tol * target:
            return -(a_max + s)
        if p > target:
            lo = s
        else:
            hi = s
        # Newton on h(s) = 1/sqrt(psi(s)) - 1/gamma, nearly linear in s.
        dp = float(-2.0 * np.sum(b2 / r**3))
        h = 1.0 / np.sqrt(p) - 1.0 / gamma
        dh = -0.5 * dp / p**1.5
        s_new = s - h / dh if dh != 0 else 0.5 * (lo + hi)
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        if s_new == s or hi - lo <= 4 * np.finfo(float).eps * hi:
            if abs(psi(s_new) - target) <= 1e3 * tol * target:
                return -(a_max + s_new)
            break
        s = s_new
    raise SolverFailure("secular equation did not converge")


def solve_ball_qp(p: QuadraticSubproblem) -> BallSolution:
    """Global maximizer of ``u^T Q u - 2 b^T u`` over ``||u|| <= gamma``."""
    Q, b, gamma = p.Q, p.b, p.gamma
    m = p.m
    alphas, vecs = np.linalg.eigh(Q)
    scale = max(1.0, float(np.max(np.abs(alphas))))
    if alphas[0] < -PSD_TOL * scale:
        raise ValueError(f"Q is not positive semidefinite (eigenvalue {alphas[0]:.3e})")
    a_max = float(alphas[-1])

    if not np.any(Q) and not np.any(b):
        u = np.zeros(m)
        u[0] = gamma
        return BallSolution(u, 0.0, 0.0, 0.0, hard_case=True)

    b_rot = vecs.T @ b
    mu = secular_root(alphas, b_rot, gamma)
    dominant = alphas >= a_max - 1e-12 * scale
    hard = bool(mu is None or mu == -a_max)
    if hard:
        mu = -a_max
        u_rot = np.zeros(m)
        u_rot[~dominant] = b_rot[~dominant] / (alphas[~dominant] + mu)
        rest = gamma**2 - float(u_rot @ u_rot)
        u = vecs @ u_rot
        if rest > 0:
            top = _canonical_sign(vecs[:, np.flatnonzero(dominant)[-1]])
            u = u + np.sqrt(rest) * top
    else:
        u = vecs @ (b_rot / (alphas + mu))

    norm = float(np.linalg.norm(u))
    if norm > 0:
        u = u * (gamma / norm)
    if not np.all(np.isfinite(u)):
        raise SolverFailure("non-finite solution")
    if abs(float(np.linalg.norm(u)) - gamma) > 1e-9 * max(1.0, gamma):
        raise SolverFailure("maximizer is not on the boundary")
    residual = float(np.linalg.norm(Q @ u + mu * u - b))
    return BallSolution(u, float(mu), p.objective(u), residual, hard_case=hard)
