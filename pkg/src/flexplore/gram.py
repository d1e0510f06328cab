"""Incremental Gram matrix of model features.

The Gram matrix ``M = eps * I + sum_s V_s^T V_s`` is the (unscaled) Fisher
information of a linear-in-parameters model under isotropic Gaussian noise.
``GramState`` keeps ``M``, its inverse and its log-determinant up to date under
rank-one and block updates, so the one-step information gain of a candidate
feature row costs a single quadratic form.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

DEFAULT_EPS = 1e-3
REFACTOR_EVERY = 256
# Sherman-Morrison loses roughly log10(1 + q) digits of M^-1 when v^T M^-1 v = q,
# so updates that carry a lot of new information are followed by a dense refactor.
REFACTOR_GAIN = 1e3
IDENTITY_TOL = 1e-6


class GramState:
    """Gram matrix with its inverse and log-determinant.

    Parameters
    ----------
    n : int
        Parameter dimension.
    eps_reg : float
        Regularization of the initial matrix ``M_0 = eps_reg * I``.
    """

    def __init__(self, n: int, eps_reg: float = DEFAULT_EPS):
        if int(n) != n or n < 1:
            raise ValueError(f"dimension must be a positive integer, got {n!r}")
        if not np.isfinite(eps_reg) or eps_reg <= 0:
            raise ValueError(f"eps_reg must be positive, got {eps_reg!r}")
        self.n = int(n)
        self.eps_reg = float(eps_reg)
        self.M = eps_reg * np.eye(self.n)
        self.M_inv = np.eye(self.n) / eps_reg
        self.logdet = self.n * np.log(eps_reg)
        self.count = 0
        self._since_refactor = 0

    def copy(self) -> "GramState":
        other = GramState.__new__(GramState)
        other.n = self.n
        other.eps_reg = self.eps_reg
        other.M = self.M.copy()
        other.M_inv = self.M_inv.copy()
        other.logdet = self.logdet
        other.count = self.count
        other._since_refactor = self._since_refactor
        return other

    def _check_vector(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector has non-finite entries")
        return v

    def rank_one_update(self, v) -> "GramState":
        """Absorb ``v v^T`` into ``M`` (Sherman-Morrison); returns ``self``."""
        v = self._check_vector(v)
        self.count += 1
        if not np.any(v):
            return self
        Mv = self.M_inv @ v
        if np.linalg.norm(self.M @ Mv - v) > IDENTITY_TOL * np.linalg.norm(v):
            self.refactor()                  # the inverse has drifted away from M
            Mv = self.M_inv @ v
        q = float(v @ Mv)
        self.M += np.outer(v, v)
        self.M_inv -= np.outer(Mv, Mv) / (1.0 + q)
        self.M_inv = 0.5 * (self.M_inv + self.M_inv.T)
        self.logdet += np.log1p(q)
        self._since_refactor += 1
        if q > REFACTOR_GAIN or self._since_refactor >= REFACTOR_EVERY:
            self.refactor()
        return self

    def block_update(self, V) -> "GramState":
        """Absorb ``V^T V`` row by row; ``V`` has shape ``(d, n)``."""
        V = np.asarray(V, dtype=float)
        if V.ndim != 2 or V.shape[1] != self.n or V.shape[0] < 1:
            raise ValueError(f"expected a (d, {self.n}) matrix, got shape {V.shape}")
        if not np.all(np.isfinite(V)):
            raise ValueError("feature matrix has non-finite entries")
        for row in V:
            self.rank_one_update(row)
        return self

    def refactor(self) -> None:
        """Recompute the inverse and log-determinant from ``M`` densely."""
        L = np.linalg.cholesky(self.M)
        L_inv = np.linalg.inv(L)
        self.M_inv = L_inv.T @ L_inv
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        self._since_refactor = 0

    def identity_error(self) -> float:
        return float(np.max(np.abs(self.M @ self.M_inv - np.eye(self.n))))

    def quad_form(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ self.M_inv @ v)

    def info_gain(self, v) -> float:
        """Rank-one surrogate gain ``logdet + v^T M^-1 v`` (same argmax as the exact gain)."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {v.shape}")
        return self.logdet + self.quad_form(v)

    def exact_gain(self, v) -> float:
        """``log det(M + v v^T)`` through the matrix determinant lemma."""
        return self.logdet + float(np.log1p(self.quad_form(v)))

    def dump(self, path) -> None:
        """Write ``M`` row-major, one row per line, at full precision."""
        lines = [f"# n={self.n} eps_reg={self.eps_reg!r} count={self.count}"]
        lines += [" ".join(repr(float(a)) for a in row) for row in self.M]
        Path(path).write_text("\n".join(lines) + "\n")

    @staticmethod
    def load_matrix(path) -> np.ndarray:
        return np.loadtxt(path, comments="#", ndmin=2)


def gram_init(n: int, eps_reg: float = DEFAULT_EPS) -> GramState:
    return GramState(n, eps_reg)


def rank_one_update(state: GramState, v) -> GramState:
    return state.rank_one_update(v)


def block_update(state: GramState, V) -> GramState:
    return state.block_update(V)


def info_gain(state: GramState, v) -> float:
    return state.info_gain(v)
