"""Models that are affine in their parameters: ``f = V(x, u) theta + c(x, u)``."""
from __future__ import annotations

import numpy as np

from .base import Model, finite_difference


class LinearModel(Model):
    """Linear-in-parameters model built from user-supplied feature functions.

    Parameters
    ----------
    feature_fn : callable
        ``(x, u) -> V`` of shape ``(..., d, n)``.
    offset_fn : callable, optional
        ``(x, u) -> c`` of shape ``(..., d)``; zero when omitted.
    feature_dx, feature_du, offset_dx, offset_du : callable, optional
        Analytic derivatives with the derivative axis last. Central finite
        differences are used for any that are missing.
    """

    name = "linear"
    linear = True

    def __init__(self, d, m, n, feature_fn, offset_fn=None, *, feature_dx=None,
                 feature_du=None, offset_dx=None, offset_du=None, name=None):
        super().__init__(d, m, n)
        if name is not None:
            self.name = name
        self._V = feature_fn
        self._c = offset_fn
        self._V_dx = feature_dx
        self._V_du = feature_du
        self._c_dx = offset_dx
        self._c_du = offset_du

    def offset(self, x, u):
        if self._c is None:
            return np.zeros(np.shape(x)[:-1] + (self.d,))
        return np.asarray(self._c(x, u), dtype=float)

    def features(self, x, u, theta=None):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return np.asarray(self._V(x, u), dtype=float)

    def predict(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        return self.features(x, u) @ theta + self.offset(x, u)

    def _feature_dx(self, x, u):
        if self._V_dx is not None:
            return self._V_dx(x, u)
        return finite_difference(lambda xx: self.features(xx, u), x)

    def _feature_du(self, x, u):
        if self._V_du is not None:
            return self._V_du(x, u)
        return finite_difference(lambda uu: self.features(x, uu), u)

    def _offset_dx(self, x, u):
        if self._c_dx is not None:
            return self._c_dx(x, u)
        return finite_difference(lambda xx: self.offset(xx, u), x)

    def _offset_du(self, x, u):
        if self._c_du is not None:
            return self._c_du(x, u)
        return finite_difference(lambda uu: self.offset(x, uu), u)

    def feature_state_tensor(self, x, u, theta=None):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return np.asarray(self._feature_dx(x, u))

    def state_jacobian(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        return np.einsum("...kij,i->...kj", self._feature_dx(x, u), theta) + self._offset_dx(x, u)

    def input_derivative(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        return np.einsum("...kij,i->...kj", self._feature_du(x, u), theta) + self._offset_du(x, u)


class MatrixModel(LinearModel):
    """``f(z, Theta) = Theta phi(z)`` with ``theta = vec(Theta)`` (row-major).

    The features are block diagonal: row ``j`` of ``V`` holds ``phi(z)`` in the
    slots of row ``j`` of ``Theta``.
    """

    name = "matrix"

    def __init__(self, d, m, n_features, phi, phi_dx=None, phi_du=None, name=None):
        self.n_features = int(n_features)
        self._phi = phi
        self._phi_dx = phi_dx
        self._phi_du = phi_du
        super().__init__(
            d, m, d * self.n_features, self._block_features,
            feature_dx=self._block_dx, feature_du=self._block_du, name=name,
        )

    def phi(self, x, u):
        return np.asarray(self._phi(np.asarray(x, float), np.asarray(u, float)), dtype=float)

    def reduced_features(self, x, u):
        """``phi(z)^T``, the equivalent single-row feature for the Gram matrix."""
        return self.phi(x, u)

    def _block_features(self, x, u):
        p = self.phi(x, u)
        d, r = self.d, self.n_features
        V = np.zeros(p.shape[:-1] + (d, d * r))
        for j in range(d):
            V[..., j, j * r : (j + 1) * r] = p
        return V

    def _block_jac(self, jac):
        # jac: (..., n', q) -> (..., d, d * n', q)
        d, r = self.d, self.n_features
        T = np.zeros(jac.shape[:-2] + (d, d * r, jac.shape[-1]))
        for j in range(d):
            T[..., j, j * r : (j + 1) * r, :] = jac
        return T

    def _block_dx(self, x, u):
        if self._phi_dx is not None:
            jac = np.asarray(self._phi_dx(x, u), dtype=float)
        else:
            jac = finite_difference(lambda xx: self.phi(xx, u), x)
        return self._block_jac(jac)

    def _block_du(self, x, u):
        if self._phi_du is not None:
            jac = np.asarray(self._phi_du(x, u), dtype=float)
        else:
            jac = finite_difference(lambda uu: self.phi(x, uu), u)
        return self._block_jac(jac)


def linear_dynamics_model(d: int, m: int) -> MatrixModel:
    """``f(x, u) = A x + B u`` as a matrix model with ``phi(z) = z``."""
    eye = np.eye(d + m)

    def phi(x, u):
        return np.concatenate([x, u], axis=-1)

    def phi_dx(x, u):
        return np.broadcast_to(eye[:, :d], np.shape(x)[:-1] + (d + m, d)).copy()

    def phi_du(x, u):
        return np.broadcast_to(eye[:, d:], np.shape(x)[:-1] + (d + m, m)).copy()

    return MatrixModel(d, m, d + m, phi, phi_dx, phi_du, name="linear_dynamics")


class PendulumLinear(LinearModel):
    """Damped pendulum known up to ``theta = (omega0^2, alpha, b)``.

    ``V(z) = [[0, 0, 0], [-sin q, -qdot, u]]`` and ``c(z) = (qdot, 0)``.
    """

    name = "pendulum_linear"

    def __init__(self):
        super().__init__(
            2, 1, 3, self._features, self._offset,
            feature_dx=self._features_dx, feature_du=self._features_du,
            offset_dx=self._offset_dx_fn, offset_du=self._offset_du_fn,
        )

    @staticmethod
    def _features(x, u):
        V = np.zeros(np.shape(x)[:-1] + (2, 3))
        V[..., 1, 0] = -np.sin(x[..., 0])
        V[..., 1, 1] = -x[..., 1]
        V[..., 1, 2] = u[..., 0]
        return V

    @staticmethod
    def _offset(x, u):
        c = np.zeros(np.shape(x))
        c[..., 0] = x[..., 1]
        return c

    @staticmethod
    def _features_dx(x, u):
        T = np.zeros(np.shape(x)[:-1] + (2, 3, 2))
        T[..., 1, 0, 0] = -np.cos(x[..., 0])
        T[..., 1, 1, 1] = -1.0
        return T

    @staticmethod
    def _features_du(x, u):
        T = np.zeros(np.shape(x)[:-1] + (2, 3, 1))
        T[..., 1, 2, 0] = 1.0
        return T

    @staticmethod
    def _offset_dx_fn(x, u):
        J = np.zeros(np.shape(x)[:-1] + (2, 2))
        J[..., 0, 1] = 1.0
        return J

    @staticmethod
    def _offset_du_fn(x, u):
        return np.zeros(np.shape(x)[:-1] + (2, 1))


def chain_laplacian(N: int) -> np.ndarray:
    """Nearest-neighbour coupling with free ends: ``(L q)_i = sum_j (q_j - q_i)``."""
    L = np.zeros((N, N))
    for i in range(N - 1):
        L[i, i + 1] = L[i + 1, i] = 1.0
    L -= np.diag(L.sum(axis=1))
    return L


class ChainLinear(LinearModel):
    """Chain of ``N`` coupled pendulums with unknown per-joint friction.

    State ``x = (q_1..q_N, qdot_1..qdot_N)``; only the first joint is actuated.
    """

    name = "chain_linear"

    def __init__(self, N: int, kappa: float = 1.0, omega2: float = 1.0, b: float = 1.0):
        self.N = int(N)
        self.kappa, self.omega2, self.b = float(kappa), float(omega2), float(b)
        self.L = chain_laplacian(self.N)
        N2 = 2 * self.N
        super().__init__(
            N2, 1, self.N, self._features, self._offset,
            feature_dx=self._features_dx, feature_du=self._features_du,
            offset_dx=self._offset_dx_fn, offset_du=self._offset_du_fn,
        )

    def _features(self, x, u):
        N = self.N
        V = np.zeros(np.shape(x)[:-1] + (2 * N, N))
        idx = np.arange(N)
        V[..., N + idx, idx] = -x[..., N:]
        return V

    def _offset(self, x, u):
        N = self.N
        q, qd = x[..., :N], x[..., N:]
        acc = -self.omega2 * np.sin(q) + self.kappa * q @ self.L.T
        acc[..., 0] += self.b * u[..., 0]
        return np.concatenate([qd, acc], axis=-1)

    def _features_dx(self, x, u):
        N = self.N
        T = np.zeros(np.shape(x)[:-1] + (2 * N, N, 2 * N))
        idx = np.arange(N)
        T[..., N + idx, idx, N + idx] = -1.0
        return T

    def _features_du(self, x, u):
        return np.zeros(np.shape(x)[:-1] + (2 * self.N, self.N, 1))

    def _offset_dx_fn(self, x, u):
        N = self.N
        J = np.zeros(np.shape(x)[:-1] + (2 * N, 2 * N))
        J[..., :N, N:] = np.eye(N)
        J[..., N:, :N] = self.kappa * self.L
        idx = np.arange(N)
        J[..., N + idx, idx] += -self.omega2 * np.cos(x[..., :N])
        return J

    def _offset_du_fn(self, x, u):
        J = np.zeros(np.shape(x)[:-1] + (2 * self.N, 1))
        J[..., self.N, 0] = self.b
        return J
