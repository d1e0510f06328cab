"""Star-field dynamics known up to the star centre and radius ``(kx, ky, rho)``."""
from __future__ import annotations

import numpy as np

from .base import Model

_ACC_ROWS = (1, 3)
_POS_COLS = (0, 2)
_REG = 1e-18


class StarFieldModel(Model):
    """``qddot = s(q; theta) e + u`` with ``s = 1 / (1 + |q - kappa|^2 / rho^2)``.

    ``direction = "origin"`` uses ``e = -q/|q|``; ``direction = "star"`` uses
    ``e = (q - kappa)/|q - kappa|``.
    """

    name = "star_field"

    def __init__(self, direction: str = "origin", theta0=(0.0, 0.0, 0.3)):
        super().__init__(4, 2, 3)
        if direction not in ("origin", "star"):
            raise ValueError(f"direction must be 'origin' or 'star', got {direction!r}")
        self.direction = direction
        self.theta0 = np.asarray(theta0, dtype=float)

    def init_params(self, rng=None):
        return self.theta0.copy()

    # Derivatives of the magnitude s with respect to theta = (kx, ky, rho) and q.
    def _terms(self, x, theta):
        q = x[..., list(_POS_COLS)]
        kappa, rho = theta[:2], theta[2]
        p = q - kappa
        r2 = np.sum(p**2, axis=-1)
        s = 1.0 / (1.0 + r2 / rho**2)
        g_q = 2.0 * p / rho**2                                         # (..., 2)
        g_th = np.concatenate([-2.0 * p / rho**2, (-2.0 * r2 / rho**3)[..., None]], axis=-1)
        s_q = -(s**2)[..., None] * g_q
        s_th = -(s**2)[..., None] * g_th                               # (..., 3)
        g_q_th = np.zeros(x.shape[:-1] + (2, 3))                       # d^2 g / dq_j dtheta_l
        g_q_th[..., 0, 0] = g_q_th[..., 1, 1] = -2.0 / rho**2
        g_q_th[..., :, 2] = -4.0 * p / rho**3
        s_q_th = (2.0 * (s**3)[..., None, None] * g_q[..., :, None] * g_th[..., None, :]
                  - (s**2)[..., None, None] * g_q_th)
        return q, p, s, s_q, s_th, s_q_th

    @staticmethod
    def _unit(v):
        n = np.sqrt(np.sum(v**2, axis=-1) + _REG)
        e = v / n[..., None]
        eye = np.eye(v.shape[-1])
        P = eye / n[..., None, None] - v[..., :, None] * v[..., None, :] / (n**3)[..., None, None]
        return e, P, n

    def _acc_parts(self, x, theta):
        """Acceleration ``a`` (..., 2), ``da/dtheta`` (..., 2, 3), ``da/dq`` (..., 2, 2)
        and ``d^2 a_i / dq_j dtheta_l`` (..., 2, 3, 2)."""
        q, p, s, s_q, s_th, s_q_th = self._terms(x, theta)
        if self.direction == "origin":
            e, E, _ = self._unit(q)
            a = -s[..., None] * e
            a_th = -e[..., :, None] * s_th[..., None, :]
            a_q = -e[..., :, None] * s_q[..., None, :] - s[..., None, None] * E
            # mixed[i, l, j] = -s_qj_thl e_i - s_thl E_ij
            mixed = (-e[..., :, None, None] * np.swapaxes(s_q_th, -1, -2)[..., None, :, :]
                     - s_th[..., None, :, None] * E[..., :, None, :])
            return a, a_th, a_q, mixed
        e, P, n = self._unit(p)
        a = s[..., None] * e
        a_th = e[..., :, None] * s_th[..., None, :]
        a_th[..., :, :2] -= s[..., None, None] * P
        a_q = e[..., :, None] * s_q[..., None, :] + s[..., None, None] * P
        # dP_il / dq_j
        eye = np.eye(2)
        n3, n5 = n**3, n**5
        dP = (-(eye[:, :, None] * p[..., None, None, :])
              - (eye[:, None, :] * p[..., None, :, None])
              - (p[..., :, None, None] * eye[None, :, :])) / n3[..., None, None, None]
        dP = dP + 3.0 * (p[..., :, None, None] * p[..., None, :, None] * p[..., None, None, :]
                         ) / n5[..., None, None, None]                  # (..., i, l, j)
        mixed = e[..., :, None, None] * np.swapaxes(s_q_th, -1, -2)[..., None, :, :]
        mixed = mixed + s_th[..., None, :, None] * P[..., :, None, :]
        mixed[..., :, :2, :] -= s_q[..., None, None, :] * P[..., :, :, None]
        mixed[..., :, :2, :] -= s[..., None, None, None] * dP
        return a, a_th, a_q, mixed

    def _acc(self, x, theta):
        q = x[..., list(_POS_COLS)]
        p = q - theta[:2]
        s = 1.0 / (1.0 + np.sum(p**2, axis=-1) / theta[2] ** 2)
        v, sign = (q, -1.0) if self.direction == "origin" else (p, 1.0)
        norm = np.sqrt(np.sum(v**2, axis=-1) + _REG)
        return (sign * s / norm)[..., None] * v

    def predict(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        a = self._acc(x, theta) + u
        return np.stack([x[..., 1], a[..., 0], x[..., 3], a[..., 1]], axis=-1)

    def features(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        _, a_th, _, _ = self._acc_parts(x, theta)
        V = np.zeros(x.shape[:-1] + (4, 3))
        V[..., list(_ACC_ROWS), :] = a_th
        return V

    def state_jacobian(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        _, _, a_q, _ = self._acc_parts(x, theta)
        J = np.zeros(x.shape[:-1] + (4, 4))
        J[..., 0, 1] = J[..., 2, 3] = 1.0
        for i, row in enumerate(_ACC_ROWS):
            for j, col in enumerate(_POS_COLS):
                J[..., row, col] = a_q[..., i, j]
        return J

    def input_derivative(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        J = np.zeros(x.shape[:-1] + (4, 2))
        J[..., 1, 0] = J[..., 3, 1] = 1.0
        return J

    def feature_state_tensor(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        *_, mixed = self._acc_parts(x, theta)
        T = np.zeros(x.shape[:-1] + (4, 3, 4))
        for i, row in enumerate(_ACC_ROWS):
            for j, col in enumerate(_POS_COLS):
                T[..., row, :, col] = mixed[..., i, :, j]
        return T
