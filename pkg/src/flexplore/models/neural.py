"""One-hidden-layer tanh networks and the composite models built on them.

A composite model has the form

    f(x, u, theta) = R(u) @ net(xi(x, u), theta) + known(x, u)

where ``xi`` is a fixed observation embedding, ``R(u) = R0 + sum_j u_j R_j`` a
readout that is affine in the input, and ``known`` the part of the dynamics
the agent is given. Every derivative below is a closed form.
"""
from __future__ import annotations

import numpy as np

from .base import Model


class TanhMLP:
    """``out = W2 tanh(W1 xi + b1) + b2`` with parameters flattened as
    ``[W1 (row-major), b1, W2 (row-major), b2]``."""

    def __init__(self, n_in: int, n_out: int, width: int = 8):
        self.n_in, self.n_out, self.width = int(n_in), int(n_out), int(width)
        h, q, p = self.width, self.n_in, self.n_out
        self.sizes = (h * q, h, p * h, p)
        self.n_params = sum(self.sizes)

    def unpack(self, theta):
        h, q, p = self.width, self.n_in, self.n_out
        a = h * q
        W1 = theta[:a].reshape(h, q)
        b1 = theta[a : a + h]
        W2 = theta[a + h : a + h + p * h].reshape(p, h)
        b2 = theta[a + h + p * h :]
        return W1, b1, W2, b2

    def init_params(self, rng) -> np.ndarray:
        h, q, p = self.width, self.n_in, self.n_out
        lim1, lim2 = 1.0 / np.sqrt(q), 1.0 / np.sqrt(h)
        return np.concatenate([
            rng.uniform(-lim1, lim1, h * q),
            rng.uniform(-lim1, lim1, h),
            rng.uniform(-lim2, lim2, p * h),
            rng.uniform(-lim2, lim2, p),
        ])

    def hidden(self, xi, theta):
        W1, b1, _, _ = self.unpack(theta)
        return np.tanh(xi @ W1.T + b1)

    def forward(self, xi, theta):
        _, _, W2, b2 = self.unpack(theta)
        return self.hidden(xi, theta) @ W2.T + b2

    def param_jacobian(self, xi, theta):
        """``d out / d theta`` with shape ``(..., p, n)``."""
        W1, b1, W2, b2 = self.unpack(theta)
        h, q, p = self.width, self.n_in, self.n_out
        hid = self.hidden(xi, theta)
        slope = 1.0 - hid**2
        lead = hid.shape[:-1]
        g = W2 * slope[..., None, :]                      # (..., p, h)
        dW1 = g[..., :, :, None] * xi[..., None, None, :]  # (..., p, h, q)
        dW2 = np.zeros(lead + (p, p, h))
        idx = np.arange(p)
        dW2[..., idx, idx, :] = hid[..., None, :]
        db2 = np.broadcast_to(np.eye(p), lead + (p, p))
        return np.concatenate([
            dW1.reshape(lead + (p, h * q)), g, dW2.reshape(lead + (p, p * h)), db2,
        ], axis=-1)

    def input_jacobian(self, xi, theta):
        """``d out / d xi`` with shape ``(..., p, q)``."""
        W1, _, W2, _ = self.unpack(theta)
        slope = 1.0 - self.hidden(xi, theta) ** 2
        return np.einsum("ph,...h,hq->...pq", W2, slope, W1)

    def mixed_jacobian(self, xi, theta):
        """``d^2 out_k / d theta_i d xi_l`` with shape ``(..., p, n, q)``."""
        W1, b1, W2, b2 = self.unpack(theta)
        h, q, p = self.width, self.n_in, self.n_out
        hid = self.hidden(xi, theta)
        slope = 1.0 - hid**2
        lead = hid.shape[:-1]
        dslope = -2.0 * (hid * slope)[..., :, None] * W1       # (..., h, q): d slope_j / d xi_l
        # W1[j, i] block: d/dxi_l [W2[k, j] slope_j xi_i]
        eye_q = np.eye(q)
        dW1 = W2[:, :, None, None] * (
            dslope[..., None, :, None, :] * xi[..., None, None, :, None]
            + slope[..., None, :, None, None] * eye_q
        )                                                       # (..., p, h, q_i, q_l)
        db1 = W2[:, :, None] * dslope[..., None, :, :]          # (..., p, h, q)
        dW2 = np.zeros(lead + (p, p, h, q))
        idx = np.arange(p)
        dW2[..., idx, idx, :, :] = (slope[..., :, None] * W1)[..., None, :, :]
        db2 = np.zeros(lead + (p, p, q))
        return np.concatenate([
            dW1.reshape(lead + (p, h * q, q)), db1,
            dW2.reshape(lead + (p, p * h, q)), db2,
        ], axis=-2)


class NeuralModel(Model):
    """Composite model ``R(u) net(xi(x, u)) + known(x, u)``.

    Subclasses override ``embed``/``embed_dx``/``embed_du``, ``readout`` and
    the ``known_*`` hooks. The defaults give a plain network on ``z = (x, u)``.
    """

    name = "mlp"

    def __init__(self, d, m, n_in=None, n_out=None, width=8):
        n_in = d + m if n_in is None else n_in
        n_out = d if n_out is None else n_out
        self.net = TanhMLP(n_in, n_out, width)
        super().__init__(d, m, self.net.n_params)

    def init_params(self, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        return self.net.init_params(rng)

    # -- hooks ------------------------------------------------------------
    def embed(self, x, u):
        return np.concatenate([x, u], axis=-1)

    def embed_dx(self, x, u):
        q = self.net.n_in
        J = np.zeros(np.shape(x)[:-1] + (q, self.d))
        J[..., np.arange(self.d), np.arange(self.d)] = 1.0
        return J

    def embed_du(self, x, u):
        q = self.net.n_in
        J = np.zeros(np.shape(x)[:-1] + (q, self.m))
        J[..., self.d + np.arange(self.m), np.arange(self.m)] = 1.0
        return J

    def readout(self, u):
        """``R(u)`` with shape ``(..., d, p)``."""
        return np.broadcast_to(np.eye(self.d, self.net.n_out), np.shape(u)[:-1] + (self.d, self.net.n_out))

    def readout_du(self, u):
        """``R_j`` stacked on the last axis: ``(d, p, m)``."""
        return np.zeros((self.d, self.net.n_out, self.m))

    def known(self, x, u):
        return np.zeros(np.shape(x)[:-1] + (self.d,))

    def known_dx(self, x, u):
        return np.zeros(np.shape(x)[:-1] + (self.d, self.d))

    def known_du(self, x, u):
        return np.zeros(np.shape(x)[:-1] + (self.d, self.m))

    # -- model interface --------------------------------------------------
    def predict(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        out = self.net.forward(self.embed(x, u), theta)
        return np.einsum("...kp,...p->...k", self.readout(u), out) + self.known(x, u)

    def features(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        J = self.net.param_jacobian(self.embed(x, u), theta)
        return np.einsum("...kp,...pn->...kn", self.readout(u), J)

    def state_jacobian(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        Jxi = self.net.input_jacobian(self.embed(x, u), theta)
        return (np.einsum("...kp,...pq,...qj->...kj", self.readout(u), Jxi, self.embed_dx(x, u))
                + self.known_dx(x, u))

    def input_derivative(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        xi = self.embed(x, u)
        out = self.net.forward(xi, theta)
        Jxi = self.net.input_jacobian(xi, theta)
        through_net = np.einsum("...kp,...pq,...qj->...kj", self.readout(u), Jxi, self.embed_du(x, u))
        through_readout = np.einsum("kpj,...p->...kj", self.readout_du(u), out)
        return through_net + through_readout + self.known_du(x, u)

    def feature_state_tensor(self, x, u, theta):
        x, u, theta = self._check(x, u, theta)
        mixed = self.net.mixed_jacobian(self.embed(x, u), theta)
        return np.einsum("...kp,...pnq,...qj->...knj", self.readout(u), mixed, self.embed_dx(x, u))


class MLPModel(NeuralModel):
    """Plain width-8 tanh network on the state-action pair."""

    name = "mlp"

    def __init__(self, d, m, width=8):
        super().__init__(d, m, width=width)


def _trig_embedding(x, angle_idx):
    """Replace each angle coordinate by ``(cos, sin)``; returns ``(xi, dxi/dx)``."""
    d = x.shape[-1]
    parts, rows = [], []
    for j in range(d):
        if j in angle_idx:
            parts += [np.cos(x[..., j]), np.sin(x[..., j])]
            rows += [(j, "cos"), (j, "sin")]
        else:
            parts.append(x[..., j])
            rows.append((j, "id"))
    xi = np.stack(parts, axis=-1)
    J = np.zeros(x.shape[:-1] + (len(rows), d))
    for r, (j, kind) in enumerate(rows):
        if kind == "id":
            J[..., r, j] = 1.0
        elif kind == "cos":
            J[..., r, j] = -np.sin(x[..., j])
        else:
            J[..., r, j] = np.cos(x[..., j])
    return xi, J


class CartpoleMLP(NeuralModel):
    """``f = a(xi) + u b(xi)`` with ``xi = (q_x, qdot_x, cos phi, sin phi, qdot_phi)``.

    State ordering is ``(q_x, qdot_x, phi, qdot_phi)``.
    """

    name = "cartpole_mlp"

    def __init__(self, width=8):
        super().__init__(4, 1, n_in=5, n_out=8, width=width)
        R = np.zeros((4, 8, 1))
        R[np.arange(4), 4 + np.arange(4), 0] = 1.0
        self._R_du = R

    def embed(self, x, u):
        return _trig_embedding(x, (2,))[0]

    def embed_dx(self, x, u):
        return _trig_embedding(x, (2,))[1]

    def embed_du(self, x, u):
        return np.zeros(np.shape(x)[:-1] + (5, 1))

    def readout(self, u):
        R = np.zeros(np.shape(u)[:-1] + (4, 8))
        R[..., np.arange(4), np.arange(4)] = 1.0
        R[..., np.arange(4), 4 + np.arange(4)] = u[..., :1]
        return R

    def readout_du(self, u):
        return self._R_du


class ArmMLP(NeuralModel):
    """Double pendulum: the network learns ``f(., u=0)`` on a trig embedding of
    both joints; the torque response ``M(phi)^-1 u`` is given.

    State ordering is ``(phi1, phidot1, phi2, phidot2)``.
    """

    name = "arm_mlp"

    def __init__(self, arm, width=8):
        super().__init__(4, 2, n_in=6, n_out=4, width=width)
        self.arm = arm

    def embed(self, x, u):
        return _trig_embedding(x, (0, 2))[0]

    def embed_dx(self, x, u):
        return _trig_embedding(x, (0, 2))[1]

    def embed_du(self, x, u):
        return np.zeros(np.shape(x)[:-1] + (6, 2))

    def known(self, x, u):
        acc = np.einsum("...ij,...j->...i", self.arm.mass_inverse(x), u)
        out = np.zeros(np.shape(x))
        out[..., 1], out[..., 3] = acc[..., 0], acc[..., 1]
        return out

    def known_dx(self, x, u):
        dMinv = self.arm.mass_inverse_dx(x)          # (..., 2, 2, 4)
        dacc = np.einsum("...ijk,...j->...ik", dMinv, u)
        J = np.zeros(np.shape(x)[:-1] + (4, 4))
        J[..., 1, :], J[..., 3, :] = dacc[..., 0, :], dacc[..., 1, :]
        return J

    def known_du(self, x, u):
        Minv = self.arm.mass_inverse(x)
        J = np.zeros(np.shape(x)[:-1] + (4, 2))
        J[..., 1, :], J[..., 3, :] = Minv[..., 0, :], Minv[..., 1, :]
        return J


class QuadrotorMLP(NeuralModel):
    """Planar quadrotor with known thrust and gravity; a network on
    ``(q_x, qdot_x, q_y, qdot_y)`` learns the two friction accelerations.

    State ordering is ``(q_x, qdot_x, q_y, qdot_y, phi, phidot)``.
    """

    name = "quadrotor_mlp"

    def __init__(self, quad, width=8):
        super().__init__(6, 2, n_in=4, n_out=2, width=width)
        self.quad = quad
        R = np.zeros((6, 2))
        R[1, 0] = R[3, 1] = 1.0
        self._R = R

    def embed(self, x, u):
        return x[..., :4]

    def embed_dx(self, x, u):
        J = np.zeros(np.shape(x)[:-1] + (4, 6))
        J[..., np.arange(4), np.arange(4)] = 1.0
        return J

    def embed_du(self, x, u):
        return np.zeros(np.shape(x)[:-1] + (4, 2))

    def readout(self, u):
        return np.broadcast_to(self._R, np.shape(u)[:-1] + (6, 2))

    def known(self, x, u):
        return self.quad.rigid_body(x, u)

    def known_dx(self, x, u):
        return self.quad.rigid_body_dx(x, u)

    def known_du(self, x, u):
        return self.quad.rigid_body_du(x, u)
