"""Ground-truth simulators stepped with ``x' = x + dt f(x, u) + w``.

Each environment is a dataclass of physical parameters plus the run-level
settings ``dt``, ``sigma`` (noise standard deviation) and ``gamma`` (input
bound). ``drift`` is vectorized over leading batch dimensions.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

log = logging.getLogger(__name__)


class SimulationDiverged(RuntimeError):
    """The simulated state became non-finite."""


@dataclass
class Environment:
    name = "environment"
    d = 0
    m = 0

    dt: float = 0.1
    sigma: float = 0.01
    gamma: float = 1.0
    x0: tuple = ()
    grid_kind: str = "halton"
    grid_low: tuple = ()
    grid_high: tuple = ()
    grid_n: tuple = ()
    grid_points: int = 500
    grid_u_low: tuple = ()
    grid_u_high: tuple = ()
    clip_count: int = field(default=0, repr=False, compare=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def drift(self, x, u, t=0):
        raise NotImplementedError

    def initial_state(self) -> np.ndarray:
        x0 = np.asarray(self.x0, dtype=float)
        return x0.copy() if x0.size else np.zeros(self.d)

    def true_params(self, t=0):
        """Parameters of the matching learning model, when there is one."""
        return None

    def step(self, x, u, t, rng) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        norm = float(np.linalg.norm(u))
        if norm > self.gamma * (1 + 1e-12):
            self.clip_count += 1
            log.warning("%s: clipping input of norm %.6g to %.6g", self.name, norm, self.gamma)
            u = u * (self.gamma / norm)
        with np.errstate(over="ignore", invalid="ignore"):   # divergence is reported below
            x_next = np.asarray(x, dtype=float) + self.dt * self.drift(x, u, t)
        if self.sigma > 0:
            x_next = x_next + self.sigma * rng.standard_normal(self.d)
        if not np.all(np.isfinite(x_next)):
            raise SimulationDiverged(f"{self.name}: non-finite state at t={t}")
        return x_next

    def eval_grid(self):
        """Deterministic evaluation points ``(x, u)`` with shapes ``(P, d)``, ``(P, m)``."""
        low = np.asarray(self.grid_low, dtype=float)
        high = np.asarray(self.grid_high, dtype=float)
        u_low = np.asarray(self.grid_u_low, dtype=float)
        u_high = np.asarray(self.grid_u_high, dtype=float)
        with_u = u_low.size > 0
        if self.grid_kind == "product":
            axes = [np.linspace(a, b, int(k)) for a, b, k in zip(low, high, self.grid_n)]
            mesh = np.meshgrid(*axes, indexing="ij")
            x = np.stack([g.ravel() for g in mesh], axis=-1)
            u = np.zeros((x.shape[0], self.m))
        elif self.grid_kind == "halton":
            lo = np.concatenate([low, u_low]) if with_u else low
            hi = np.concatenate([high, u_high]) if with_u else high
            unit = qmc.Halton(d=lo.size, scramble=False).random(int(self.grid_points) + 1)[1:]
            pts = qmc.scale(unit, lo, hi)
            x = pts[:, : self.d]
            u = pts[:, self.d :] if with_u else np.zeros((pts.shape[0], self.m))
        else:
            raise ValueError(f"unknown grid kind {self.grid_kind!r}")
        return x, u

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class Pendulum(Environment):
    """``qddot + alpha qdot + omega0^2 sin q = b u`` with ``x = (q, qdot)``."""

    name = "pendulum"
    d = 2
    m = 1

    omega2: float = 1.0
    alpha: float = 0.1
    b: float = 1.0
    grid_kind: str = "product"
    grid_low: tuple = (-np.pi, -4.0)
    grid_high: tuple = (np.pi, 4.0)
    grid_n: tuple = (50, 50)

    def drift(self, x, u, t=0):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        q, qd = x[..., 0], x[..., 1]
        acc = -self.alpha * qd - self.omega2 * np.sin(q) + self.b * u[..., 0]
        return np.stack([qd, acc], axis=-1)

    def true_params(self, t=0):
        return np.array([self.omega2, self.alpha, self.b])

    def eigenfrequency(self) -> float:
        return float(np.sqrt(self.omega2))


@dataclass
class Quadrotor(Environment):
    """Planar quadrotor with quadratic drag, ``x = (q_x, qdot_x, q_y, qdot_y, phi, phidot)``."""

    name = "quadrotor"
    d = 6
    m = 2

    mass: float = 1.0
    inertia: float = 0.5
    arm: float = 0.5
    alpha: float = 0.5
    g: float = 1.0
    dt: float = 0.1
    gamma: float = 2.0
    grid_low: tuple = (-2.0, -2.0, -2.0, -2.0, -np.pi, -2.0)
    grid_high: tuple = (2.0, 2.0, 2.0, 2.0, np.pi, 2.0)

    def rigid_body(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        thrust = u[..., 0] + u[..., 1]
        phi = x[..., 4]
        return np.stack([
            x[..., 1],
            -thrust * np.sin(phi) / self.mass,
            x[..., 3],
            thrust * np.cos(phi) / self.mass - self.g,
            x[..., 5],
            self.arm * (u[..., 0] - u[..., 1]) / self.inertia,
        ], axis=-1)

    def rigid_body_dx(self, x, u):
        thrust = u[..., 0] + u[..., 1]
        phi = x[..., 4]
        J = np.zeros(np.shape(x)[:-1] + (6, 6))
        J[..., 0, 1] = J[..., 2, 3] = J[..., 4, 5] = 1.0
        J[..., 1, 4] = -thrust * np.cos(phi) / self.mass
        J[..., 3, 4] = -thrust * np.sin(phi) / self.mass
        return J

    def rigid_body_du(self, x, u):
        phi = x[..., 4]
        J = np.zeros(np.shape(x)[:-1] + (6, 2))
        for j in range(2):
            J[..., 1, j] = -np.sin(phi) / self.mass
            J[..., 3, j] = np.cos(phi) / self.mass
        J[..., 5, 0] = self.arm / self.inertia
        J[..., 5, 1] = -self.arm / self.inertia
        return J

    def drift(self, x, u, t=0):
        x = np.asarray(x, dtype=float)
        f = self.rigid_body(x, u)
        f[..., 1] -= self.alpha * np.abs(x[..., 1]) * x[..., 1] / self.mass
        f[..., 3] -= self.alpha * np.abs(x[..., 3]) * x[..., 3] / self.mass
        return f


@dataclass
class Cartpole(Environment):
    """Frictionless cart-pole, ``x = (q_x, qdot_x, phi, qdot_phi)``, input = cart force."""

    name = "cartpole"
    d = 4
    m = 1

    g: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_length: float = 0.5
    dt: float = 0.05
    gamma: float = 5.0
    grid_low: tuple = (-2.0, -3.0, -np.pi, -6.0)
    grid_high: tuple = (2.0, 3.0, np.pi, 6.0)
    grid_u_low: tuple = (-5.0,)
    grid_u_high: tuple = (5.0,)

    def drift(self, x, u, t=0):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        total = self.cart_mass + self.pole_mass
        l, mp = self.half_length, self.pole_mass
        xd, phi, phid = x[..., 1], x[..., 2], x[..., 3]
        s, c = np.sin(phi), np.cos(phi)
        temp = (u[..., 0] + mp * l * phid**2 * s) / total
        phidd = (self.g * s - c * temp) / (l * (4.0 / 3.0 - mp * c**2 / total))
        xdd = temp - mp * l * phidd * c / total
        return np.stack([xd, xdd, phid, phidd], axis=-1)


@dataclass
class Arm(Environment):
    """Double pendulum with a torque at each joint, absolute angles
    ``x = (phi1, phidot1, phi2, phidot2)``."""

    name = "arm"
    d = 4
    m = 2

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    g: float = 9.8
    dt: float = 0.05
    gamma: float = 5.0
    grid_low: tuple = (-np.pi, -4.0, -np.pi, -4.0)
    grid_high: tuple = (np.pi, 4.0, np.pi, 4.0)

    def mass_matrix(self, x):
        c = np.cos(x[..., 0] - x[..., 2])
        M = np.empty(np.shape(x)[:-1] + (2, 2))
        M[..., 0, 0] = (self.m1 + self.m2) * self.l1**2
        M[..., 0, 1] = M[..., 1, 0] = self.m2 * self.l1 * self.l2 * c
        M[..., 1, 1] = self.m2 * self.l2**2
        return M

    def mass_inverse(self, x):
        return np.linalg.inv(self.mass_matrix(np.asarray(x, dtype=float)))

    def mass_inverse_dx(self, x):
        """``d M^-1 / d x`` with shape ``(..., 2, 2, 4)``."""
        x = np.asarray(x, dtype=float)
        Minv = self.mass_inverse(x)
        s = np.sin(x[..., 0] - x[..., 2])
        dM = np.zeros(np.shape(x)[:-1] + (2, 2))
        dM[..., 0, 1] = dM[..., 1, 0] = -self.m2 * self.l1 * self.l2 * s
        dMinv = -Minv @ dM @ Minv  # derivative along phi1; phi2 is its negative
        out = np.zeros(np.shape(x)[:-1] + (2, 2, 4))
        out[..., 0] = dMinv
        out[..., 2] = -dMinv
        return out

    def drift(self, x, u, t=0):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        p1, p1d, p2, p2d = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
        s = np.sin(p1 - p2)
        k = self.m2 * self.l1 * self.l2
        rhs = np.stack([
            u[..., 0] - k * p2d**2 * s - (self.m1 + self.m2) * self.g * self.l1 * np.sin(p1),
            u[..., 1] + k * p1d**2 * s - self.m2 * self.g * self.l2 * np.sin(p2),
        ], axis=-1)
        acc = np.einsum("...ij,...j->...i", self.mass_inverse(x), rhs)
        return np.stack([p1d, acc[..., 0], p2d, acc[..., 1]], axis=-1)


@dataclass
class StarField(Environment):
    """Spaceship in a force field centred on a star moving around the unit circle.

    ``x = (q_x, qdot_x, q_y, qdot_y)``; the input is an acceleration. The force
    magnitude is ``1 / (1 + |q - kappa|^2 / rho^2)``. With ``direction =
    "origin"`` it points along ``-q/|q|``; with ``direction = "star"`` it
    pushes away from the star along ``(q - kappa)/|q - kappa|``.
    """

    name = "star"
    d = 4
    m = 2

    period: int = 1000
    rho: float = 0.2
    direction: str = "origin"
    x0: tuple = (1.0, 0.0, 0.0, 0.0)
    grid_low: tuple = (-1.5, -1.0, -1.5, -1.0)
    grid_high: tuple = (1.5, 1.0, 1.5, 1.0)

    def __post_init__(self):
        super().__post_init__()
        if self.direction not in ("origin", "star"):
            raise ValueError(f"direction must be 'origin' or 'star', got {self.direction!r}")

    def star_center(self, t):
        angle = 2.0 * np.pi * t / self.period
        return np.array([np.cos(angle), np.sin(angle)])

    def true_params(self, t=0):
        kx, ky = self.star_center(t)
        return np.array([kx, ky, self.rho])

    def force(self, q, t):
        q = np.asarray(q, dtype=float)
        gap = q - self.star_center(t)
        magnitude = 1.0 / (1.0 + np.sum(gap**2, axis=-1) / self.rho**2)
        if self.direction == "origin":
            unit = q / np.sqrt(np.sum(q**2, axis=-1, keepdims=True) + 1e-18)
            return -magnitude[..., None] * unit
        unit = gap / np.sqrt(np.sum(gap**2, axis=-1, keepdims=True) + 1e-18)
        return magnitude[..., None] * unit

    def drift(self, x, u, t=0):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        a = self.force(x[..., [0, 2]], t) + u
        return np.stack([x[..., 1], a[..., 0], x[..., 3], a[..., 1]], axis=-1)


@dataclass
class Chain(Environment):
    """``N`` coupled damped pendulums, ``x = (q_1..q_N, qdot_1..qdot_N)``.

    ``qddot_i = -theta_i qdot_i - omega2 sin q_i + kappa sum_{j~i} (q_j - q_i)
    + b u [i = 1]``; the friction coefficients ``theta`` are unknown.
    """

    name = "chain"
    m = 1

    N: int = 2
    kappa: float = 1.0
    omega2: float = 1.0
    b: float = 1.0
    friction: tuple = (0.1,)
    grid_points: int = 500

    def __post_init__(self):
        super().__post_init__()
        self.N = int(self.N)
        fr = np.atleast_1d(np.asarray(self.friction, dtype=float))
        if fr.size == 1:
            fr = np.full(self.N, fr[0])
        if fr.size != self.N:
            raise ValueError(f"expected {self.N} friction coefficients, got {fr.size}")
        self.friction = tuple(float(f) for f in fr)
        if not self.grid_low:
            self.grid_low = (-np.pi,) * self.N + (-2.0,) * self.N
            self.grid_high = (np.pi,) * self.N + (2.0,) * self.N

    @property
    def d(self):
        return 2 * self.N

    def drift(self, x, u, t=0):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        N = self.N
        q, qd = x[..., :N], x[..., N:]
        coupling = np.zeros_like(q)
        coupling[..., 1:] += q[..., :-1] - q[..., 1:]
        coupling[..., :-1] += q[..., 1:] - q[..., :-1]
        acc = (-np.asarray(self.friction) * qd - self.omega2 * np.sin(q)
               + self.kappa * coupling)
        acc[..., 0] += self.b * u[..., 0]
        return np.concatenate([qd, acc], axis=-1)

    def true_params(self, t=0):
        return np.asarray(self.friction, dtype=float)


ENVIRONMENTS = {
    cls.name: cls for cls in (Pendulum, Quadrotor, Cartpole, Arm, StarField, Chain)
}


def make_env(name: str, **overrides) -> Environment:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(ENVIRONMENTS)}") from None
    return cls(**overrides)


def drift(env: Environment, x, u, t=0):
    return env.drift(x, u, t)


def env_step(env: Environment, x, u, t, rng):
    return env.step(x, u, t, rng)


def eval_grid(env: Environment):
    return env.eval_grid()
