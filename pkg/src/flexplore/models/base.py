"""Common interface for parametric dynamics models ``f(x, u, theta)``.

All derivative methods accept arbitrary leading batch dimensions on ``x`` and
``u``: with ``x`` of shape ``(..., d)`` and ``u`` of shape ``(..., m)``

* ``predict``               -> ``(..., d)``
* ``features``              -> ``(..., d, n)``   d f / d theta
* ``state_jacobian``        -> ``(..., d, d)``   d f / d x
* ``input_derivative``      -> ``(..., d, m)``   d f / d u
* ``feature_state_tensor``  -> ``(..., d, n, d)`` d^2 f_k / d theta_i d x_j
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


class Model:
    name = "model"
    linear = False

    def __init__(self, d: int, m: int, n: int):
        self.d, self.m, self.n = int(d), int(m), int(n)

    # -- to be provided by subclasses -------------------------------------
    def predict(self, x, u, theta):
        raise NotImplementedError

    def features(self, x, u, theta):
        raise NotImplementedError

    def state_jacobian(self, x, u, theta):
        raise NotImplementedError

    def input_derivative(self, x, u, theta):
        raise NotImplementedError

    def feature_state_tensor(self, x, u, theta):
        raise NotImplementedError

    def init_params(self, rng=None) -> np.ndarray:
        return np.zeros(self.n)

    # -- derived operations -------------------------------------------------
    def _check(self, x, u, theta):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if x.shape[-1:] != (self.d,) or u.shape[-1:] != (self.m,):
            raise ValueError(
                f"{self.name}: expected x (..., {self.d}) and u (..., {self.m}), "
                f"got {x.shape} and {u.shape}"
            )
        if theta.shape != (self.n,):
            raise ValueError(f"{self.name}: expected theta of length {self.n}, got {theta.shape}")
        return x, u, theta

    def _row(self, k: int) -> int:
        if not 0 <= k < self.d:
            raise ValueError(f"row index {k} out of range for d={self.d}")
        return k

    def feature_row(self, x, u, theta, k: int):
        """Gradient of output ``k`` with respect to the parameters (0-based ``k``)."""
        return self.features(x, u, theta)[..., self._row(k), :]

    def feature_state_jacobian(self, x, u, theta, k: int):
        """``D[i, j] = d^2 f_k / d x_j d theta_i`` with shape ``(..., n, d)``."""
        return self.feature_state_tensor(x, u, theta)[..., self._row(k), :, :]

    def input_jacobian(self, x, theta, dt: float, u=None):
        """``dt * df/du``, evaluated at ``u = 0`` unless ``u`` is given."""
        x = np.asarray(x, dtype=float)
        if u is None:
            u = np.zeros(x.shape[:-1] + (self.m,))
        return dt * self.input_derivative(x, u, theta)

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[..., : self.d], z[..., self.d :]

    def header(self) -> str:
        return f"# model={self.name} d={self.d} m={self.m} n={self.n}"


def save_params(path, model: Model, theta) -> None:
    """Flat decimal text: one header line then one parameter per line."""
    theta = np.asarray(theta, dtype=float)
    body = "\n".join(repr(float(t)) for t in theta)
    Path(path).write_text(model.header() + "\n" + body + "\n")


def load_params(path):
    """Return ``(header_fields, theta)`` from a file written by ``save_params``."""
    lines = Path(path).read_text().splitlines()
    fields = {}
    for token in lines[0].lstrip("#").split():
        key, _, value = token.partition("=")
        fields[key] = value if key == "model" else int(value)
    theta = np.array([float(s) for s in lines[1:] if s.strip()])
    if theta.shape != (fields["n"],):
        raise ValueError(f"expected {fields['n']} parameters, found {theta.shape[0]}")
    return fields, theta


def finite_difference(fun, arg, h: float = 1e-5):
    """Central differences of ``fun`` with respect to the last axis of ``arg``.

    Returns an array with the derivative axis appended last.
    """
    arg = np.asarray(arg, dtype=float)
    cols = []
    for j in range(arg.shape[-1]):
        step = np.zeros_like(arg)
        step[..., j] = h
        cols.append((np.asarray(fun(arg + step)) - np.asarray(fun(arg - step))) / (2 * h))
    return np.stack(cols, axis=-1)
