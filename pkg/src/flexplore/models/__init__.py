from .base import Model, finite_difference, load_params, save_params
from .linear import (
    ChainLinear,
    LinearModel,
    MatrixModel,
    PendulumLinear,
    chain_laplacian,
    linear_dynamics_model,
)
from .neural import ArmMLP, CartpoleMLP, MLPModel, NeuralModel, QuadrotorMLP, TanhMLP
from .star import StarFieldModel


def build_model(name: str, env=None, **options) -> Model:
    """Instantiate a registered model; ``env`` supplies known physical constants."""
    if name == "pendulum_linear":
        return PendulumLinear()
    if name == "chain_linear":
        return ChainLinear(env.N, kappa=env.kappa, omega2=env.omega2, b=env.b)
    if name == "mlp":
        return MLPModel(env.d, env.m, width=int(options.get("width", 8)))
    if name == "linear_dynamics":
        return linear_dynamics_model(env.d, env.m)
    if name == "cartpole_mlp":
        return CartpoleMLP(width=int(options.get("width", 8)))
    if name == "arm_mlp":
        return ArmMLP(env, width=int(options.get("width", 8)))
    if name == "quadrotor_mlp":
        return QuadrotorMLP(env, width=int(options.get("width", 8)))
    if name == "star_field":
        direction = options.get("direction", getattr(env, "direction", "origin"))
        theta0 = options.get("theta0", (0.0, 0.0, 0.3))
        return StarFieldModel(direction=direction, theta0=theta0)
    raise ValueError(f"unknown model {name!r}")


__all__ = [
    "ArmMLP", "CartpoleMLP", "ChainLinear", "LinearModel", "MLPModel", "MatrixModel",
    "Model", "NeuralModel", "PendulumLinear", "QuadrotorMLP", "StarFieldModel", "TanhMLP",
    "build_model", "chain_laplacian", "finite_difference", "linear_dynamics_model",
    "load_params", "save_params",
]
