import numpy as np
import pytest

from flexplore.environments import (
    ENVIRONMENTS,
    SimulationDiverged,
    drift,
    env_step,
    eval_grid,
    make_env,
)


def test_pendulum_equilibrium():
    np.testing.assert_array_equal(drift(make_env("pendulum"), np.zeros(2), np.zeros(1)), [0, 0])


def test_pendulum_drift_arithmetic():
    env = make_env("pendulum")
    np.testing.assert_allclose(env.drift(np.array([np.pi / 2, 0.5]), np.array([2.0])), [0.5, 0.95])


def test_quadrotor_hover():
    env = make_env("quadrotor")
    u = np.full(2, env.mass * env.g / 2)
    f = env.drift(np.zeros(6), u)
    np.testing.assert_allclose(f[[1, 3, 5]], 0.0, atol=1e-15)


def test_step_noiseless_equilibrium():
    env = make_env("pendulum", sigma=0.0)
    x = env_step(env, np.zeros(2), np.zeros(1), 0, np.random.default_rng(0))
    np.testing.assert_array_equal(x, np.zeros(2))


def test_step_euler_arithmetic():
    env = make_env("pendulum", sigma=0.0, gamma=2.0)
    x = env.step(np.array([np.pi / 2, 0.5]), np.array([2.0]), 0, np.random.default_rng(0))
    np.testing.assert_allclose(x, [np.pi / 2 + 0.05, 0.595])


def test_step_seeded_noise_is_reproducible():
    env = make_env("pendulum", sigma=0.1)

    def traj(seed):
        rng = np.random.default_rng(seed)
        x = np.array([0.1, 0.0])
        out = []
        for t in range(20):
            x = env.step(x, np.array([0.3]), t, rng)
            out.append(x)
        return np.array(out)

    np.testing.assert_array_equal(traj(3), traj(3))
    assert not np.array_equal(traj(3), traj(4))


def test_step_clips_large_inputs():
    env = make_env("pendulum", sigma=0.0, gamma=1.0)
    x1 = env.step(np.zeros(2), np.array([5.0]), 0, None)
    x2 = env.step(np.zeros(2), np.array([1.0]), 0, None)
    np.testing.assert_array_equal(x1, x2)
    assert env.clip_count == 1


def test_step_detects_divergence():
    env = make_env("pendulum", sigma=0.0)
    with pytest.raises(SimulationDiverged):
        env.step(np.array([0.0, np.inf]), np.zeros(1), 0, None)


def test_pendulum_grid():
    x, u = eval_grid(make_env("pendulum"))
    assert x.shape == (2500, 2) and u.shape == (2500, 1)
    assert np.all(u == 0)
    np.testing.assert_allclose(x.min(axis=0), [-np.pi, -4])
    np.testing.assert_allclose(x.max(axis=0), [np.pi, 4])


def test_grid_is_deterministic():
    for name in ENVIRONMENTS:
        env = make_env(name)
        a, b = env.eval_grid(), env.eval_grid()
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


def test_chain_grid():
    x, u = make_env("chain", N=2).eval_grid()
    assert x.shape == (500, 4)
    assert np.all(np.abs(x[:, :2]) <= np.pi) and np.all(np.abs(x[:, 2:]) <= 2)
    assert len(np.unique(x, axis=0)) == 500


def test_undamped_pendulum_energy_drift():
    env = make_env("pendulum", alpha=0.0, sigma=0.0, dt=1e-2)
    x = np.array([1.0, 0.0])

    def energy(s):
        return 0.5 * s[1] ** 2 - env.omega2 * np.cos(s[0])

    for t in range(1000):
        x_next = env.step(x, np.zeros(1), t, None)
        assert abs(energy(x_next) - energy(x)) <= 5 * env.dt
        x = x_next


def test_star_force_peaks_at_centre_and_decays():
    for direction in ("origin", "star"):
        env = make_env("star", direction=direction)
        centre = env.star_center(0)
        radial = np.array([np.cos(2.0), np.sin(2.0)])
        mags = [np.linalg.norm(env.force(centre + (r + 1e-6) * radial, 0)) for r in
                np.linspace(0, 3, 50)]
        assert mags[0] == pytest.approx(1.0, abs=1e-6)
        assert np.all(np.diff(mags) < 0)


def test_star_centre_quarter_period():
    env = make_env("star")
    np.testing.assert_allclose(env.true_params(env.period / 4), [0.0, 1.0, env.rho], atol=1e-15)


def test_uncoupled_chain_matches_pendulum():
    chain = make_env("chain", N=3, kappa=0.0, sigma=0.0, friction=0.1)
    pend = make_env("pendulum", sigma=0.0, alpha=0.1)
    rng = np.random.default_rng(0)
    xc = np.array([0.5, -0.3, 1.0, 0.2, 0.0, -0.4])
    xp = xc[[0, 3]]
    for t in range(100):
        u = rng.uniform(-1, 1, 1)
        xc = chain.step(xc, u, t, None)
        xp = pend.step(xp, u, t, None)
        np.testing.assert_allclose(xc[[0, 3]], xp, atol=1e-12)


def test_chain_friction_length_checked():
    with pytest.raises(ValueError):
        make_env("chain", N=3, friction=(0.1, 0.2))


@pytest.mark.parametrize("field, value", [("dt", 0.0), ("sigma", -1.0), ("gamma", 0.0)])
def test_invalid_settings(field, value):
    with pytest.raises(ValueError):
        make_env("pendulum", **{field: value})


def test_unknown_environment():
    with pytest.raises(ValueError):
        make_env("lunar_lander")


@pytest.mark.parametrize("name", sorted(ENVIRONMENTS))
def test_random_inputs_stay_finite(name):
    env = make_env(name)
    rng = np.random.default_rng(1)
    x = env.initial_state()
    for t in range(200):
        u = env.gamma / np.sqrt(env.m) * rng.uniform(-1, 1, env.m)
        x = env.step(x, u, t, rng)
    assert np.all(np.isfinite(x))
