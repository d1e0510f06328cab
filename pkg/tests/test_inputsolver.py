import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexplore.inputsolver import QuadraticSubproblem, secular_root, solve_ball_qp


def circle_oracle(Q, b, gamma, n=1_000_000):
    """Best objective over a dense grid of the circle of radius gamma."""
    phi = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    U = gamma * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    vals = np.einsum("ki,ij,kj->k", U, Q, U) - 2.0 * U @ b
    i = int(np.argmax(vals))
    return vals[i], U[i]


def random_psd(rng, m, rank=None):
    rank = m if rank is None else rank
    A = rng.normal(size=(m, rank))
    return A @ A.T


def test_pure_linear_term():
    sol = solve_ball_qp(QuadraticSubproblem(np.zeros((2, 2)), np.array([1.0, 0.0]), 2.0))
    np.testing.assert_allclose(sol.u_star, [-2.0, 0.0], atol=1e-12)
    assert sol.objective == pytest.approx(4.0)


def test_dominant_eigenvector_tie_break():
    sol = solve_ball_qp(QuadraticSubproblem(np.diag([3.0, 1.0]), np.zeros(2), 1.0))
    np.testing.assert_allclose(sol.u_star, [1.0, 0.0], atol=1e-12)
    assert sol.objective == pytest.approx(3.0)
    assert sol.hard_case


def test_hard_case_against_circle_oracle():
    Q, b = np.diag([2.0, 1.0]), np.array([0.0, 1.0])
    sol = solve_ball_qp(QuadraticSubproblem(Q, b, 1.0))
    np.testing.assert_allclose(sol.u_star, [0.0, -1.0], atol=1e-9)
    assert sol.objective == pytest.approx(3.0)
    best, _ = circle_oracle(Q, b, 1.0)
    assert sol.objective >= best - 1e-9


def test_degenerate_zero_problem_returns_first_axis():
    sol = solve_ball_qp(QuadraticSubproblem(np.zeros((3, 3)), np.zeros(3), 0.5))
    np.testing.assert_array_equal(sol.u_star, [0.5, 0.0, 0.0])


def test_secular_scalar_case():
    mu = secular_root(np.array([1.0]), np.array([1.0]), 1.0)
    assert mu == pytest.approx(-2.0)
    assert 1.0 / (1.0 + mu) == pytest.approx(-1.0)
    # 1-D brute force of u^2 - 2u on [-1, 1]
    u = np.linspace(-1, 1, 200001)
    assert u[np.argmax(u**2 - 2 * u)] == pytest.approx(-1.0)


def test_secular_hard_case_boundary():
    mu = secular_root(np.array([1.0, 2.0]), np.array([1.0, 0.0]), 1.0)
    assert mu == pytest.approx(-2.0)


def test_secular_signals_hard_case_for_zero_b():
    assert secular_root(np.array([1.0, 2.0]), np.zeros(2), 1.0) is None


@pytest.mark.parametrize("Q", [np.array([[1.0, 2.0], [0.0, 1.0]]), np.array([[np.nan, 0], [0, 1.0]])])
def test_rejects_invalid_matrices(Q):
    with pytest.raises(ValueError):
        QuadraticSubproblem(Q, np.zeros(2), 1.0)


def test_rejects_non_psd():
    with pytest.raises(ValueError):
        solve_ball_qp(QuadraticSubproblem(np.diag([1.0, -1.0]), np.zeros(2), 1.0))


def test_rejects_bad_radius():
    with pytest.raises(ValueError):
        QuadraticSubproblem(np.eye(2), np.zeros(2), 0.0)


def test_kkt_certificate_and_boundary():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = int(rng.integers(1, 6))
        Q = random_psd(rng, m, int(rng.integers(1, m + 1)))
        b = rng.normal(size=m)
        gamma = rng.uniform(0.1, 10)
        sol = solve_ball_qp(QuadraticSubproblem(Q, b, gamma))
        assert abs(np.linalg.norm(sol.u_star) - gamma) <= 1e-9
        assert sol.kkt_residual <= 1e-8
        if not sol.hard_case:
            resid = (Q + sol.mu * np.eye(m)) @ sol.u_star - b
            assert np.linalg.norm(resid) <= 1e-8 * max(1.0, np.abs(Q).max(), gamma)
            assert np.all(np.linalg.eigvalsh(Q) + sol.mu <= 1e-8)


def test_global_optimality_two_dimensions():
    rng = np.random.default_rng(1)
    for _ in range(20):
        Q = random_psd(rng, 2)
        b = rng.normal(size=2)
        gamma = rng.uniform(0.1, 10)
        sol = solve_ball_qp(QuadraticSubproblem(Q, b, gamma))
        best, _ = circle_oracle(Q, b, gamma, n=200_000)
        assert sol.objective >= best - 1e-6 * (1 + abs(best))


def test_scaling_equivariance():
    rng = np.random.default_rng(2)
    for _ in range(50):
        m = int(rng.integers(1, 5))
        Q, b = random_psd(rng, m), rng.normal(size=m)
        c = rng.uniform(0.01, 100)
        u1 = solve_ball_qp(QuadraticSubproblem(Q, b, 1.5)).u_star
        u2 = solve_ball_qp(QuadraticSubproblem(c * Q, c * b, 1.5)).u_star
        np.testing.assert_allclose(u1, u2, atol=1e-8)


def test_symmetrization_on_construction():
    Q = np.array([[2.0, 1.0 + 1e-12], [1.0, 2.0]])
    p = QuadraticSubproblem(Q, np.zeros(2), 1.0)
    np.testing.assert_array_equal(p.Q, p.Q.T)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 4),
    st.integers(0, 2**32 - 1),
    st.floats(0.1, 10.0),
)
def test_solution_beats_random_feasible_points(m, seed, gamma):
    rng = np.random.default_rng(seed)
    Q = random_psd(rng, m, int(rng.integers(1, m + 1)))
    b = rng.normal(size=m) * rng.choice([0.0, 1.0])
    p = QuadraticSubproblem(Q, b, gamma)
    sol = solve_ball_qp(p)
    U = rng.normal(size=(500, m))
    U *= gamma * rng.uniform(0, 1, size=(500, 1)) ** (1 / m) / np.linalg.norm(U, axis=1, keepdims=True)
    vals = np.einsum("ki,ij,kj->k", U, Q, U) - 2 * U @ b
    assert sol.objective >= vals.max() - 1e-9 * (1 + abs(vals.max()))
