"""Tests for the linear Gaussian closed forms and simulation."""

import numpy as np
import pytest

from privchange import (
    average_xsq_experiment,
    best_privacy_full_linear,
    best_privacy_limited_linear,
    gaussian_kl_equal_cov,
    is_schur,
    make_linear_system,
    simulate_linear,
    solve_lyapunov,
    tradeoff_full_linear,
    tradeoff_limited_linear,
    value_full_linear,
    value_limited_linear,
)
from privchange.errors import LambdaNonpositive, NotSchur, NotSPD
from privchange.linear import (
    _l_and_e,
    b_tilde,
    finite_difference_gradient,
    full_info_rate_linear,
    limited_info_rate_linear,
    post_change_offset_full,
    post_change_offset_limited,
)


@pytest.fixture(scope="module")
def example_system(example_linear_params):
    return make_linear_system(**example_linear_params)


def random_system(rng, n=3, m=2, k=1):
    """Random stable system: draw the closed loop first, then back out A."""
    A_cl = rng.normal(size=(n, n))
    A_cl *= 0.7 / max(np.abs(np.linalg.eigvals(A_cl)).max(), 1e-9)
    B = rng.normal(size=(n, m))
    K = rng.normal(size=(m, n)) * 0.3
    A = A_cl - B @ K
    F = rng.normal(size=(n, k))
    theta = rng.normal(size=k)
    Mq = rng.normal(size=(n, n))
    Q = Mq @ Mq.T + 0.5 * np.eye(n)
    Mr = rng.normal(size=(m, m))
    R = Mr @ Mr.T + 0.5 * np.eye(m)
    return make_linear_system(A, B, F, theta, Q, K, R, nu=50)


class TestSchur:
    def test_contraction(self):
        assert is_schur(0.5 * np.eye(3))

    def test_identity_is_not(self):
        assert not is_schur(np.eye(2))

    def test_example_gain_stabilizes(self, example_system):
        assert is_schur(example_system.closed_loop)


class TestLyapunov:
    def test_zero_dynamics(self):
        W = np.array([[2.0, 0.5], [0.5, 1.0]])
        np.testing.assert_allclose(solve_lyapunov(np.zeros((2, 2)), W), W)

    def test_scalar_geometric_series(self):
        sigma = solve_lyapunov(np.array([[0.5]]), np.array([[1.0]]))
        assert sigma[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-12)

    def test_fixed_point_oracle(self, example_system):
        A_cl = example_system.closed_loop
        sigma = solve_lyapunov(A_cl, example_system.Q)
        it = example_system.Q.copy()
        for _ in range(10_000):
            it = A_cl @ it @ A_cl.T + example_system.Q
        np.testing.assert_allclose(sigma, it, atol=1e-9)

    def test_rejects_non_schur(self):
        with pytest.raises(NotSchur):
            solve_lyapunov(np.eye(2), np.eye(2))


class TestGaussianKl:
    def test_equal_means(self):
        assert gaussian_kl_equal_cov([1.0, 2.0], [1.0, 2.0], np.eye(2)) == 0.0

    def test_three_four_five(self):
        assert gaussian_kl_equal_cov([3.0, 4.0], [0.0, 0.0], np.eye(2)) == pytest.approx(
            12.5, abs=1e-12
        )

    def test_monte_carlo_llr_average(self):
        rng = np.random.default_rng(8)
        Q = np.array([[1.0, 0.2], [0.2, 0.8]])
        m1 = np.array([0.4, -0.3])
        exact = gaussian_kl_equal_cov(m1, np.zeros(2), Q)
        Qi = np.linalg.inv(Q)
        xs = rng.multivariate_normal(m1, Q, size=1_000_000)
        llr = xs @ Qi @ m1 - 0.5 * m1 @ Qi @ m1
        assert abs(float(llr.mean()) - exact) / exact < 0.01

    def test_rejects_indefinite(self):
        with pytest.raises(NotSPD):
            gaussian_kl_equal_cov([1.0], [0.0], np.array([[-1.0]]))


class TestBestPrivacyLinear:
    def test_zero_change(self, example_linear_params):
        params = dict(example_linear_params, theta=[0.0])
        sys_ = make_linear_system(**params)
        assert best_privacy_full_linear(sys_) == 0.0

    def test_example_value(self, example_system):
        assert abs(best_privacy_full_linear(example_system) - 0.37) < 1e-12

    def test_doubling_noise_halves_rate(self, example_linear_params):
        base = make_linear_system(**example_linear_params)
        params = dict(example_linear_params, Q=2.0 * np.eye(2))
        assert best_privacy_full_linear(make_linear_system(**params)) == pytest.approx(
            best_privacy_full_linear(base) / 2.0, abs=1e-14
        )

    def test_change_in_input_range_cancels(self):
        rng = np.random.default_rng(9)
        sys_ = random_system(rng, n=3, m=2)
        # Re-aim the change into the input range.
        coeff = rng.normal(size=2)
        F = (sys_.B @ coeff)[:, None]
        sys2 = make_linear_system(
            sys_.A, sys_.B, F, [1.0], sys_.Q, sys_.K, sys_.R, sys_.nu
        )
        rate, _ = best_privacy_limited_linear(sys2)
        assert rate < 1e-18

    def test_grid_oracle_on_example(self, example_system):
        rate, _ = best_privacy_limited_linear(example_system)
        grid = np.arange(-5.0, 5.0, 1e-3)
        shifts = example_system.change[None, :] + np.outer(grid, example_system.B[:, 0])
        vals = 0.5 * np.einsum("gi,gi->g", shifts, shifts)
        assert abs(rate - vals.min()) < 1e-6

    def test_cancellation_normal_equations(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            sys_ = random_system(rng)
            rate, dg = best_privacy_limited_linear(sys_)
            resid = sys_.B.T @ np.linalg.solve(sys_.Q, sys_.change + sys_.B @ dg)
            assert np.abs(resid).max() < 1e-10
            assert rate <= best_privacy_full_linear(sys_) + 1e-12


class TestValuesAndTradeoffs:
    def test_baseline_is_trace(self, example_linear_params):
        params = dict(example_linear_params, theta=[0.0])
        sys_ = make_linear_system(**params)
        sigma_full = solve_lyapunov(
            sys_.closed_loop, sys_.Q + sys_.B @ sys_.R @ sys_.B.T
        )
        assert value_full_linear(sys_, 0.5, 1.0, [0.0], [0.0]) == pytest.approx(
            -float(np.trace(sigma_full)), abs=1e-12
        )
        sigma_lim = solve_lyapunov(sys_.closed_loop, sys_.Q)
        assert value_limited_linear(sys_, 0.5, 1.0, [0.0], [0.0]) == pytest.approx(
            -float(np.trace(sigma_lim)), abs=1e-12
        )

    def test_value_matches_simulation_estimate(self, example_linear_params):
        # Reassemble the penalized value from simulated squared-norm moments:
        # V + lam * rate must equal the weighted negative moments.
        params = dict(example_linear_params, nu=150)
        sys_ = make_linear_system(**params)
        rho, lam = 0.5, 1.0
        a0, a1 = np.array([0.1]), np.array([-0.5])
        v = value_full_linear(sys_, rho, lam, a0, a1)
        rate = full_info_rate_linear(sys_, a0, a1)
        mean, _, _ = average_xsq_experiment(
            sys_, a0, a1, horizon=360, runs=3000, seed=12, stochastic_policy=True
        )
        pre = float(mean[: sys_.nu - 1].mean())
        post = float(mean[sys_.nu + 60 :].mean())
        simulated = -(1 - rho) * pre - rho * post
        assert abs((v + lam * rate) - simulated) / abs(simulated) < 0.05

    def test_value_decreases_in_lambda(self, example_system):
        a0, a1 = np.array([0.1]), np.array([-0.4])
        v1 = value_full_linear(example_system, 0.5, 1.0, a0, a1)
        v2 = value_full_linear(example_system, 0.5, 2.0, a0, a1)
        assert v2 < v1

    def test_rate_formula_consistency(self, example_system):
        a0, a1 = np.array([0.2]), np.array([-0.3])
        da = a1 - a0
        composed = best_privacy_full_linear(example_system) + gaussian_kl_equal_cov(
            da, np.zeros(1), example_system.R
        )
        assert abs(full_info_rate_linear(example_system, a0, a1) - composed) < 1e-12

    def test_full_endpoint_simplifications(self, example_system):
        sol0 = tradeoff_full_linear(example_system, 0.0, 1.0)
        np.testing.assert_allclose(sol0.alpha0, 0.0, atol=1e-10)
        np.testing.assert_allclose(sol0.alpha1, 0.0, atol=1e-10)
        sol1 = tradeoff_full_linear(example_system, 1.0, 1.0)
        _, E, _ = _l_and_e(example_system)
        B = example_system.B
        expected = -np.linalg.solve(B.T @ E @ B, B.T @ E @ example_system.change)
        np.testing.assert_allclose(sol1.alpha0, expected, atol=1e-10)
        np.testing.assert_allclose(sol1.alpha1, expected, atol=1e-10)

    def test_limited_endpoint_simplifications(self, example_system):
        _, E, _ = _l_and_e(example_system)
        Qinv = np.linalg.inv(example_system.Q)
        sol0 = tradeoff_limited_linear(example_system, 0.0, 1.0)
        np.testing.assert_allclose(sol0.alpha0, 0.0, atol=1e-10)
        np.testing.assert_allclose(
            sol0.alpha1, -b_tilde(example_system, Qinv) @ example_system.change,
            atol=1e-10,
        )
        sol1 = tradeoff_limited_linear(example_system, 1.0, 1.0)
        bt_e = b_tilde(example_system, E)
        np.testing.assert_allclose(
            sol1.alpha1, -bt_e @ example_system.change, atol=1e-10
        )
        expected0 = (
            b_tilde(example_system, Qinv)
            @ (np.eye(2) - example_system.B @ bt_e)
            @ example_system.change
        )
        np.testing.assert_allclose(sol1.alpha0, expected0, atol=1e-10)

    def test_post_only_offsets_are_stationary(self, example_system):
        for lam in (0.5, 1.0, 4.0):
            a1 = post_change_offset_full(example_system, lam)
            g = finite_difference_gradient(
                lambda a: value_full_linear(example_system, 1.0, lam, np.zeros(1), a),
                a1,
            )
            assert np.abs(g).max() < 1e-6
            a1l = post_change_offset_limited(example_system, lam)
            gl = finite_difference_gradient(
                lambda a: value_limited_linear(example_system, 1.0, lam, np.zeros(1), a),
                a1l,
            )
            assert np.abs(gl).max() < 1e-6

    def test_gradients_vanish_on_random_systems(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            sys_ = random_system(rng)
            rho = float(rng.uniform(0.05, 0.95))
            lam = float(rng.choice([0.1, 1.0, 10.0]))
            sol = tradeoff_full_linear(sys_, rho, lam)
            g0 = finite_difference_gradient(
                lambda a: value_full_linear(sys_, rho, lam, a, sol.alpha1), sol.alpha0
            )
            g1 = finite_difference_gradient(
                lambda a: value_full_linear(sys_, rho, lam, sol.alpha0, a), sol.alpha1
            )
            assert max(np.abs(g0).max(), np.abs(g1).max()) < 1e-5
            soll = tradeoff_limited_linear(sys_, rho, lam)
            h0 = finite_difference_gradient(
                lambda a: value_limited_linear(sys_, rho, lam, a, soll.alpha1),
                soll.alpha0,
            )
            h1 = finite_difference_gradient(
                lambda a: value_limited_linear(sys_, rho, lam, soll.alpha0, a),
                soll.alpha1,
            )
            assert max(np.abs(h0).max(), np.abs(h1).max()) < 1e-5

    def test_lambda_zero_rejected(self, example_system):
        with pytest.raises(LambdaNonpositive):
            tradeoff_full_linear(example_system, 0.5, 0.0)
        with pytest.raises(LambdaNonpositive):
            tradeoff_limited_linear(example_system, 0.5, 0.0)

    def test_privacy_term_at_cancellation_offset(self, example_system):
        rate_best, dg = best_privacy_limited_linear(example_system)
        assert limited_info_rate_linear(
            example_system, np.zeros(1), dg
        ) == pytest.approx(rate_best, abs=1e-14)


class TestSimulateLinear:
    def test_bit_identical_for_fixed_seed(self, example_system):
        a = simulate_linear(example_system, [0.0], [0.0], horizon=500, seed=3)
        b = simulate_linear(example_system, [0.0], [0.0], horizon=500, seed=3)
        assert np.array_equal(a.states, b.states)

    def test_no_change_matches_trace(self, example_linear_params):
        params = dict(example_linear_params, theta=[0.0], nu=10_000)
        sys_ = make_linear_system(**params)
        sigma = solve_lyapunov(sys_.closed_loop, sys_.Q)
        mean, lo, hi = average_xsq_experiment(
            sys_, [0.0], [0.0], horizon=200, runs=2000, seed=4
        )
        target = float(np.trace(sigma))
        grand = float(mean.mean())
        stderr = float((hi - mean).mean()) / 1.96 / np.sqrt(mean.shape[0])
        assert abs(grand - target) < 3 * max(stderr, 1e-3)

    def test_post_change_moment(self, example_system):
        _, _, Linv = _l_and_e(example_system)
        alpha1 = np.array([0.3])
        m_post = Linv @ (example_system.B @ alpha1 + example_system.change)
        sigma = solve_lyapunov(example_system.closed_loop, example_system.Q)
        target = float(m_post @ m_post + np.trace(sigma))
        mean, lo, hi = average_xsq_experiment(
            example_system, [0.0], alpha1, horizon=400, runs=3000, seed=5
        )
        window = slice(example_system.nu + 60, 400)
        grand = float(mean[window].mean())
        assert abs(grand - target) / target < 0.05
