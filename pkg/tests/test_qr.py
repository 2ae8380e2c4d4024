import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfa.errors import SolverError, ValidationError
from qfa.qr import (
    RegressionData,
    check_loss,
    solve_qr,
    solve_qr_levels,
    solve_qr_oracle,
)


def trig_design(n, omega):
    t = np.arange(1, n + 1)
    return np.column_stack([np.ones(n), np.cos(omega * t), np.sin(omega * t)])


class TestCheckLoss:
    def test_zero_residuals(self):
        assert check_loss(np.zeros(7), 0.3) == 0.0

    def test_symmetry_at_median(self):
        assert check_loss([1.0, -1.0], 0.5) == pytest.approx(1.0)

    def test_asymmetric_weights(self):
        # 0.1*2 + 0.9*3
        assert check_loss([2.0, -3.0], 0.1) == pytest.approx(2.9)

    def test_alpha_domain(self):
        with pytest.raises(ValidationError):
            check_loss([1.0], 0.0)
        with pytest.raises(ValidationError):
            check_loss([1.0], 1.0)

    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20),
        st.floats(0.01, 0.99),
        st.floats(0.01, 100.0),
    )
    def test_positive_homogeneity(self, resid, alpha, k):
        r = np.asarray(resid)
        assert check_loss(k * r, alpha) == pytest.approx(
            k * check_loss(r, alpha), rel=1e-12, abs=1e-9
        )

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(0.01, 0.99))
    def test_nonnegative(self, resid, alpha):
        assert check_loss(resid, alpha) >= 0.0


class TestSolveQr:
    def test_intercept_only_is_sample_median(self):
        data = RegressionData(np.ones((5, 1)), np.array([1.0, 2, 3, 4, 5]))
        sol = solve_qr(data, 0.5)
        assert sol.beta[0] == pytest.approx(3.0, abs=1e-6)
        assert sol.objective == pytest.approx(3.0, abs=1e-7)

    def test_constant_series_perfect_fit(self):
        n = 64
        X = trig_design(n, 2 * np.pi * 5 / n)
        data = RegressionData(X, np.full(n, 2.5))
        sol = solve_qr(data, 0.3)
        assert sol.beta == pytest.approx([2.5, 0.0, 0.0], abs=1e-7)
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            X = np.column_stack([np.ones(8), rng.normal(size=(8, 2))])
            data = RegressionData(X, rng.normal(size=8))
            alpha = float(rng.uniform(0.05, 0.95))
            ip = solve_qr(data, alpha, tol=1e-10, max_iter=200)
            oracle = solve_qr_oracle(data, alpha)
            assert abs(ip.objective - oracle.objective) <= 1e-8 * (1 + ip.objective)

    def test_subgradient_balance(self):
        rng = np.random.default_rng(3)
        n = 97
        X = trig_design(n, 2 * np.pi * 11 / n)
        y = rng.normal(size=n)
        for alpha in (0.1, 0.37, 0.5, 0.9):
            sol = solve_qr(RegressionData(X, y), alpha, tol=1e-9, max_iter=100)
            r = y - X @ sol.beta
            thresh = 1e-7 * (1 + np.abs(y).max())
            assert np.sum(r < -thresh) <= n * alpha + 1e-9
            assert np.sum(r > thresh) <= n * (1 - alpha) + 1e-9

    def test_shift_equivariance(self):
        rng = np.random.default_rng(4)
        n = 48
        X = trig_design(n, 2 * np.pi * 3 / n)
        y = rng.normal(size=n)
        delta = np.array([0.7, -0.4, 1.1])
        a = solve_qr(RegressionData(X, y), 0.25, tol=1e-10, max_iter=200)
        b = solve_qr(RegressionData(X, y + X @ delta), 0.25, tol=1e-10, max_iter=200)
        assert b.beta == pytest.approx(a.beta + delta, abs=1e-6)
        assert b.objective == pytest.approx(a.objective, rel=1e-6, abs=1e-8)

    def test_converged_gap_is_small(self):
        rng = np.random.default_rng(5)
        X = np.column_stack([np.ones(30), rng.normal(size=30)])
        sol = solve_qr(RegressionData(X, rng.normal(size=30)), 0.7)
        assert sol.duality_gap <= 1e-7 * (1 + abs(sol.objective))

    def test_non_convergence_raises(self):
        rng = np.random.default_rng(6)
        X = np.column_stack([np.ones(40), rng.normal(size=40)])
        data = RegressionData(X, rng.normal(size=40))
        with pytest.raises(SolverError) as exc:
            solve_qr(data, 0.5, tol=1e-14, max_iter=1)
        assert exc.value.gap is not None

    def test_alpha_validation(self):
        data = RegressionData(np.ones((4, 1)), np.arange(4.0))
        with pytest.raises(ValidationError):
            solve_qr(data, 1.2)

    def test_bad_shapes_rejected(self):
        with pytest.raises(ValidationError):
            RegressionData(np.ones((2, 3)), np.ones(2))  # n < p
        with pytest.raises(ValidationError):
            RegressionData(np.ones((4, 1)), np.ones(3))


class TestSolveQrLevels:
    def test_engines_agree(self):
        rng = np.random.default_rng(12)
        n = 80
        X = trig_design(n, 2 * np.pi * 7 / n)
        y = rng.normal(size=n)
        alphas = np.linspace(0.1, 0.9, 17)
        res_nb = solve_qr_levels(X, y, alphas, tol=1e-11, max_iter=200, engine="numba")
        res_np = solve_qr_levels(X, y, alphas, tol=1e-11, max_iter=200, engine="numpy")
        np.testing.assert_allclose(res_nb.objective, res_np.objective, rtol=0, atol=1e-9)
        np.testing.assert_allclose(res_nb.beta, res_np.beta, rtol=0, atol=1e-5)

    def test_batch_matches_individual_solves(self):
        rng = np.random.default_rng(13)
        n = 60
        X = trig_design(n, 2 * np.pi * 9 / n)
        y = rng.normal(size=n)
        alphas = np.array([0.2, 0.5, 0.8])
        batch = solve_qr_levels(X, y, alphas, tol=1e-10, max_iter=200)
        for i, a in enumerate(alphas):
            single = solve_qr(RegressionData(X, y), a, tol=1e-10, max_iter=200)
            assert batch.objective[i] == pytest.approx(single.objective, abs=1e-9)

    def test_level_validation(self):
        with pytest.raises(ValidationError):
            solve_qr_levels(np.ones((4, 1)), np.arange(4.0), [0.5, 1.5])


class TestOracle:
    def test_median_of_three(self):
        data = RegressionData(np.ones((3, 1)), np.array([1.0, 2.0, 3.0]))
        sol = solve_qr_oracle(data, 0.5)
        assert sol.beta[0] == pytest.approx(2.0)

    def test_duplicated_points_quartile(self):
        y = np.array([1.0, 1.0, 2.0, 2.0, 5.0])
        data = RegressionData(np.ones((5, 1)), y)
        sol = solve_qr_oracle(data, 0.25)
        # enumeration: best vertex is one of the observed values
        losses = [check_loss(y - v, 0.25) for v in np.unique(y)]
        assert sol.objective == pytest.approx(min(losses))

    def test_size_guard(self):
        data = RegressionData(np.ones((13, 1)), np.zeros(13))
        with pytest.raises(ValidationError):
            solve_qr_oracle(data, 0.5)
