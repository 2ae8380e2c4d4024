import numpy as np
import pytest

from qfa.errors import ValidationError
from qfa.splines import build_spline_basis, interior_knot_count


def naive_cox_de_boor(x, k, i, t):
    """Textbook recursive B-spline evaluation, used as an oracle."""
    if k == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        if x == t[-1] and t[i] < t[i + 1] == t[-1]:
            return 1.0
        return 0.0
    c1 = 0.0
    if t[i + k] > t[i]:
        c1 = (x - t[i]) / (t[i + k] - t[i]) * naive_cox_de_boor(x, k - 1, i, t)
    c2 = 0.0
    if t[i + k + 1] > t[i + 1]:
        c2 = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * naive_cox_de_boor(
            x, k - 1, i + 1, t
        )
    return c1 + c2


class TestBasisConstruction:
    def test_partition_of_unity_81_levels(self):
        levels = np.linspace(0.10, 0.90, 81)
        basis = build_spline_basis(levels)
        np.testing.assert_allclose(basis.phi.sum(axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("L", [4, 5, 9, 33, 81])
    def test_partition_of_unity_various_sizes(self, L):
        basis = build_spline_basis(np.linspace(0.05, 0.95, L))
        np.testing.assert_allclose(basis.phi.sum(axis=1), 1.0, atol=1e-12)

    def test_small_grids_interpolate(self):
        # K equals L below the size cutoff, and the collocation matrix
        # must be invertible so any level profile is representable
        for L in (4, 7, 20, 50):
            basis = build_spline_basis(np.linspace(0.1, 0.9, L))
            assert basis.K == L
            assert np.linalg.matrix_rank(basis.phi) == L

    def test_large_grid_knot_rule(self):
        basis = build_spline_basis(np.linspace(0.1, 0.9, 81))
        assert basis.K == interior_knot_count(81) + 4
        assert basis.K <= 81
        assert np.linalg.matrix_rank(basis.phi) == basis.K

    def test_max_knots_requests_full_basis(self):
        basis = build_spline_basis(np.linspace(0.1, 0.9, 81), max_knots=81)
        assert basis.K == 81

    def test_linear_functions_have_zero_curvature(self):
        levels = np.linspace(0.1, 0.9, 81)
        basis = build_spline_basis(levels)
        line = 1.7 * levels - 0.4
        coef, *_ = np.linalg.lstsq(basis.phi, line, rcond=None)
        np.testing.assert_allclose(basis.phi @ coef, line, atol=1e-9)
        np.testing.assert_allclose(basis.phi_dd @ coef, 0.0, atol=1e-8)

    def test_matches_recursive_oracle(self):
        levels = np.linspace(0.1, 0.9, 17)
        basis = build_spline_basis(levels)
        for li, x in enumerate(levels):
            for k in range(basis.K):
                expected = naive_cox_de_boor(x, 3, k, basis.knots)
                assert basis.phi[li, k] == pytest.approx(expected, abs=1e-12)

    def test_second_derivative_matches_scipy(self):
        from scipy.interpolate import BSpline

        levels = np.linspace(0.1, 0.9, 23)
        basis = build_spline_basis(levels)
        for k in range(basis.K):
            c = np.zeros(basis.K)
            c[k] = 1.0
            ref = BSpline(basis.knots, c, 3, extrapolate=False).derivative(2)(levels)
            ok = ~np.isnan(ref)
            np.testing.assert_allclose(basis.phi_dd[ok, k], ref[ok], atol=1e-10)

    def test_too_few_levels(self):
        with pytest.raises(ValidationError):
            build_spline_basis([0.2, 0.5, 0.8])

    def test_non_monotone_levels(self):
        with pytest.raises(ValidationError):
            build_spline_basis([0.1, 0.5, 0.3, 0.9])

    def test_levels_outside_unit_interval(self):
        with pytest.raises(ValidationError):
            build_spline_basis([0.0, 0.3, 0.6, 0.9])
