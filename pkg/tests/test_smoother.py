"""
Tests for the one-factor ridge smoothers and the weighted residualizer.
"""

import time

import numpy as np
import pytest

from crossfit.data import CrossedDesign
from crossfit.errors import DesignError
from crossfit.oracle.dense import dense_smoother
from crossfit.simulation import SimConfig, simulate
from crossfit.solver import (
    Factor,
    FactorWeights,
    apply_centered_smoother,
    apply_group_smoother,
    symmetric_weighted_residualizer,
)


@pytest.fixture
def one_group():
    """A single row level observed in two columns."""
    design = CrossedDesign([0, 0], [0, 1], [1, 0], [1.0, 1.0], 1, 2)
    return design, FactorWeights.from_weights(design, np.ones(2))


# =============================================================================
# FactorWeights
# =============================================================================


class TestFactorWeights:
    """Weight validation and per-level sums."""

    def test_sums(self, small_design, rng):
        w = rng.uniform(0.1, 0.2, small_design.n_obs)
        weights = FactorWeights.from_weights(small_design, w)
        assert np.isclose(weights.row_weight_sums.sum(), w.sum())
        assert np.allclose(weights.sums(Factor.A), np.bincount(small_design.row_of, weights=w))
        assert np.allclose(weights.sums(Factor.B), np.bincount(small_design.col_of, weights=w))

    @pytest.mark.parametrize("bad", [0.0, -0.1, np.nan, np.inf])
    def test_rejects_non_positive_or_non_finite(self, small_design, bad):
        w = np.full(small_design.n_obs, 0.2)
        w[3] = bad
        with pytest.raises(DesignError):
            FactorWeights.from_weights(small_design, w)

    def test_rejects_wrong_length(self, small_design):
        with pytest.raises(DesignError):
            FactorWeights.from_weights(small_design, np.ones(small_design.n_obs + 1))


# =============================================================================
# apply_group_smoother
# =============================================================================


class TestApplyGroupSmoother:
    """Weighted shrunken within-group means."""

    def test_unshrunken_mean(self, one_group):
        design, weights = one_group
        coef, fitted = apply_group_smoother(design, Factor.A, weights, np.inf, np.array([1.0, 3.0]))
        assert coef.tolist() == [2.0]
        assert fitted.tolist() == [2.0, 2.0]

    def test_shrunken_mean(self, one_group):
        design, weights = one_group
        coef, _ = apply_group_smoother(design, Factor.A, weights, 0.5, np.array([1.0, 3.0]))
        assert coef[0] == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("sigma2", [0.0, -1.0, np.nan])
    def test_rejects_non_positive_variance(self, one_group, sigma2):
        design, weights = one_group
        with pytest.raises(ValueError):
            apply_group_smoother(design, Factor.A, weights, sigma2, np.array([1.0, 3.0]))

    @pytest.mark.parametrize("factor", [Factor.A, Factor.B])
    def test_matches_dense_smoother(self, rng, design_factory, weights_factory, factor):
        design = design_factory(rng, 5, 4, 15)
        weights = weights_factory(rng, design)
        r = rng.standard_normal(design.n_obs)
        _, fitted = apply_group_smoother(design, factor, weights, 0.7, r)
        expected = dense_smoother(design, factor, weights, 0.7, r)
        np.testing.assert_allclose(fitted, expected, rtol=1e-12, atol=1e-14)

    def test_normal_equations_hold(self, rng, design_factory, weights_factory):
        design = design_factory(rng, 8, 6, 30)
        weights = weights_factory(rng, design)
        r = rng.standard_normal(design.n_obs)
        sigma2 = 1.3
        coef, fitted = apply_group_smoother(design, Factor.A, weights, sigma2, r)
        gradient = np.bincount(design.row_of, weights=weights.w * (r - fitted), minlength=design.n_rows) - coef / sigma2
        assert np.max(np.abs(gradient)) < 1e-12

    def test_contraction_in_weighted_norm(self, rng, design_factory, weights_factory):
        design = design_factory(rng, 8, 6, 30)
        weights = weights_factory(rng, design)
        for _ in range(10):
            r = rng.standard_normal(design.n_obs)
            _, fitted = apply_group_smoother(design, Factor.B, weights, 2.0, r)
            assert np.dot(weights.w, fitted**2) <= np.dot(weights.w, r**2) + 1e-14

    def test_matrix_input_is_columnwise(self, rng, design_factory, weights_factory):
        design = design_factory(rng, 6, 5, 20)
        weights = weights_factory(rng, design)
        r = rng.standard_normal((design.n_obs, 3))
        coef, fitted = apply_group_smoother(design, Factor.A, weights, 0.9, r)
        for k in range(3):
            coef_k, fitted_k = apply_group_smoother(design, Factor.A, weights, 0.9, r[:, k])
            np.testing.assert_allclose(coef[:, k], coef_k, rtol=1e-14)
            np.testing.assert_allclose(fitted[:, k], fitted_k, rtol=1e-14)


# =============================================================================
# apply_centered_smoother
# =============================================================================


class TestApplyCenteredSmoother:
    """Sum-zero constrained smoother."""

    def test_coefficients_sum_to_zero(self, rng, design_factory, weights_factory):
        design = design_factory(rng, 7, 5, 25)
        weights = weights_factory(rng, design)
        r = rng.standard_normal(design.n_obs) + 3.0
        for factor in (Factor.A, Factor.B):
            coef, _ = apply_centered_smoother(design, factor, weights, 1.5, r)
            assert abs(coef.sum()) < 1e-12

    def test_equal_groups_keep_their_contrast(self):
        design = CrossedDesign([0, 0, 1, 1], [0, 1, 0, 1], [1, 0, 0, 1], [1.0] * 4, 2, 2)
        weights = FactorWeights.from_weights(design, np.full(4, 0.25))
        r = np.array([1.0, 1.0, 3.0, 3.0])
        plain, _ = apply_group_smoother(design, Factor.A, weights, 1.0, r)
        centered, _ = apply_centered_smoother(design, Factor.A, weights, 1.0, r)
        assert centered.sum() == pytest.approx(0.0, abs=1e-15)
        assert centered[1] - centered[0] == pytest.approx(plain[1] - plain[0], rel=1e-14)

    def test_constrained_minimizer(self, rng, design_factory, weights_factory):
        """Stationary for the ridge objective up to a common multiplier."""
        design = design_factory(rng, 6, 4, 18)
        weights = weights_factory(rng, design)
        r = rng.standard_normal(design.n_obs)
        sigma2 = 0.8
        coef, fitted = apply_centered_smoother(design, Factor.A, weights, sigma2, r)
        gradient = np.bincount(design.row_of, weights=weights.w * (r - fitted)) - coef / sigma2
        assert np.ptp(gradient) < 1e-12

    def test_matrix_input_is_columnwise(self, rng, design_factory, weights_factory):
        design = design_factory(rng, 6, 5, 20)
        weights = weights_factory(rng, design)
        r = rng.standard_normal((design.n_obs, 2))
        coef, _ = apply_centered_smoother(design, Factor.B, weights, 0.4, r)
        for k in range(2):
            coef_k, _ = apply_centered_smoother(design, Factor.B, weights, 0.4, r[:, k])
            np.testing.assert_allclose(coef[:, k], coef_k, rtol=1e-13, atol=1e-15)


# =============================================================================
# symmetric_weighted_residualizer
# =============================================================================


class TestSymmetricWeightedResidualizer:
    """W (I - S_F) applied without forming it."""

    def test_single_group_without_shrinkage(self, one_group):
        design, weights = one_group
        out = symmetric_weighted_residualizer(design, Factor.A, weights, np.inf, np.array([1.0, 3.0]))
        assert out.tolist() == [-1.0, 1.0]

    def test_zero_maps_to_zero(self, small_design, rng, weights_factory):
        weights = weights_factory(rng, small_design)
        out = symmetric_weighted_residualizer(small_design, Factor.A, weights, 1.0, np.zeros(small_design.n_obs))
        assert np.all(out == 0.0)

    def test_operator_is_symmetric(self, rng, design_factory, weights_factory):
        design = design_factory(rng, 8, 6, 30)
        weights = weights_factory(rng, design)
        for factor in (Factor.A, Factor.B):
            for _ in range(20):
                u = rng.standard_normal(design.n_obs)
                v = rng.standard_normal(design.n_obs)
                left = np.dot(v, symmetric_weighted_residualizer(design, factor, weights, 0.6, u))
                right = np.dot(u, symmetric_weighted_residualizer(design, factor, weights, 0.6, v))
                assert left == pytest.approx(right, rel=1e-10, abs=1e-12)


# =============================================================================
# Cost (slow)
# =============================================================================


def best_smoother_seconds(design, repeats=7):
    """Fastest of several warm applications of the row smoother."""
    weights = FactorWeights.from_weights(design, np.full(design.n_obs, 0.2))
    r = np.random.default_rng(0).standard_normal(design.n_obs)
    apply_group_smoother(design, Factor.A, weights, 0.64, r)
    timings = []
    for _ in range(repeats):
        started = time.perf_counter()
        apply_group_smoother(design, Factor.A, weights, 0.64, r)
        timings.append(time.perf_counter() - started)
    return min(timings)


@pytest.mark.slow
def test_smoother_cost_grows_linearly():
    small = simulate(SimConfig(s=1e5, beta_true=(-2.0,), seed=0)).design
    large = simulate(SimConfig(s=1e6, beta_true=(-2.0,), seed=0)).design
    ratio = best_smoother_seconds(large) / best_smoother_seconds(small)
    # normalized to an exact tenfold difference in N
    scaled = ratio * small.n_obs / large.n_obs * 10.0
    assert 6.0 <= scaled <= 14.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
