"""
Ridge smoothers for one factor of a crossed design.

Applying the smoother for factor A to a response r gives, per row level i,
the weighted and shrunken mean

    coef[i] = sum_j W_ij r_ij / (W_i. + 1/sigma2)

scattered back to the observations. Each application is two segmented
reductions over the design's index arrays, so it costs O(N).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from ..data.design import CrossedDesign
from ..errors import DesignError


class Factor(str, Enum):
    """The two crossed factors: A indexes rows, B indexes columns."""

    A = "A"
    B = "B"


@dataclass(frozen=True)
class FactorWeights:
    """Per-observation weights and their per-level sums for both factors."""

    w: np.ndarray
    row_weight_sums: np.ndarray
    col_weight_sums: np.ndarray

    @classmethod
    def from_weights(cls, design: CrossedDesign, w: np.ndarray) -> "FactorWeights":
        """
        Build weights and their sums for a design.

        Args:
            design: The crossed design the weights belong to
            w: Positive weight per observation

        Returns:
            FactorWeights with W_i. and W_.j filled in
        """
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (design.n_obs,):
            raise DesignError(f"Expected {design.n_obs} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise DesignError("Weights must be finite and strictly positive")
        return cls(
            w=w,
            row_weight_sums=np.bincount(design.row_of, weights=w, minlength=design.n_rows),
            col_weight_sums=np.bincount(design.col_of, weights=w, minlength=design.n_cols),
        )

    def sums(self, factor: Factor) -> np.ndarray:
        return self.row_weight_sums if factor is Factor.A else self.col_weight_sums


def factor_index(design: CrossedDesign, factor: Factor) -> Tuple[np.ndarray, int]:
    """Level index per observation and number of levels for a factor."""
    if factor is Factor.A:
        return design.row_of, design.n_rows
    return design.col_of, design.n_cols


def group_sums(index: np.ndarray, values: np.ndarray, n_levels: int) -> np.ndarray:
    """
    Sum values within levels; the transpose of the incidence matrix applied to values.

    Args:
        index: Level index per observation
        values: Length-N vector or N x k matrix
        n_levels: Number of levels

    Returns:
        Length n_levels vector or n_levels x k matrix of sums
    """
    if values.ndim == 1:
        return np.bincount(index, weights=values, minlength=n_levels)
    sums = np.empty((n_levels, values.shape[1]))
    for k in range(values.shape[1]):
        sums[:, k] = np.bincount(index, weights=values[:, k], minlength=n_levels)
    return sums


def check_sigma2(sigma2: float) -> float:
    """Reject non-positive variances; ``inf`` means no shrinkage."""
    sigma2 = float(sigma2)
    if not sigma2 > 0.0:
        raise ValueError(f"Variance component must be positive, got {sigma2}")
    return sigma2


def _denominators(weights: FactorWeights, factor: Factor, sigma2: float) -> np.ndarray:
    return weights.sums(factor) + 1.0 / check_sigma2(sigma2)


def _weighted(weights: FactorWeights, r: np.ndarray) -> np.ndarray:
    return weights.w * r if r.ndim == 1 else weights.w[:, None] * r


def apply_group_smoother(
    design: CrossedDesign,
    factor: Factor,
    weights: FactorWeights,
    sigma2: float,
    r: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weighted shrunken within-group means of r for one factor.

    Args:
        design: Crossed design
        factor: Factor.A (rows) or Factor.B (columns)
        weights: Observation weights
        sigma2: Variance component of the factor (``inf`` disables shrinkage)
        r: Length-N response, or N x k for k responses at once

    Returns:
        Tuple of (per-level coefficients, fitted values per observation)

    Examples:
        One group, r = (1, 3), w = (1, 1), sigma2 = 0.5 gives coef (1 + 3)/(2 + 2) = 1.
    """
    r = np.asarray(r, dtype=np.float64)
    index, n_levels = factor_index(design, factor)
    denom = _denominators(weights, factor, sigma2)
    sums = group_sums(index, _weighted(weights, r), n_levels)
    coef = sums / denom if r.ndim == 1 else sums / denom[:, None]
    return coef, coef[index]


def apply_centered_smoother(
    design: CrossedDesign,
    factor: Factor,
    weights: FactorWeights,
    sigma2: float,
    r: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Group smoother constrained so the coefficients sum to zero.

    This is the exact minimizer of the ridge problem under sum(coef) == 0:
    coefficient i is shifted by c / d_i, where d_i is its denominator and c
    is chosen to cancel the sum.
    """
    r = np.asarray(r, dtype=np.float64)
    index, _ = factor_index(design, factor)
    coef, _ = apply_group_smoother(design, factor, weights, sigma2, r)
    inv_denom = 1.0 / _denominators(weights, factor, sigma2)
    shift = coef.sum(axis=0) / inv_denom.sum()
    if r.ndim == 1:
        coef = coef - inv_denom * shift
    else:
        coef = coef - np.outer(inv_denom, shift)
    return coef, coef[index]


def symmetric_weighted_residualizer(
    design: CrossedDesign,
    factor: Factor,
    weights: FactorWeights,
    sigma2: float,
    r: np.ndarray,
) -> np.ndarray:
    """W (I - S_F) r. The N x N operator is symmetric but never formed."""
    r = np.asarray(r, dtype=np.float64)
    _, fitted = apply_group_smoother(design, factor, weights, sigma2, r)
    return _weighted(weights, r - fitted)
