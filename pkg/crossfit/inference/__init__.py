"""Covariance estimation for the fixed effects."""

from .covariance import (
    CovReport,
    cov_glmm_of_lr,
    covariance_ratios,
    naivete_and_inefficiency,
    sandwich_cov_one_factor,
    sandwich_cov_two_factor,
    standard_errors,
)

__all__ = [
    "CovReport",
    "sandwich_cov_two_factor",
    "sandwich_cov_one_factor",
    "cov_glmm_of_lr",
    "covariance_ratios",
    "naivete_and_inefficiency",
    "standard_errors",
]
