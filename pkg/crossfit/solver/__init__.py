"""Smoothers, clubbed backfitting, the Schall outer loop and the logistic baseline."""

from .backfit import (
    PwlsProblem,
    PwlsSolution,
    apply_sab,
    club_step_A,
    club_step_B,
    linear_predictor,
    penalized_objective,
    solve_pwls_clubbed,
)
from .logistic import LrFit, expected_score_bias, irls_logistic
from .schall import (
    FitConfig,
    FitResult,
    FitState,
    IterationRecord,
    approx_nu,
    fit,
    refresh_weights,
    update_dispersion,
    update_variances,
    working_response,
)
from .smoother import (
    Factor,
    FactorWeights,
    apply_centered_smoother,
    apply_group_smoother,
    symmetric_weighted_residualizer,
)

__all__ = [
    "Factor",
    "FactorWeights",
    "apply_group_smoother",
    "apply_centered_smoother",
    "symmetric_weighted_residualizer",
    "PwlsProblem",
    "PwlsSolution",
    "club_step_A",
    "club_step_B",
    "solve_pwls_clubbed",
    "apply_sab",
    "linear_predictor",
    "penalized_objective",
    "FitConfig",
    "FitState",
    "FitResult",
    "IterationRecord",
    "working_response",
    "refresh_weights",
    "approx_nu",
    "update_variances",
    "update_dispersion",
    "fit",
    "LrFit",
    "irls_logistic",
    "expected_score_bias",
]
