"""
Sandwich covariances of the fixed effects and the naive-logistic diagnostics.

The GLMM estimate is linear in the working response z,
beta = (X' W_S X)^-1 X' W_S z with W_S = W (I - S_AB), so its covariance is

    (X' W_S X)^-1 X' W_S  Sigma  W_S X (X' W_S X)^-1

where Sigma = W^-1 + sigma2_a Z_A Z_A' + sigma2_b Z_B Z_B' is the covariance
of the working response. Sigma is low rank plus diagonal and W_S X costs p
applications of the two-factor smoother, so the whole computation is O(N).
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from ..data.design import CrossedDesign
from ..errors import NumericalError, SingularSystemError
from ..solver import links
from ..solver.backfit import apply_sab
from ..solver.logistic import LrFit
from ..solver.schall import FitState
from ..solver.smoother import Factor, FactorWeights, group_sums, symmetric_weighted_residualizer

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-8
PSD_TOL = 1e-10
# Covariances need the smoother far past the fit's stopping rule
COV_TOL = 1e-22
COV_MAX_SWEEPS = 10_000


@dataclass(frozen=True)
class CovReport:
    """GLMM and naive covariances of the fixed effects, with their ratios."""

    cov_glmm: np.ndarray
    cov_lr_naive: np.ndarray
    cov_glmm_of_lr: np.ndarray
    naivete: np.ndarray
    inefficiency: np.ndarray
    max_naivete: float
    max_inefficiency: float


def symmetrized(matrix: np.ndarray, label: str) -> np.ndarray:
    """(M + M')/2 after checking M was symmetric to begin with."""
    scale = max(float(np.max(np.abs(matrix), initial=0.0)), np.finfo(float).tiny)
    asymmetry = float(np.max(np.abs(matrix - matrix.T), initial=0.0)) / scale
    if asymmetry > SYMMETRY_TOL:
        raise NumericalError(f"{label} is not symmetric (relative asymmetry {asymmetry:.3g})")
    return 0.5 * (matrix + matrix.T)


def _inverse(matrix: np.ndarray, label: str) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            return linalg.inv(matrix)
        except (linalg.LinAlgError, linalg.LinAlgWarning, ValueError) as e:
            raise SingularSystemError(f"{label} is singular: {e}")


def working_covariance_quadratic(
    design: CrossedDesign,
    m: np.ndarray,
    inv_w: np.ndarray,
    sigma2_a: float,
    sigma2_b: Optional[float],
) -> np.ndarray:
    """
    M' Sigma M for Sigma = diag(inv_w) + sigma2_a Z_A Z_A' + sigma2_b Z_B Z_B'.

    ``sigma2_b=None`` leaves out the column factor.
    """
    quad = m.T @ (inv_w[:, None] * m)
    g_a = group_sums(design.row_of, m, design.n_rows)
    quad += sigma2_a * (g_a.T @ g_a)
    if sigma2_b is not None:
        g_b = group_sums(design.col_of, m, design.n_cols)
        quad += sigma2_b * (g_b.T @ g_b)
    return quad


def _sandwich(
    design: CrossedDesign,
    m: np.ndarray,
    inv_w: np.ndarray,
    sigma2_a: float,
    sigma2_b: Optional[float],
    label: str,
) -> np.ndarray:
    bread = symmetrized(design.x.T @ m, f"{label} bread")
    bread_inv = _inverse(bread, f"{label} bread")
    meat = working_covariance_quadratic(design, m, inv_w, sigma2_a, sigma2_b)
    cov = bread_inv @ meat @ bread_inv
    return symmetrized(cov, f"{label} covariance")


def sandwich_cov_two_factor(
    design: CrossedDesign,
    state: FitState,
    tol: float = COV_TOL,
    max_sweeps: int = COV_MAX_SWEEPS,
    threads: int = 1,
) -> np.ndarray:
    """
    Sandwich covariance of the GLMM fixed effects with both factors.

    Args:
        design: Crossed design the state was fitted on
        state: Converged fit state
        tol: Stopping tolerance for the two-factor smoother
        max_sweeps: Sweep cap for the two-factor smoother
        threads: Worker threads over the p feature columns

    Returns:
        p x p covariance matrix
    """
    weights = FactorWeights.from_weights(design, state.w)
    # With an intercept the sum-zero constrained smoother yields the same
    # linear map from z to beta and converges faster.
    smoothed = apply_sab(
        design,
        weights,
        state.sigma2_a,
        state.sigma2_b,
        design.x,
        tol=tol,
        max_sweeps=max_sweeps,
        centered=design.has_intercept,
        threads=threads,
    )
    m = weights.w[:, None] * (design.x - smoothed)
    return _sandwich(design, m, 1.0 / weights.w, state.sigma2_a, state.sigma2_b, "Two-factor")


def sandwich_cov_one_factor(design: CrossedDesign, state: FitState) -> np.ndarray:
    """Sandwich covariance when only the row factor is modelled."""
    weights = FactorWeights.from_weights(design, state.w)
    m = symmetric_weighted_residualizer(design, Factor.A, weights, state.sigma2_a, design.x)
    return _sandwich(design, m, 1.0 / weights.w, state.sigma2_a, None, "One-factor")


def cov_glmm_of_lr(design: CrossedDesign, state: FitState, lr_fit: LrFit) -> np.ndarray:
    """
    Covariance of the naive logistic estimate when the GLMM holds.

    Bread is the logistic information X' V X at the logistic fit; meat is the
    GLMM working-response covariance evaluated at the same means, with the
    fitted dispersion and variance components.
    """
    var = links.variance(design.x @ lr_fit.beta)
    if np.any(var <= 0.0):
        raise NumericalError("Logistic fitted means reach 0 or 1")
    m = var[:, None] * design.x
    return _sandwich(design, m, state.phi / var, state.sigma2_a, state.sigma2_b, "Naive-under-GLMM")


def _check_psd(matrix: np.ndarray, label: str):
    eigenvalues = linalg.eigvalsh(matrix)
    scale = max(float(np.max(np.abs(eigenvalues), initial=0.0)), np.finfo(float).tiny)
    if eigenvalues[0] < -PSD_TOL * scale:
        raise NumericalError(f"{label} is not positive semidefinite (smallest eigenvalue {eigenvalues[0]:.3g})")


def _max_generalized_eigenvalue(numerator: np.ndarray, denominator: np.ndarray, label: str) -> float:
    try:
        return float(linalg.eigh(numerator, denominator, eigvals_only=True)[-1])
    except linalg.LinAlgError as e:
        raise NumericalError(f"{label}: reference covariance is not positive definite: {e}")


def covariance_ratios(
    cov_lr: np.ndarray,
    cov_glmm_lr: np.ndarray,
    cov_glmm: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """
    Per-coefficient naivete and inefficiency and their worst-case versions.

    Naivete divides the GLMM-model variance of the logistic estimate by the
    variance logistic regression reports for itself; inefficiency divides it
    by the variance of the GLMM estimate. The worst cases over all linear
    combinations are the largest generalized eigenvalues.

    Returns:
        Tuple of (naivete, inefficiency, max_naivete, max_inefficiency)

    Examples:
        cov_glmm_lr == 4 * cov_lr gives naivete 4 everywhere and max_naivete 4.
    """
    for matrix, label in ((cov_lr, "cov_LR"), (cov_glmm_lr, "cov_GLMM(beta_LR)"), (cov_glmm, "cov_GLMM")):
        _check_psd(matrix, label)

    naivete = np.diag(cov_glmm_lr) / np.diag(cov_lr)
    inefficiency = np.diag(cov_glmm_lr) / np.diag(cov_glmm)
    max_naivete = _max_generalized_eigenvalue(cov_glmm_lr, cov_lr, "naivete")
    max_inefficiency = _max_generalized_eigenvalue(cov_glmm_lr, cov_glmm, "inefficiency")
    return naivete, inefficiency, max_naivete, max_inefficiency


def naivete_and_inefficiency(
    design: CrossedDesign,
    state: FitState,
    lr_fit: LrFit,
    cov_glmm: Optional[np.ndarray] = None,
    threads: int = 1,
) -> CovReport:
    """
    Compare the naive logistic fit with the GLMM fit on the same data.

    Args:
        design: Crossed design
        state: Converged GLMM state
        lr_fit: Converged logistic fit
        cov_glmm: Precomputed two-factor sandwich covariance, if available
        threads: Worker threads for the two-factor smoother

    Returns:
        CovReport
    """
    if not lr_fit.converged:
        logger.warning("Naive logistic fit did not converge; ratios may be unreliable")
    if cov_glmm is None:
        cov_glmm = sandwich_cov_two_factor(design, state, threads=threads)
    cov_glmm_lr = cov_glmm_of_lr(design, state, lr_fit)
    naivete, inefficiency, max_naivete, max_inefficiency = covariance_ratios(lr_fit.cov, cov_glmm_lr, cov_glmm)
    return CovReport(
        cov_glmm=cov_glmm,
        cov_lr_naive=lr_fit.cov,
        cov_glmm_of_lr=cov_glmm_lr,
        naivete=naivete,
        inefficiency=inefficiency,
        max_naivete=max_naivete,
        max_inefficiency=max_inefficiency,
    )


def standard_errors(cov: np.ndarray) -> np.ndarray:
    """Square roots of the covariance diagonal."""
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))
