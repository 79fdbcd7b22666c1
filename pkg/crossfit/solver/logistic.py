"""
Plain logistic regression that ignores the random effects.

Serves as the naive baseline for simulation grids and the covariance
diagnostics.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..data.design import CrossedDesign
from ..errors import SeparationError, SingularSystemError
from . import links

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30
# Relative Newton step below which further iterations only move round-off
STEP_TOL = 1e-14
SEPARATION_DEVIANCE = 1e-6
SEPARATION_COEF = 1e3


@dataclass(frozen=True)
class LrFit:
    """Logistic regression estimate with its inverse-Fisher covariance."""

    beta: np.ndarray
    cov: np.ndarray
    iterations: int
    converged: bool
    score_norm: float

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))


def deviance(design: CrossedDesign, beta: np.ndarray) -> float:
    """-2 log-likelihood, computed as 2 sum log(1 + exp(-s zeta)) with s = 2y - 1."""
    sign = 2.0 * design.y - 1.0
    return float(2.0 * np.sum(np.logaddexp(0.0, -sign * (design.x @ beta))))


def score(design: CrossedDesign, beta: np.ndarray) -> np.ndarray:
    """Naive score sum (y - pi(x'beta)) x."""
    return design.x.T @ links.residual(design.y, design.x @ beta)


def fisher_information(design: CrossedDesign, beta: np.ndarray) -> np.ndarray:
    var = links.variance(design.x @ beta)
    info = design.x.T @ (var[:, None] * design.x)
    return 0.5 * (info + info.T)


def _solve_information(info: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            return linalg.solve(info, rhs, assume_a="pos")
        except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
            raise SingularSystemError(f"Logistic Hessian is singular; features are rank deficient: {e}")


def irls_logistic(design: CrossedDesign, tol: float = 1e-10, max_iter: int = 100) -> LrFit:
    """
    Maximum likelihood logistic regression by Newton steps with step halving.

    A step is halved until the deviance does not increase. Iteration stops
    when the score max-norm drops below ``tol`` or the Newton step becomes
    negligible relative to the coefficients.

    Args:
        design: Design whose features and responses are used; random effects are ignored
        tol: Score max-norm tolerance
        max_iter: Newton iteration cap

    Returns:
        LrFit with cov = (X' W X)^-1 at the final coefficients
    """
    beta = np.zeros(design.n_features)
    dev = deviance(design, beta)
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        grad = score(design, beta)
        if np.max(np.abs(grad), initial=0.0) < tol:
            converged = True
            break

        step = _solve_information(fisher_information(design, beta), grad)
        for _ in range(MAX_HALVINGS):
            trial = beta + step
            trial_dev = deviance(design, trial)
            if trial_dev <= dev:
                break
            step = 0.5 * step
        else:
            logger.warning("Step halving failed to reduce the deviance at iteration %d", iteration)
            break

        beta, dev = trial, trial_dev
        logger.debug("IRLS iteration %d: deviance=%.12g", iteration, dev)

        if dev < SEPARATION_DEVIANCE or np.max(np.abs(beta)) > SEPARATION_COEF:
            raise SeparationError(
                f"Coefficients diverge (max |beta| = {np.max(np.abs(beta)):.3g}, deviance = {dev:.3g}); "
                "the responses are separated by the features"
            )
        if np.max(np.abs(step)) <= STEP_TOL * max(1.0, float(np.max(np.abs(beta)))):
            converged = True
            break

    if not converged:
        logger.warning("Logistic regression did not converge in %d iterations", max_iter)

    grad = score(design, beta)
    cov = _solve_information(fisher_information(design, beta), np.eye(design.n_features))
    return LrFit(
        beta=beta,
        cov=0.5 * (cov + cov.T),
        iterations=iteration,
        converged=converged,
        score_norm=float(np.max(np.abs(grad), initial=0.0)),
    )


def expected_score_bias(design: CrossedDesign, beta: np.ndarray, sigma2: float) -> np.ndarray:
    """
    Small-variance approximation to the expected naive score at the true beta.

    (sigma2 / 2) sum_ij pi''(x_ij'beta) x_ij, where sigma2 is the variance of
    the random effect added to each linear predictor.

    Examples:
        A zero intercept-only beta gives exactly zero, since pi''(0) = 0.
    """
    curvature = links.second_derivative(design.x @ np.asarray(beta, dtype=np.float64))
    return 0.5 * float(sigma2) * (design.x.T @ curvature)
