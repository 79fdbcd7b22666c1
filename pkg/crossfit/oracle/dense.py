"""
Dense reference implementations.

Everything here forms incidence matrices and full normal equations
explicitly. The results are the yardstick for the O(N) solvers and are only
usable on desk-scale designs, which the size guards enforce.
"""

import logging
import warnings
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from ..data.design import CrossedDesign
from ..errors import OracleSizeError, SingularSystemError
from ..solver import links
from ..solver.backfit import PwlsProblem
from ..solver.schall import FitState
from ..solver.smoother import Factor, FactorWeights, check_sigma2, factor_index

logger = logging.getLogger(__name__)

MAX_DENSE_PARAMS = 2000
MAX_DENSE_OBS = 5000


def check_size(n_params: int, n_obs: Optional[int] = None):
    """Raise OracleSizeError beyond desk scale."""
    if n_params > MAX_DENSE_PARAMS:
        raise OracleSizeError(f"Dense system of size {n_params} exceeds the limit of {MAX_DENSE_PARAMS}")
    if n_obs is not None and n_obs > MAX_DENSE_OBS:
        raise OracleSizeError(f"Dense N x N operator with N={n_obs} exceeds the limit of {MAX_DENSE_OBS}")


def incidence(index: np.ndarray, n_levels: int) -> np.ndarray:
    """N x L indicator matrix with a single one per row."""
    z = np.zeros((index.shape[0], n_levels))
    z[np.arange(index.shape[0]), index] = 1.0
    return z


def factor_incidence(design: CrossedDesign, factor: Factor) -> np.ndarray:
    index, n_levels = factor_index(design, factor)
    return incidence(index, n_levels)


def _solve(matrix: np.ndarray, rhs: np.ndarray, label: str) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            return linalg.solve(matrix, rhs, assume_a="sym")
        except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
            raise SingularSystemError(f"Dense {label} system is singular: {e}")


def dense_pwls_solve(problem: PwlsProblem) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Solve the full (p + R + C) penalized normal equations directly.

    Returns:
        Tuple of (beta, a, b)

    Examples:
        R = C = p = 1 with one observation is a 3 x 3 system with a closed form.
    """
    design = problem.design
    p, n_rows, n_cols = design.n_features, design.n_rows, design.n_cols
    check_size(p + n_rows + n_cols)

    m = np.hstack([design.x, factor_incidence(design, Factor.A), factor_incidence(design, Factor.B)])
    w = problem.weights.w
    penalty = np.concatenate(
        [np.zeros(p), np.full(n_rows, 1.0 / problem.sigma2_a), np.full(n_cols, 1.0 / problem.sigma2_b)]
    )
    lhs = m.T @ (w[:, None] * m) + np.diag(penalty)
    coef = _solve(lhs, m.T @ (w * problem.z), "PWLS")
    return coef[:p], coef[p : p + n_rows], coef[p + n_rows :]


def dense_smoother(
    design: CrossedDesign,
    factor: Factor,
    weights: FactorWeights,
    sigma2: float,
    r: np.ndarray,
) -> np.ndarray:
    """Z (Z'WZ + I/sigma2)^-1 Z'W r for one factor."""
    z = factor_incidence(design, factor)
    check_size(z.shape[1])
    lhs = z.T @ (weights.w[:, None] * z) + np.eye(z.shape[1]) / check_sigma2(sigma2)
    return z @ _solve(lhs, z.T @ (weights.w * r), "smoother")


def _two_factor_system(
    design: CrossedDesign, weights: FactorWeights, sigma2_a: float, sigma2_b: float
) -> Tuple[np.ndarray, np.ndarray]:
    z = np.hstack([factor_incidence(design, Factor.A), factor_incidence(design, Factor.B)])
    check_size(z.shape[1])
    penalty = np.concatenate(
        [np.full(design.n_rows, 1.0 / check_sigma2(sigma2_a)), np.full(design.n_cols, 1.0 / check_sigma2(sigma2_b))]
    )
    return z, z.T @ (weights.w[:, None] * z) + np.diag(penalty)


def sum_zero_basis(n_rows: int, n_cols: int) -> np.ndarray:
    """Orthonormal basis of coefficient vectors with sum(a) == 0 and sum(b) == 0."""
    constraints = np.zeros((2, n_rows + n_cols))
    constraints[0, :n_rows] = 1.0
    constraints[1, n_rows:] = 1.0
    return linalg.null_space(constraints)


def dense_sab(
    design: CrossedDesign,
    weights: FactorWeights,
    sigma2_a: float,
    sigma2_b: float,
    r: np.ndarray,
    centered: bool = False,
) -> np.ndarray:
    """
    Two-factor smoother Z (Z'WZ + D^-1)^-1 Z'W r.

    With ``centered`` the coefficients are restricted to the sum-zero
    subspace before solving.
    """
    z, lhs = _two_factor_system(design, weights, sigma2_a, sigma2_b)
    rhs = z.T @ (weights.w[:, None] * r) if r.ndim == 2 else z.T @ (weights.w * r)
    if not centered:
        return z @ _solve(lhs, rhs, "two-factor smoother")
    basis = sum_zero_basis(design.n_rows, design.n_cols)
    coef = _solve(basis.T @ lhs @ basis, basis.T @ rhs, "centered two-factor smoother")
    return z @ (basis @ coef)


def dense_sab_matrix(design: CrossedDesign, weights: FactorWeights, sigma2_a: float, sigma2_b: float) -> np.ndarray:
    """The N x N two-factor smoother matrix."""
    check_size(design.n_rows + design.n_cols, design.n_obs)
    z, lhs = _two_factor_system(design, weights, sigma2_a, sigma2_b)
    return z @ _solve(lhs, z.T * weights.w[None, :], "two-factor smoother")


def dense_smoother_matrix(design: CrossedDesign, factor: Factor, weights: FactorWeights, sigma2: float) -> np.ndarray:
    """The N x N one-factor smoother matrix."""
    z = factor_incidence(design, factor)
    check_size(z.shape[1], design.n_obs)
    lhs = z.T @ (weights.w[:, None] * z) + np.eye(z.shape[1]) / check_sigma2(sigma2)
    return z @ _solve(lhs, z.T * weights.w[None, :], "smoother")


def dense_sandwich_cov(design: CrossedDesign, state: FitState, two_factor: bool = True) -> np.ndarray:
    """
    Sandwich covariance from explicit N x N matrices.

    L = (X' W_S X)^-1 X' W_S with W_S = W (I - S), and the covariance is
    L Sigma L' with Sigma = W^-1 + sigma2_a Z_A Z_A' (+ sigma2_b Z_B Z_B').
    """
    weights = FactorWeights.from_weights(design, state.w)
    if two_factor:
        smoother = dense_sab_matrix(design, weights, state.sigma2_a, state.sigma2_b)
    else:
        smoother = dense_smoother_matrix(design, Factor.A, weights, state.sigma2_a)
    w_s = weights.w[:, None] * (np.eye(design.n_obs) - smoother)
    x = design.x
    lmap = _solve(x.T @ w_s @ x, x.T @ w_s, "sandwich bread")

    z_a = factor_incidence(design, Factor.A)
    sigma = np.diag(1.0 / weights.w) + state.sigma2_a * (z_a @ z_a.T)
    if two_factor:
        z_b = factor_incidence(design, Factor.B)
        sigma += state.sigma2_b * (z_b @ z_b.T)
    cov = lmap @ sigma @ lmap.T
    return 0.5 * (cov + cov.T)


def monte_carlo_expected_score(
    design: CrossedDesign,
    beta: np.ndarray,
    sigma2: float,
    n_draws: int = 100_000,
    seed: int = 0,
    batch: int = 1000,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Expected naive score at beta when a N(0, sigma2) row effect is present.

    Each draw samples one effect per row level and a response for every
    observation, then evaluates sum (y - pi(x'beta)) x.

    Returns:
        Tuple of (mean score, Monte Carlo standard error), both length p
    """
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=np.float64)
    eta = design.x @ beta
    base = links.mean(eta)
    sigma = np.sqrt(float(sigma2))

    total = np.zeros(design.n_features)
    total_sq = np.zeros(design.n_features)
    remaining = n_draws
    while remaining > 0:
        k = min(batch, remaining)
        effects = rng.normal(0.0, sigma, (k, design.n_rows))
        probs = links.mean(eta[None, :] + effects[:, design.row_of])
        y = (rng.random(probs.shape) < probs).astype(np.float64)
        scores = (y - base[None, :]) @ design.x
        total += scores.sum(axis=0)
        total_sq += (scores**2).sum(axis=0)
        remaining -= k

    mean = total / n_draws
    var = np.maximum(total_sq / n_draws - mean**2, 0.0)
    return mean, np.sqrt(var / n_draws)
