"""
Penalized weighted least squares for fixed weights, solved by clubbed backfitting.

For fixed weights W and variances the problem is

    minimize  sum_ij W_ij (z_ij - x_ij'beta - a_i - b_j)^2 + |a|^2/sigma2_a + |b|^2/sigma2_b

Each sweep minimizes jointly over (beta, a) with b held fixed, then jointly
over (beta, b) with a held fixed. Updating beta together with one factor
keeps sum-zero constraints implied by aliased columns of X (an intercept,
for example) satisfied at every step.
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from ..data.design import CrossedDesign
from ..errors import ConvergenceError, NumericalError, SingularSystemError
from .smoother import (
    Factor,
    FactorWeights,
    apply_centered_smoother,
    apply_group_smoother,
    check_sigma2,
    symmetric_weighted_residualizer,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 1000
# Fitted values moving less than this fraction of |r| are round-off
ROUNDOFF = 1e-13


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    """Squared relative change |new - old|^2 / |old|^2, the stopping statistic."""
    diff = float(np.sum((new - old) ** 2))
    base = float(np.sum(old**2))
    if base == 0.0:
        return 0.0 if diff == 0.0 else np.inf
    return diff / base


@dataclass
class PwlsProblem:
    """
    One penalized weighted least squares problem.

    The residualized feature matrices W (I - S_F) X and their Gram matrices
    depend only on the weights and variances, so they are computed once per
    problem and reused by every sweep.
    """

    design: CrossedDesign
    weights: FactorWeights
    z: np.ndarray
    sigma2_a: float
    sigma2_b: float
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        if self.z.shape != (self.design.n_obs,):
            raise ValueError(f"Working response must have length {self.design.n_obs}, got {self.z.shape}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be at least 1, got {self.max_sweeps}")
        self.sigma2_a = check_sigma2(self.sigma2_a)
        self.sigma2_b = check_sigma2(self.sigma2_b)

    def sigma2(self, factor: Factor) -> float:
        return self.sigma2_a if factor is Factor.A else self.sigma2_b

    @cached_property
    def _residualized_a(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._residualize(Factor.A)

    @cached_property
    def _residualized_b(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._residualize(Factor.B)

    def residualized(self, factor: Factor) -> Tuple[np.ndarray, np.ndarray]:
        """(W (I - S_F) X, X' W (I - S_F) X) for one factor."""
        return self._residualized_a if factor is Factor.A else self._residualized_b

    def _residualize(self, factor: Factor) -> Tuple[np.ndarray, np.ndarray]:
        x = self.design.x
        resid = symmetric_weighted_residualizer(self.design, factor, self.weights, self.sigma2(factor), x)
        gram = x.T @ resid
        return resid, 0.5 * (gram + gram.T)


@dataclass(frozen=True)
class PwlsSolution:
    """Minimizer of a PwlsProblem, with the objective at each sweep."""

    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    zeta: np.ndarray
    sweeps_used: int
    objective: float
    converged: bool = True
    objective_trace: Tuple[float, ...] = field(default=())


def linear_predictor(design: CrossedDesign, beta: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """zeta = X beta + a[row] + b[col]."""
    return design.x @ beta + a[design.row_of] + b[design.col_of]


def penalized_objective(
    design: CrossedDesign,
    weights: FactorWeights,
    z: np.ndarray,
    beta: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    sigma2_a: float,
    sigma2_b: float,
) -> float:
    """
    Penalized weighted residual sum of squares.

    Examples:
        With beta, a and b all zero the value is sum(w * z**2).
    """
    resid = np.asarray(z, dtype=np.float64) - linear_predictor(design, beta, a, b)
    return float(
        np.dot(weights.w, resid**2)
        + np.dot(a, a) / check_sigma2(sigma2_a)
        + np.dot(b, b) / check_sigma2(sigma2_b)
    )


def _solve_gram(gram: np.ndarray, rhs: np.ndarray, label: str) -> np.ndarray:
    if gram.shape[0] == 0:
        return np.zeros(0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            return linalg.solve(gram, rhs, assume_a="sym")
        except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
            raise SingularSystemError(
                f"Residualized Gram matrix for {label} is singular; X is rank deficient after removing the factor: {e}"
            )


def _club_step(problem: PwlsProblem, factor: Factor, other: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    design = problem.design
    other_index = design.col_of if factor is Factor.A else design.row_of
    target = problem.z - other[other_index]

    resid_x, gram = problem.residualized(factor)
    # W (I - S_F) is symmetric, so X' W (I - S_F) t == (W (I - S_F) X)' t
    beta = _solve_gram(gram, resid_x.T @ target, f"factor {factor.value}")
    coef, _ = apply_group_smoother(design, factor, problem.weights, problem.sigma2(factor), target - design.x @ beta)
    return beta, coef


def club_step_A(problem: PwlsProblem, b_current: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Jointly minimize over (beta, a) with b fixed.

    Args:
        problem: PWLS problem
        b_current: Current column effects

    Returns:
        Tuple of (beta, a)
    """
    return _club_step(problem, Factor.A, np.asarray(b_current, dtype=np.float64))


def club_step_B(problem: PwlsProblem, a_current: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Jointly minimize over (beta, b) with a fixed."""
    return _club_step(problem, Factor.B, np.asarray(a_current, dtype=np.float64))


def solve_pwls_clubbed(problem: PwlsProblem, init: Optional[PwlsSolution] = None) -> PwlsSolution:
    """
    Alternate clubbed A and B steps until the linear predictor settles.

    Stops when |zeta_k - zeta_{k-1}|^2 / |zeta_{k-1}|^2 < problem.tol. Hitting
    max_sweeps is not an exception: the last iterate comes back with
    ``converged=False``.

    Args:
        problem: PWLS problem
        init: Warm start; zeros when omitted

    Returns:
        PwlsSolution at the last sweep
    """
    design = problem.design
    if init is None:
        beta = np.zeros(design.n_features)
        a = np.zeros(design.n_rows)
        b = np.zeros(design.n_cols)
    else:
        beta, a, b = init.beta.copy(), init.a.copy(), init.b.copy()

    def objective() -> float:
        value = penalized_objective(design, problem.weights, problem.z, beta, a, b, problem.sigma2_a, problem.sigma2_b)
        if not np.isfinite(value):
            raise NumericalError(f"Penalized objective became non-finite ({value})")
        return value

    zeta = linear_predictor(design, beta, a, b)
    trace: List[float] = [objective()]
    converged = False
    sweep = 0
    for sweep in range(1, problem.max_sweeps + 1):
        _, a = club_step_A(problem, b)
        beta, b = club_step_B(problem, a)

        zeta_new = linear_predictor(design, beta, a, b)
        change = relative_change(zeta_new, zeta)
        zeta = zeta_new
        trace.append(objective())
        logger.debug("Sweep %d: objective=%.12g change=%.3e", sweep, trace[-1], change)
        if change < problem.tol:
            converged = True
            break

    if not converged:
        logger.warning("Clubbed backfitting did not converge in %d sweeps", problem.max_sweeps)

    return PwlsSolution(
        beta=beta,
        a=a,
        b=b,
        zeta=zeta,
        sweeps_used=sweep,
        objective=trace[-1],
        converged=converged,
        objective_trace=tuple(trace),
    )


def _sab_column(
    design: CrossedDesign,
    weights: FactorWeights,
    sigma2_a: float,
    sigma2_b: float,
    r: np.ndarray,
    tol: float,
    max_sweeps: int,
    centered: bool,
) -> np.ndarray:
    smoother = apply_centered_smoother if centered else apply_group_smoother
    a = np.zeros(design.n_rows)
    b = np.zeros(design.n_cols)
    fitted = np.zeros(design.n_obs)
    floor = ROUNDOFF**2 * float(np.dot(r, r))
    for _ in range(max_sweeps):
        a, _ = smoother(design, Factor.A, weights, sigma2_a, r - b[design.col_of])
        b, _ = smoother(design, Factor.B, weights, sigma2_b, r - a[design.row_of])
        fitted_new = a[design.row_of] + b[design.col_of]
        step = float(np.sum((fitted_new - fitted) ** 2))
        change = relative_change(fitted_new, fitted)
        fitted = fitted_new
        # a response the smoother annihilates leaves fitted values at round-off level
        if change < tol or step <= floor:
            return fitted
    raise ConvergenceError(f"Two-factor smoother did not converge in {max_sweeps} sweeps", last_iterate=fitted)


def apply_sab(
    design: CrossedDesign,
    weights: FactorWeights,
    sigma2_a: float,
    sigma2_b: float,
    r: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    centered: bool = True,
    threads: int = 1,
) -> np.ndarray:
    """
    Apply the two-factor smoother S_AB by backfitting.

    Returns the fitted values Z_A a + Z_B b of the ridge problem with
    response r. With ``centered`` the two coefficient vectors are held to
    sum zero, which removes the constant direction shared by both factors.

    Args:
        design: Crossed design
        weights: Observation weights
        sigma2_a: Row variance component
        sigma2_b: Column variance component
        r: Length-N response, or N x k with one response per column
        tol: Squared relative change of the fitted values that stops a column
        max_sweeps: Sweep cap per column
        centered: Use sum-zero constrained smoothers
        threads: Worker threads for the column loop

    Returns:
        Fitted values with the same shape as r
    """
    r = np.asarray(r, dtype=np.float64)
    check_sigma2(sigma2_a)
    check_sigma2(sigma2_b)

    def run(column: np.ndarray) -> np.ndarray:
        return _sab_column(design, weights, sigma2_a, sigma2_b, column, tol, max_sweeps, centered)

    if r.ndim == 1:
        return run(r)

    columns = [r[:, k] for k in range(r.shape[1])]
    if threads > 1 and len(columns) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fitted = list(pool.map(run, columns))
    else:
        fitted = [run(column) for column in columns]
    return np.column_stack(fitted) if fitted else np.zeros_like(r)
