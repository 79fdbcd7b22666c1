"""
Modified Schall iteration for the crossed logistic GLMM.

Each outer stage linearizes the model around the current linear predictor,
solves the resulting penalized weighted least squares problem by clubbed
backfitting, then updates the variance components and the dispersion from
the new random effects. The degrees of freedom in the variance updates come
from the diagonal blocks of the Schall matrix only, which is what keeps a
stage O(N).
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..data.design import CrossedDesign
from ..errors import ConfigError, DegenerateFitError, NumericalError
from . import links
from .backfit import PwlsProblem, PwlsSolution, relative_change, solve_pwls_clubbed
from .smoother import FactorWeights, check_sigma2

logger = logging.getLogger(__name__)

NuEstimator = Callable[[CrossedDesign, FactorWeights, float, float], Tuple[float, float]]


@dataclass(frozen=True)
class FitConfig:
    """
    Tolerances and safeguards for the outer iteration.

    ``inner_tol`` of ``None`` uses ``epsilon`` for the clubbed backfitting too.
    """

    epsilon: float = 1e-8
    max_outer: int = 200
    inner_tol: Optional[float] = None
    max_sweeps: int = 1000
    sigma2_floor: float = 1e-8
    sigma2_cap: float = 100.0
    weight_floor: float = 0.0
    phi_floor: float = 1e-8
    dof_guard: float = 0.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.inner_tol is not None and not self.inner_tol > 0:
            raise ConfigError(f"inner_tol must be positive, got {self.inner_tol}")
        if self.max_outer < 1 or self.max_sweeps < 1:
            raise ConfigError("max_outer and max_sweeps must be at least 1")
        if not 0 < self.sigma2_floor < self.sigma2_cap:
            raise ConfigError(
                f"Need 0 < sigma2_floor < sigma2_cap, got {self.sigma2_floor} and {self.sigma2_cap}"
            )
        if self.weight_floor < 0:
            raise ConfigError(f"weight_floor must be nonnegative, got {self.weight_floor}")
        if not self.phi_floor > 0 or not self.dof_guard > 0:
            raise ConfigError("phi_floor and dof_guard must be positive")

    @property
    def inner_tolerance(self) -> float:
        return self.epsilon if self.inner_tol is None else self.inner_tol


@dataclass(frozen=True)
class FitState:
    """Parameters and derived per-observation quantities at one outer stage."""

    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    sigma2_a: float
    sigma2_b: float
    phi: float
    mu: np.ndarray
    w: np.ndarray
    zeta: np.ndarray
    nu_a: float = 0.0
    nu_b: float = 0.0
    phi_raw: float = 1.0

    @classmethod
    def initial(cls, design: CrossedDesign) -> "FitState":
        """All effects zero, variances and dispersion one."""
        zeta = np.zeros(design.n_obs)
        return cls(
            beta=np.zeros(design.n_features),
            a=np.zeros(design.n_rows),
            b=np.zeros(design.n_cols),
            sigma2_a=1.0,
            sigma2_b=1.0,
            phi=1.0,
            mu=links.mean(zeta),
            w=links.variance(zeta),
            zeta=zeta,
        )

    def factor_weights(self, design: CrossedDesign) -> FactorWeights:
        return FactorWeights.from_weights(design, self.w)


@dataclass(frozen=True)
class IterationRecord:
    """One outer stage of the trace log."""

    iteration: int
    objective: float
    sigma2_a: float
    sigma2_b: float
    phi: float
    phi_raw: float
    nu_a: float
    nu_b: float
    relative_change: float
    sweeps: int
    seconds: float


@dataclass(frozen=True)
class FitResult:
    """Final state of a fit and how it got there."""

    state: FitState
    outer_iterations: int
    converged: bool
    trace: Tuple[IterationRecord, ...] = field(default=())
    config: FitConfig = field(default_factory=FitConfig)

    @property
    def beta(self) -> np.ndarray:
        return self.state.beta

    @property
    def total_seconds(self) -> float:
        return float(sum(rec.seconds for rec in self.trace))


def working_response(state: FitState, design: CrossedDesign) -> np.ndarray:
    """
    z = zeta + (y - mu) / (mu (1 - mu)).

    Examples:
        zeta = 0 and y = 1 give z = 0.5 / 0.25 = 2.
    """
    var = links.variance(state.zeta)
    if np.any(var <= 0.0):
        raise NumericalError(
            f"{int(np.sum(var <= 0.0))} fitted mean(s) at 0 or 1; the linear predictor has diverged "
            "(a positive weight_floor can help)"
        )
    return state.zeta + links.residual(design.y, state.zeta) / var


def refresh_weights(state: FitState, config: Optional[FitConfig] = None) -> FitState:
    """Recompute mu = pi(zeta) and w = mu (1 - mu) / phi, floored when enabled."""
    config = config or FitConfig()
    w = links.variance(state.zeta) / state.phi
    if config.weight_floor > 0:
        w = np.maximum(w, config.weight_floor)
    if np.any(w <= 0.0):
        raise NumericalError("Weights underflowed to zero; enable weight_floor")
    return replace(state, mu=links.mean(state.zeta), w=w)


def approx_nu(weights: FactorWeights, sigma2_a: float, sigma2_b: float) -> Tuple[float, float]:
    """
    Degrees of freedom from the diagonal blocks of the Schall matrix.

    nu_a = sum_i [1 / (W_i. + 1/sigma2_a)] / sigma2_a, and likewise for nu_b.

    Examples:
        One row with W = 0.25 and sigma2_a = 1 gives nu_a = 1/1.25 = 0.8.
    """
    nu_a = float(np.sum(1.0 / (1.0 + check_sigma2(sigma2_a) * weights.row_weight_sums)))
    nu_b = float(np.sum(1.0 / (1.0 + check_sigma2(sigma2_b) * weights.col_weight_sums)))
    return nu_a, nu_b


def _approx_nu_estimator(
    design: CrossedDesign, weights: FactorWeights, sigma2_a: float, sigma2_b: float
) -> Tuple[float, float]:
    return approx_nu(weights, sigma2_a, sigma2_b)


def _effective_levels(n_levels: int, nu: float, label: str, config: FitConfig) -> float:
    dof = n_levels - nu
    if not np.isfinite(dof) or dof <= 0.0:
        raise DegenerateFitError(
            f"Degrees of freedom for factor {label} are {dof:.3g}; all {n_levels} level(s) are absorbed by shrinkage"
        )
    if dof < config.dof_guard:
        logger.warning("Degrees of freedom for factor %s are %.3g; using %.3g", label, dof, config.dof_guard)
        return config.dof_guard
    return dof


def _clamp_sigma2(value: float, label: str, config: FitConfig) -> float:
    clamped = float(np.clip(value, config.sigma2_floor, config.sigma2_cap))
    if clamped != value:
        logger.warning("sigma2_%s = %.3g clamped to %.3g", label, value, clamped)
    return clamped


def update_variances(
    state: FitState,
    a_new: np.ndarray,
    b_new: np.ndarray,
    nu: Tuple[float, float],
    config: Optional[FitConfig] = None,
) -> Tuple[float, float]:
    """
    Schall variance updates |a|^2 / (R - nu_a) and |b|^2 / (C - nu_b).

    Args:
        state: State the stage started from
        a_new: Row effects from this stage
        b_new: Column effects from this stage
        nu: (nu_a, nu_b) degrees of freedom
        config: Floors, cap and degrees-of-freedom guard

    Returns:
        Tuple of (sigma2_a, sigma2_b) clamped to [sigma2_floor, sigma2_cap]
    """
    config = config or FitConfig()
    nu_a, nu_b = nu
    dof_a = _effective_levels(len(a_new), nu_a, "A", config)
    dof_b = _effective_levels(len(b_new), nu_b, "B", config)
    sigma2_a = _clamp_sigma2(float(np.dot(a_new, a_new)) / dof_a, "A", config)
    sigma2_b = _clamp_sigma2(float(np.dot(b_new, b_new)) / dof_b, "B", config)
    return sigma2_a, sigma2_b


def update_dispersion(
    state: FitState,
    design: CrossedDesign,
    z: np.ndarray,
    beta_new: np.ndarray,
    a_new: np.ndarray,
    b_new: np.ndarray,
    nu: Tuple[float, float],
    config: Optional[FitConfig] = None,
) -> Tuple[float, float]:
    """
    Dispersion from the weighted working residuals of this stage.

    phi = sum mu (1 - mu) (z - zeta_new)^2 / (N - p - (R - nu_a) - (C - nu_b)),
    with mu the means the working response was built from.

    Returns:
        Tuple of (phi floored at phi_floor, unfloored phi)
    """
    config = config or FitConfig()
    nu_a, nu_b = nu
    denom = design.n_obs - design.n_features - (design.n_rows - nu_a) - (design.n_cols - nu_b)
    if not denom > 0:
        raise DegenerateFitError(
            f"Dispersion denominator N - p - (R - nu_a) - (C - nu_b) = {denom:.3g} is not positive"
        )
    resid = z - (design.x @ beta_new + a_new[design.row_of] + b_new[design.col_of])
    phi_raw = float(np.dot(links.variance(state.zeta), resid**2)) / denom
    if phi_raw < config.phi_floor:
        logger.warning("Dispersion %.3g floored at %.3g", phi_raw, config.phi_floor)
    return max(phi_raw, config.phi_floor), phi_raw


def fit(
    design: CrossedDesign,
    config: Optional[FitConfig] = None,
    nu_estimator: Optional[NuEstimator] = None,
) -> FitResult:
    """
    Fit the crossed logistic GLMM.

    Args:
        design: Crossed design with an explicit intercept column if one is wanted
        config: Tolerances and safeguards; defaults when omitted
        nu_estimator: Degrees-of-freedom estimator called as
            ``nu_estimator(design, weights, sigma2_a, sigma2_b)``; the diagonal
            block approximation when omitted

    Returns:
        FitResult; ``converged`` is False if max_outer stages did not reach epsilon
    """
    config = config or FitConfig()
    nu_estimator = nu_estimator or _approx_nu_estimator

    state = FitState.initial(design)
    solution: Optional[PwlsSolution] = None
    records: List[IterationRecord] = []
    converged = False

    for iteration in range(1, config.max_outer + 1):
        started = time.perf_counter()
        z = working_response(state, design)
        weights = state.factor_weights(design)
        problem = PwlsProblem(
            design,
            weights,
            z,
            state.sigma2_a,
            state.sigma2_b,
            tol=config.inner_tolerance,
            max_sweeps=config.max_sweeps,
        )
        solution = solve_pwls_clubbed(problem, init=solution)

        nu_a, nu_b = nu_estimator(design, weights, state.sigma2_a, state.sigma2_b)
        sigma2_a, sigma2_b = update_variances(state, solution.a, solution.b, (nu_a, nu_b), config)
        phi, phi_raw = update_dispersion(
            state, design, z, solution.beta, solution.a, solution.b, (nu_a, nu_b), config
        )

        change = relative_change(solution.zeta, state.zeta)
        state = refresh_weights(
            replace(
                state,
                beta=solution.beta,
                a=solution.a,
                b=solution.b,
                zeta=solution.zeta,
                sigma2_a=sigma2_a,
                sigma2_b=sigma2_b,
                phi=phi,
                phi_raw=phi_raw,
                nu_a=nu_a,
                nu_b=nu_b,
            ),
            config,
        )
        records.append(
            IterationRecord(
                iteration=iteration,
                objective=solution.objective,
                sigma2_a=sigma2_a,
                sigma2_b=sigma2_b,
                phi=phi,
                phi_raw=phi_raw,
                nu_a=nu_a,
                nu_b=nu_b,
                relative_change=change,
                sweeps=solution.sweeps_used,
                seconds=time.perf_counter() - started,
            )
        )
        logger.info(
            "Stage %d: change=%.3e sigma2_a=%.4g sigma2_b=%.4g phi=%.4g sweeps=%d",
            iteration,
            change,
            sigma2_a,
            sigma2_b,
            phi,
            solution.sweeps_used,
        )
        if change < config.epsilon:
            converged = True
            break

    if not converged:
        logger.warning("Schall iteration did not converge in %d stages", config.max_outer)

    return FitResult(
        state=state,
        outer_iterations=len(records),
        converged=converged,
        trace=tuple(records),
        config=config,
    )
