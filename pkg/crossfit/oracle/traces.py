"""
Exact Schall traces and the spectral quantities behind the trace approximation.

With A = diag(W_i. + 1/sigma2_a), C = diag(W_.j + 1/sigma2_b) and B the R x C
matrix of cell weights, the Schall matrix is T = [[A, B], [B', C]]. The fit
approximates the block traces of T^-1 by those of A^-1 and C^-1. Writing
B_* = A^-1/2 B C^-1/2 = U diag(s) V', the exact error of the row block is

    Err_a = sum_m d_m lambda_m / (1 - lambda_m),  d_m = sum_i U_im^2 / A_ii,

with lambda_m = s_m^2 the eigenvalues of B_* B_*'. The column block is the
same with V and C.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from ..data.design import CrossedDesign
from ..solver.schall import FitConfig, fit
from ..solver.smoother import FactorWeights, check_sigma2
from ..simulation.simulate import SimConfig, SimulatedData, simulate, true_weights
from .dense import check_size

logger = logging.getLogger(__name__)

MAX_SERIES_TERMS = 500
SERIES_TERM_TOL = 1e-14
MODES = ("true", "fitted")


@dataclass(frozen=True)
class OracleReport:
    """Exact and approximate traces with the spectral checks; unset fields are None."""

    exact_tr11: Optional[float] = None
    exact_tr22: Optional[float] = None
    approx_tr11: Optional[float] = None
    approx_tr22: Optional[float] = None
    err_a: Optional[float] = None
    err_b: Optional[float] = None
    spectral_radius: Optional[float] = None
    row_col_bound: Optional[float] = None
    shrinkage_product_bound: Optional[float] = None
    lambda1: Optional[float] = None
    delta: Optional[float] = None
    eig_count_above_delta: Optional[int] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def trace_diff_a(self) -> float:
        """Exact minus approximate row-block trace."""
        return self.exact_tr11 - self.approx_tr11

    @property
    def trace_diff_b(self) -> float:
        return self.exact_tr22 - self.approx_tr22

    def merged(self, other: "OracleReport") -> "OracleReport":
        """Fields set in ``other`` override this report's; metadata is combined."""
        values = {
            f.name: getattr(other, f.name)
            for f in dataclasses.fields(other)
            if f.name != "metadata" and getattr(other, f.name) is not None
        }
        return dataclasses.replace(self, **values, metadata={**self.metadata, **other.metadata})

    def checks(self) -> Dict[str, bool]:
        """Pass/fail for the relationships the theory guarantees."""
        results: Dict[str, bool] = {}
        if self.spectral_radius is not None:
            results["spectral_radius_below_one"] = self.spectral_radius < 1.0
            results["radius_within_row_col_bound"] = self.spectral_radius <= self.row_col_bound * (1 + 1e-10)
            results["lambda1_within_product_bound"] = self.lambda1 <= self.shrinkage_product_bound * (1 + 1e-10)
            results["product_bound_below_one"] = self.shrinkage_product_bound < 1.0
            results["lambda1_is_radius_squared"] = abs(self.lambda1 - self.spectral_radius**2) < 1e-10
        if self.err_a is not None:
            scale = max(1.0, abs(self.exact_tr11))
            results["err_a_matches_trace_difference"] = abs(self.err_a - self.trace_diff_a) < 1e-8 * scale
            scale = max(1.0, abs(self.exact_tr22))
            results["err_b_matches_trace_difference"] = abs(self.err_b - self.trace_diff_b) < 1e-8 * scale
        return results


def schall_blocks(
    design: CrossedDesign, weights: FactorWeights, sigma2_a: float, sigma2_b: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Diagonals of A and C and the dense cell-weight matrix B.

    Returns:
        Tuple of (A diagonal, B, C diagonal)
    """
    check_size(design.n_rows + design.n_cols)
    a_diag = weights.row_weight_sums + 1.0 / check_sigma2(sigma2_a)
    c_diag = weights.col_weight_sums + 1.0 / check_sigma2(sigma2_b)
    b = np.zeros((design.n_rows, design.n_cols))
    np.add.at(b, (design.row_of, design.col_of), weights.w)
    return a_diag, b, c_diag


def _scaled_block(a_diag: np.ndarray, b: np.ndarray, c_diag: np.ndarray) -> np.ndarray:
    return b / np.sqrt(a_diag)[:, None] / np.sqrt(c_diag)[None, :]


def _series_errors(a_diag: np.ndarray, b: np.ndarray, c_diag: np.ndarray) -> Tuple[float, float]:
    u, s, vt = linalg.svd(_scaled_block(a_diag, b, c_diag), full_matrices=True)
    lam_a = np.zeros(u.shape[0])
    lam_b = np.zeros(vt.shape[0])
    lam_a[: s.shape[0]] = s**2
    lam_b[: s.shape[0]] = s**2
    d_a = (u**2 / a_diag[:, None]).sum(axis=0)
    d_b = (vt.T**2 / c_diag[:, None]).sum(axis=0)
    return float(np.sum(d_a * lam_a / (1.0 - lam_a))), float(np.sum(d_b * lam_b / (1.0 - lam_b)))


def exact_T_and_traces(
    design: CrossedDesign, weights: FactorWeights, sigma2_a: float, sigma2_b: float
) -> OracleReport:
    """
    Invert the dense Schall matrix and compare its block traces with the approximation.

    Args:
        design: Crossed design
        weights: Observation weights
        sigma2_a: Row variance component
        sigma2_b: Column variance component

    Returns:
        OracleReport with the trace fields and the series errors set
    """
    a_diag, b, c_diag = schall_blocks(design, weights, sigma2_a, sigma2_b)
    n_rows = design.n_rows
    t = np.block([[np.diag(a_diag), b], [b.T, np.diag(c_diag)]])
    t_inv = linalg.inv(t)
    err_a, err_b = _series_errors(a_diag, b, c_diag)
    return OracleReport(
        exact_tr11=float(np.trace(t_inv[:n_rows, :n_rows])),
        exact_tr22=float(np.trace(t_inv[n_rows:, n_rows:])),
        approx_tr11=float(np.sum(1.0 / a_diag)),
        approx_tr22=float(np.sum(1.0 / c_diag)),
        err_a=err_a,
        err_b=err_b,
    )


def exact_nu(
    design: CrossedDesign, weights: FactorWeights, sigma2_a: float, sigma2_b: float
) -> Tuple[float, float]:
    """Schall degrees of freedom from the exact inverse; drop-in for the approximate estimator."""
    report = exact_T_and_traces(design, weights, sigma2_a, sigma2_b)
    return report.exact_tr11 / sigma2_a, report.exact_tr22 / sigma2_b


def _as_matrix(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.diag(values) if values.ndim == 1 else values


def _inverse_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, vectors = linalg.eigh(matrix)
    if eigenvalues[0] <= 0:
        raise ValueError("Diagonal blocks must be positive definite")
    return (vectors / np.sqrt(eigenvalues)) @ vectors.T


def trace_series_check(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    eta: float = 1.0,
    truncation: Optional[int] = None,
) -> float:
    """
    Residual of the trace series for T(eta) = [[A, eta B], [eta B', C]].

    Compares tr(T(eta)^-1) - tr(T(0)^-1) with the partial sum over k = 1..K of
    eta^2k [tr(A^-1 (B_* B_*')^k) + tr(C^-1 (B_*' B_*)^k)].

    Args:
        a: Positive definite A, or its diagonal
        b: Off-diagonal block
        c: Positive definite C, or its diagonal
        eta: Scale of the off-diagonal block
        truncation: Number of series terms K; adaptive when omitted (stop once a
            term drops below 1e-14 or after 500 terms)

    Returns:
        Absolute residual
    """
    a, c = _as_matrix(a), _as_matrix(c)
    b = np.asarray(b, dtype=np.float64)
    check_size(a.shape[0] + c.shape[0])
    b_star = _inverse_sqrt(a) @ b @ _inverse_sqrt(c)
    radius = float(linalg.svdvals(b_star)[0]) if b_star.size else 0.0
    if abs(eta) * radius >= 1.0:
        raise ValueError(f"eta * spectral radius = {abs(eta) * radius:.3g} must be below 1")

    t = np.block([[a, eta * b], [eta * b.T, c]])
    a_inv, c_inv = linalg.inv(a), linalg.inv(c)
    exact = float(np.trace(linalg.inv(t)) - np.trace(a_inv) - np.trace(c_inv))

    left = b_star @ b_star.T
    right = b_star.T @ b_star
    power_left = np.eye(left.shape[0])
    power_right = np.eye(right.shape[0])
    limit = MAX_SERIES_TERMS if truncation is None else truncation
    series = 0.0
    for k in range(1, limit + 1):
        power_left = power_left @ left
        power_right = power_right @ right
        term = eta ** (2 * k) * float(np.trace(a_inv @ power_left) + np.trace(c_inv @ power_right))
        series += term
        if truncation is None and abs(term) < SERIES_TERM_TOL:
            break
    return abs(exact - series)


def spectral_quantities(a_diag: np.ndarray, b: np.ndarray, c_diag: np.ndarray, delta: float = 0.5) -> Dict[str, float]:
    """
    Spectral radius, its bounds, and the eigenvalue tail count for one system.

    The radius is the largest |eigenvalue| of [[0, B_*], [B_*', 0]];
    lambda1 is computed separately from B_* B_*' so the two can be compared.
    """
    b_star = _scaled_block(a_diag, b, c_diag)
    n_rows, n_cols = b_star.shape
    off_diagonal = np.block([[np.zeros((n_rows, n_rows)), b_star], [b_star.T, np.zeros((n_cols, n_cols))]])
    radius = float(np.max(np.abs(linalg.eigvalsh(off_diagonal))))
    eigenvalues = linalg.eigvalsh(b_star @ b_star.T)

    row_col = np.sqrt(np.max((b / c_diag[None, :]).sum(axis=1))) * np.sqrt(np.max((b / a_diag[:, None]).sum(axis=0)))
    shrinkage_product = np.max(b.sum(axis=1) / a_diag) * np.max(b.sum(axis=0) / c_diag)
    return {
        "spectral_radius": radius,
        "lambda1": float(eigenvalues[-1]),
        "row_col_bound": float(row_col),
        "shrinkage_product_bound": float(shrinkage_product),
        "eig_count_above_delta": int(np.sum(eigenvalues > delta)),
    }


def spectral_checks(
    design: CrossedDesign,
    weights: FactorWeights,
    sigma2_a: float,
    sigma2_b: float,
    delta: float = 0.5,
) -> OracleReport:
    """
    Spectral radius of the off-diagonal system against its two upper bounds.

    The row/column-sum bound applies to the radius itself; the product of
    the largest shrinkage factors bounds lambda1, the radius squared.
    """
    a_diag, b, c_diag = schall_blocks(design, weights, sigma2_a, sigma2_b)
    values = spectral_quantities(a_diag, b, c_diag, delta)
    return OracleReport(delta=delta, **values)


def _oracle_inputs(
    simulated: SimulatedData, mode: str, fit_config: Optional[FitConfig]
) -> Tuple[FactorWeights, float, float]:
    design = simulated.design
    if mode == "true":
        floor = (fit_config or FitConfig()).sigma2_floor
        weights = FactorWeights.from_weights(design, true_weights(design, simulated.truth))
        return weights, max(simulated.truth.sigma_a**2, floor), max(simulated.truth.sigma_b**2, floor)
    if mode == "fitted":
        result = fit(design, fit_config)
        if not result.converged:
            logger.warning("Fit for the oracle did not converge; using the last iterate")
        return result.state.factor_weights(design), result.state.sigma2_a, result.state.sigma2_b
    raise ValueError(f"mode must be one of {', '.join(MODES)}, got '{mode}'")


def run_oracle_suite(
    simulated: SimulatedData,
    mode: str = "true",
    delta: float = 0.5,
    fit_config: Optional[FitConfig] = None,
) -> OracleReport:
    """
    Full OracleReport for one simulated dataset.

    Args:
        simulated: Dataset with its generating values
        mode: ``"true"`` for population weights and variances, ``"fitted"``
            for the converged weights and variances of a fit
        delta: Eigenvalue threshold for the tail count
        fit_config: Configuration for the fit in ``"fitted"`` mode

    Returns:
        OracleReport with traces, spectral checks and metadata
    """
    design = simulated.design
    weights, sigma2_a, sigma2_b = _oracle_inputs(simulated, mode, fit_config)
    report = exact_T_and_traces(design, weights, sigma2_a, sigma2_b).merged(
        spectral_checks(design, weights, sigma2_a, sigma2_b, delta)
    )
    metadata = {
        "mode": mode,
        "n_obs": design.n_obs,
        "n_rows": design.n_rows,
        "n_cols": design.n_cols,
        "sigma2_a": sigma2_a,
        "sigma2_b": sigma2_b,
    }
    if simulated.config is not None:
        metadata.update(s=simulated.config.s, rho=simulated.config.rho, kappa=simulated.config.kappa)
    report = dataclasses.replace(report, metadata=metadata)
    logger.info(
        "Oracle (%s): N=%d radius=%.4f err_a/R=%.3g err_b/C=%.3g",
        mode,
        design.n_obs,
        report.spectral_radius,
        report.err_a / design.n_rows,
        report.err_b / design.n_cols,
    )
    return report


def trace_error_trend(
    s_grid: Sequence[float],
    seeds: Sequence[int] = tuple(range(10)),
    rho: float = 0.6,
    kappa: float = 0.6,
    base: Optional[SimConfig] = None,
    mode: str = "true",
) -> pd.DataFrame:
    """
    Median trace error per level across seeds, for each S.

    Args:
        s_grid: Sizes to sample
        seeds: One dataset per seed at every size
        rho: Row exponent
        kappa: Column exponent
        base: Template for the remaining simulation parameters
        mode: Weights to use, as in run_oracle_suite

    Returns:
        DataFrame with one row per S: S, N, R, C, err_a_per_row, err_b_per_col,
        spectral_radius, lambda1 (medians over seeds)
    """
    base = base or SimConfig(s=max(s_grid))
    rows = []
    for s in s_grid:
        for seed in seeds:
            config = dataclasses.replace(base, s=s, rho=rho, kappa=kappa, seed=seed)
            simulated = simulate(config)
            report = run_oracle_suite(simulated, mode)
            design = simulated.design
            rows.append(
                {
                    "S": s,
                    "seed": seed,
                    "N": design.n_obs,
                    "R": design.n_rows,
                    "C": design.n_cols,
                    "err_a_per_row": report.err_a / design.n_rows,
                    "err_b_per_col": report.err_b / design.n_cols,
                    "spectral_radius": report.spectral_radius,
                    "lambda1": report.lambda1,
                }
            )
    table = pd.DataFrame(rows)
    return table.drop(columns="seed").groupby("S", as_index=False).median()
