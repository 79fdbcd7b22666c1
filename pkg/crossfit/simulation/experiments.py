"""
Experiment grids over simulated data.

Both grids produce long tables with columns
``fitter, S, N, metric, value, replicate`` so that one CSV layout serves
every plot. A fitter that fails on a replicate adds a ``failed`` row and the
grid carries on.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..data.design import CrossedDesign
from ..errors import CrossfitError
from ..solver.logistic import irls_logistic
from ..solver.schall import FitConfig, fit
from .simulate import SimConfig, simulate

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["fitter", "S", "N", "metric", "value", "replicate"]
FAILED = "failed"


@dataclass(frozen=True)
class FitterOutcome:
    """What a grid needs from one fit."""

    beta: np.ndarray
    sigma_a: Optional[float]
    sigma_b: Optional[float]
    iterations: int
    seconds: float


def _fit_backfit(design: CrossedDesign, fit_config: Optional[FitConfig]) -> FitterOutcome:
    started = time.perf_counter()
    result = fit(design, fit_config)
    seconds = time.perf_counter() - started
    if not result.converged:
        raise CrossfitError(f"Schall iteration did not converge in {result.outer_iterations} stages")
    return FitterOutcome(
        beta=result.state.beta,
        sigma_a=float(np.sqrt(result.state.sigma2_a)),
        sigma_b=float(np.sqrt(result.state.sigma2_b)),
        iterations=result.outer_iterations,
        seconds=seconds,
    )


def _fit_naive(design: CrossedDesign, fit_config: Optional[FitConfig]) -> FitterOutcome:
    started = time.perf_counter()
    lr = irls_logistic(design)
    seconds = time.perf_counter() - started
    if not lr.converged:
        raise CrossfitError(f"Logistic regression did not converge in {lr.iterations} iterations")
    return FitterOutcome(beta=lr.beta, sigma_a=None, sigma_b=None, iterations=lr.iterations, seconds=seconds)


FITTERS: Dict[str, Callable[[CrossedDesign, Optional[FitConfig]], FitterOutcome]] = {
    "backfit": _fit_backfit,
    "naive": _fit_naive,
}


def check_fitters(fitters: Sequence[str]) -> List[str]:
    unknown = [name for name in fitters if name not in FITTERS]
    if unknown:
        raise ValueError(f"Unknown fitter(s) {', '.join(unknown)}; choose from {', '.join(FITTERS)}")
    return list(fitters)


def error_metrics(outcome: FitterOutcome, config: SimConfig) -> Dict[str, float]:
    """Squared errors of one fit against the generating values."""
    truth = np.asarray(config.beta_true)
    sq_err = (outcome.beta - truth) ** 2
    metrics = {"sqerr_intercept": float(sq_err[0])}
    if sq_err.shape[0] > 1:
        metrics["sqerr_slopes"] = float(np.mean(sq_err[1:]))
    for k, value in enumerate(sq_err):
        metrics[f"sqerr_beta{k}"] = float(value)
    if outcome.sigma_a is not None:
        metrics["sqerr_sigma_a"] = (outcome.sigma_a - config.sigma_a) ** 2
        metrics["sqerr_sigma_b"] = (outcome.sigma_b - config.sigma_b) ** 2
    return metrics


def _mse_replicate(
    config: SimConfig,
    replicate: int,
    fitters: Sequence[str],
    fit_config: Optional[FitConfig],
) -> List[Dict[str, object]]:
    data = simulate(config, replicate)
    n_obs = data.design.n_obs
    rows: List[Dict[str, object]] = []
    for name in fitters:
        base = {"fitter": name, "S": config.s, "N": n_obs, "replicate": replicate}
        try:
            outcome = FITTERS[name](data.design, fit_config)
        except CrossfitError as e:
            logger.warning("Fitter %s failed at S=%g replicate %d: %s", name, config.s, replicate, e)
            rows.append({**base, "metric": FAILED, "value": 1.0})
            continue
        rows.extend({**base, "metric": metric, "value": value} for metric, value in error_metrics(outcome, config).items())
    return rows


def run_mse_grid(
    configs: Sequence[SimConfig],
    fitters: Sequence[str] = ("backfit", "naive"),
    replicates: int = 20,
    fit_config: Optional[FitConfig] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """
    Squared-error table for each fitter over a grid of sizes.

    Args:
        configs: One SimConfig per grid point (at least two)
        fitters: Names from FITTERS
        replicates: Replicates per grid point; replicate k of every point uses seed stream (seed, k)
        fit_config: Configuration for the backfit fitter
        workers: Worker processes over replicates

    Returns:
        Long table with TABLE_COLUMNS
    """
    if len(configs) < 2:
        raise ValueError("An MSE grid needs at least two grid points")
    fitters = check_fitters(fitters)
    tasks = [(config, rep) for config in configs for rep in range(replicates)]

    rows: List[Dict[str, object]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_mse_replicate, config, rep, fitters, fit_config) for config, rep in tasks]
            for future in futures:
                rows.extend(future.result())
    else:
        for config, rep in tasks:
            rows.extend(_mse_replicate(config, rep, fitters, fit_config))
    logger.info("MSE grid finished: %d grid points x %d replicates", len(configs), replicates)
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def run_timing_grid(
    configs: Sequence[SimConfig],
    replicates: int = 1,
    fit_config: Optional[FitConfig] = None,
) -> pd.DataFrame:
    """
    Wall-clock table for the backfit fitter.

    Records total fit seconds, mean seconds per outer stage and the number
    of stages. Runs sequentially so timings do not compete for cores.
    """
    rows: List[Dict[str, object]] = []
    for config in configs:
        for rep in range(replicates):
            data = simulate(config, rep)
            base = {"fitter": "backfit", "S": config.s, "N": data.design.n_obs, "replicate": rep}
            try:
                result = fit(data.design, fit_config)
            except CrossfitError as e:
                logger.warning("Timing fit failed at S=%g replicate %d: %s", config.s, rep, e)
                rows.append({**base, "metric": FAILED, "value": 1.0})
                continue
            total = result.total_seconds
            rows.append({**base, "metric": "seconds_total", "value": total})
            rows.append({**base, "metric": "seconds_per_iteration", "value": total / result.outer_iterations})
            rows.append({**base, "metric": "iterations", "value": float(result.outer_iterations)})
            logger.info("S=%g N=%d: %.3fs over %d stages", config.s, data.design.n_obs, total, result.outer_iterations)
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def summarize_mse(table: pd.DataFrame) -> pd.DataFrame:
    """
    Replicate means per (fitter, S, metric), with the mean N and a replicate count.

    Failed rows are dropped from the means; ``failures`` counts them per cell.
    """
    ok = table[table["metric"] != FAILED]
    summary = (
        ok.groupby(["fitter", "S", "metric"], as_index=False)
        .agg(N=("N", "mean"), value=("value", "mean"), count=("value", "size"))
        .sort_values(["fitter", "metric", "S"])
        .reset_index(drop=True)
    )
    failures = table[table["metric"] == FAILED].groupby(["fitter", "S"]).size().rename("failures")
    summary = summary.join(failures, on=["fitter", "S"])
    summary["failures"] = summary["failures"].fillna(0).astype(int)
    return summary


def loglog_slope(summary: pd.DataFrame, fitter: str, metric: str, min_n: float = 0.0) -> float:
    """
    Least-squares slope of log10(value) against log10(N).

    Args:
        summary: Output of summarize_mse
        fitter: Fitter name
        metric: Metric name
        min_n: Only use grid points with mean N at or above this

    Returns:
        The fitted slope
    """
    rows = summary[(summary["fitter"] == fitter) & (summary["metric"] == metric) & (summary["N"] >= min_n)]
    rows = rows[rows["value"] > 0]
    if len(rows) < 2:
        raise ValueError(f"Need at least two positive grid points for {fitter}/{metric}, got {len(rows)}")
    slope, _ = np.polyfit(np.log10(rows["N"].to_numpy()), np.log10(rows["value"].to_numpy()), 1)
    return float(slope)
