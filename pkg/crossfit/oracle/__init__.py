"""Dense reference solvers and the trace-approximation checks built on them."""

from .dense import (
    dense_pwls_solve,
    dense_sab,
    dense_sandwich_cov,
    dense_smoother,
    incidence,
    monte_carlo_expected_score,
)
from .traces import (
    OracleReport,
    exact_nu,
    exact_T_and_traces,
    trace_series_check,
    run_oracle_suite,
    schall_blocks,
    spectral_checks,
    spectral_quantities,
    trace_error_trend,
)

__all__ = [
    "dense_pwls_solve",
    "dense_smoother",
    "dense_sab",
    "dense_sandwich_cov",
    "incidence",
    "monte_carlo_expected_score",
    "OracleReport",
    "schall_blocks",
    "exact_T_and_traces",
    "exact_nu",
    "trace_series_check",
    "spectral_quantities",
    "spectral_checks",
    "run_oracle_suite",
    "trace_error_trend",
]
