"""Simulated crossed designs and the experiment grids built on them."""

from .experiments import FITTERS, loglog_slope, run_mse_grid, run_timing_grid, summarize_mse
from .simulate import (
    Pattern,
    SimConfig,
    SimTruth,
    SimulatedData,
    gen_features,
    gen_response,
    sample_pattern,
    simulate,
    true_weights,
)

__all__ = [
    "SimConfig",
    "SimTruth",
    "SimulatedData",
    "Pattern",
    "sample_pattern",
    "gen_features",
    "gen_response",
    "simulate",
    "true_weights",
    "FITTERS",
    "run_mse_grid",
    "run_timing_grid",
    "summarize_mse",
    "loglog_slope",
]
