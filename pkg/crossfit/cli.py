"""
Command-line interface.

Usage:
    python -m crossfit fit data.csv --intercept --out result.json
    python -m crossfit simulate --s 10000 --preset a --seed 1 --out data.csv
    python -m crossfit bench --grid 1000,3162,10000 --replicates 20 --out table.csv
    python -m crossfit verify --s 1000 --out report.json
    python -m crossfit validate data.csv
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import ConfigLoader, resolve_threads
from .data import DesignValidator, read_design_csv, write_design_csv
from .errors import ConfigError, CrossfitError, DesignError
from .inference import naivete_and_inefficiency, sandwich_cov_two_factor
from .io import FitOutput, dumps, write_json
from .oracle import exact_nu, run_oracle_suite, trace_error_trend
from .simulation import loglog_slope, run_mse_grid, run_timing_grid, simulate, summarize_mse
from .simulation.experiments import check_fitters
from .solver import fit, irls_logistic

logger = logging.getLogger("crossfit")

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def configure_logging(verbosity: int):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def parse_grid(text: str) -> List[float]:
    """Parse ``1000,3e3,10000`` into sizes."""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Grid must be comma-separated numbers, got '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("Grid is empty")
    return values


def parse_names(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


# =============================================================================
# fit
# =============================================================================


def run_fit(args: argparse.Namespace) -> int:
    loader = ConfigLoader()
    overrides = {"epsilon": args.epsilon, "max_outer": args.max_outer}
    if args.config:
        config = loader.load_fit_config_file(args.config, **overrides)
    else:
        config = loader.load_fit_config(**overrides)
    threads = resolve_threads(args.threads)

    # keep stdout clean for JSON when no --out is given
    report = print if args.out else (lambda *a: print(*a, file=sys.stderr))

    design, levels = read_design_csv(args.csv_file, intercept=args.intercept)
    report(f"Loaded N={design.n_obs} observations, R={design.n_rows} rows, C={design.n_cols} columns, p={design.n_features}")

    result = fit(design, config, nu_estimator=exact_nu if args.exact_traces else None)
    cov = sandwich_cov_two_factor(design, result.state, threads=threads)

    lr_fit = cov_report = None
    if args.compare_naive:
        lr_fit = irls_logistic(design)
        cov_report = naivete_and_inefficiency(design, result.state, lr_fit, cov_glmm=cov)

    output = FitOutput.build(
        design,
        levels,
        result,
        cov=cov,
        lr_fit=lr_fit,
        cov_report=cov_report,
        full_cov=args.full_cov,
        random_effects=args.random_effects,
    )
    if args.out:
        write_json(output.to_dict(), args.out)
        report(f"Wrote {args.out}")
    else:
        sys.stdout.write(dumps(output.to_dict()))

    status = "converged" if result.converged else "DID NOT CONVERGE"
    report(
        f"Fit {status} after {result.outer_iterations} stage(s): "
        f"sigma2_a={result.state.sigma2_a:.4g} sigma2_b={result.state.sigma2_b:.4g} phi={result.state.phi:.4g}"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


# =============================================================================
# simulate
# =============================================================================


def run_simulate(args: argparse.Namespace) -> int:
    loader = ConfigLoader()
    config = loader.load_preset(
        args.preset, s=args.s, seed=args.seed, rho=args.rho, kappa=args.kappa, upsilon=args.upsilon
    )
    data = simulate(config)
    out = Path(args.out)
    write_design_csv(data.design, data.levels, out)
    truth_path = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    write_json({"config": dataclasses.asdict(config), **data.truth.as_dict(data.levels)}, truth_path)
    print(f"Wrote N={data.design.n_obs} observations to {out} and the generating values to {truth_path}")
    return EXIT_OK


# =============================================================================
# bench
# =============================================================================


def run_bench(args: argparse.Namespace) -> int:
    loader = ConfigLoader()
    configs = [
        loader.load_preset(args.preset, s=s, seed=args.seed, rho=args.rho, kappa=args.kappa) for s in args.grid
    ]
    fit_config = loader.load_fit_config()

    if args.mode == "timing":
        table = run_timing_grid(configs, replicates=args.replicates, fit_config=fit_config)
        fitters, metrics = ["backfit"], ["seconds_per_iteration", "seconds_total"]
    else:
        try:
            fitters = check_fitters(parse_names(args.fitters))
        except ValueError as e:
            raise ConfigError(str(e))
        workers = resolve_threads(args.threads)
        table = run_mse_grid(configs, fitters, replicates=args.replicates, fit_config=fit_config, workers=workers)
        metrics = ["sqerr_intercept", "sqerr_slopes", "sqerr_sigma_a", "sqerr_sigma_b"]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, index=False, float_format="%.17g")

    summary = summarize_mse(table)
    summary["log10_N"] = np.log10(summary["N"])
    summary["log10_value"] = np.log10(summary["value"].where(summary["value"] > 0))
    summary_path = out.with_name(f"{out.stem}.summary.csv")
    summary.to_csv(summary_path, index=False, float_format="%.17g")
    print(f"Wrote {len(table)} rows to {out} and the per-size summary to {summary_path}")

    for fitter in fitters:
        for metric in metrics:
            try:
                slope = loglog_slope(summary, fitter, metric)
            except ValueError:
                continue
            logger.info("log-log slope %s/%s = %.3f", fitter, metric, slope)
            print(f"  {fitter:8s} {metric:24s} slope vs N: {slope:+.3f}")
    return EXIT_OK


# =============================================================================
# verify
# =============================================================================


def run_verify(args: argparse.Namespace) -> int:
    loader = ConfigLoader()
    config = loader.load_preset(args.preset, s=args.s, seed=args.seed, rho=args.rho, kappa=args.kappa)
    report = run_oracle_suite(simulate(config), mode=args.mode, delta=args.delta)
    checks = report.checks()
    payload = {"report": report, "checks": checks}

    if args.grid:
        base = loader.load_preset(args.preset, s=max(args.grid), seed=args.seed)
        trend = trace_error_trend(
            args.grid,
            seeds=range(args.seed, args.seed + args.seeds),
            rho=args.trend_rho,
            kappa=args.trend_kappa,
            base=base,
            mode=args.mode,
        )
        payload["trend"] = trend.to_dict(orient="records")
        errors = trend["err_a_per_row"].to_numpy()
        payload["trend_decreasing"] = bool(np.all(np.diff(errors) < 0))

    write_json(payload, args.out)
    print(f"Spectral radius {report.spectral_radius:.4f}; checks passed: {sum(checks.values())}/{len(checks)}")
    print(f"Wrote {args.out}")
    return EXIT_OK


# =============================================================================
# validate
# =============================================================================


def run_validate(args: argparse.Namespace) -> int:
    result = DesignValidator(args.csv_file, intercept=args.intercept).validate()
    result.print_report()
    return EXIT_OK if result.is_valid() else EXIT_INPUT_ERROR


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug detail")
    common.add_argument("--threads", type=int, default=None, help="Parallel degree (default: $CROSSFIT_THREADS or CPU count)")

    parser = argparse.ArgumentParser(
        prog="crossfit",
        description="Logistic regression with two crossed random effects, fitted in O(N) per iteration",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_fit = commands.add_parser("fit", parents=[common], help="Fit a design CSV")
    p_fit.add_argument("csv_file", help="Design CSV with header row,col,y,x1,...,xp")
    p_fit.add_argument("--intercept", action="store_true", help="Prepend an all-ones intercept column")
    p_fit.add_argument("--epsilon", type=float, default=None, help="Outer relative-change tolerance (default 1e-8)")
    p_fit.add_argument("--max-outer", type=int, default=None, help="Cap on outer stages")
    p_fit.add_argument("--config", default=None, help="Fit config JSON (default: configs/fit/default.json)")
    p_fit.add_argument("--exact-traces", action="store_true", help="Use exact Schall traces (small designs only)")
    p_fit.add_argument("--compare-naive", action="store_true", help="Add the naive logistic comparison")
    p_fit.add_argument("--full-cov", action="store_true", help="Include full covariance matrices")
    p_fit.add_argument("--random-effects", action="store_true", help="Include predicted random effects")
    p_fit.add_argument("-o", "--out", default=None, help="Result JSON path (default: stdout)")
    p_fit.set_defaults(handler=run_fit)

    p_sim = commands.add_parser("simulate", parents=[common], help="Write a simulated design CSV")
    p_sim.add_argument("--s", type=float, required=True, help="Size parameter S (expected N)")
    p_sim.add_argument("--preset", default="a", help="Preset under configs/presets")
    p_sim.add_argument("--rho", type=float, default=None)
    p_sim.add_argument("--kappa", type=float, default=None)
    p_sim.add_argument("--upsilon", type=float, default=None, help="Inclusion heterogeneity, at least 1")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("-o", "--out", required=True, help="Design CSV path")
    p_sim.add_argument("--truth", default=None, help="Truth JSON path (default: <out>.truth.json)")
    p_sim.set_defaults(handler=run_simulate)

    p_bench = commands.add_parser("bench", parents=[common], help="Run an MSE or timing grid")
    p_bench.add_argument("--grid", type=parse_grid, required=True, help="Comma-separated S values")
    p_bench.add_argument("--mode", choices=["mse", "timing"], default="mse")
    p_bench.add_argument("--fitters", default="backfit,naive")
    p_bench.add_argument("--replicates", type=int, default=20)
    p_bench.add_argument("--preset", default="a")
    p_bench.add_argument("--rho", type=float, default=None)
    p_bench.add_argument("--kappa", type=float, default=None)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("-o", "--out", required=True, help="Long-format results CSV")
    p_bench.set_defaults(handler=run_bench)

    p_verify = commands.add_parser("verify", parents=[common], help="Check the trace approximation densely")
    p_verify.add_argument("--s", type=float, default=1000.0)
    p_verify.add_argument("--preset", default="a")
    p_verify.add_argument("--rho", type=float, default=None)
    p_verify.add_argument("--kappa", type=float, default=None)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--mode", choices=["true", "fitted"], default="true")
    p_verify.add_argument("--delta", type=float, default=0.5, help="Eigenvalue threshold for the tail count")
    p_verify.add_argument("--grid", type=parse_grid, default=None, help="S values for the trace error trend")
    p_verify.add_argument("--seeds", type=int, default=10, help="Seeds per S in the trend")
    p_verify.add_argument("--trend-rho", type=float, default=0.6)
    p_verify.add_argument("--trend-kappa", type=float, default=0.6)
    p_verify.add_argument("-o", "--out", required=True, help="Report JSON path")
    p_verify.set_defaults(handler=run_verify)

    p_validate = commands.add_parser("validate", parents=[common], help="Pre-flight check of a design CSV")
    p_validate.add_argument("csv_file")
    p_validate.add_argument("--intercept", action="store_true")
    p_validate.set_defaults(handler=run_validate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except (DesignError, ConfigError, FileNotFoundError) as e:
        logger.error("%s", e)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except CrossfitError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
