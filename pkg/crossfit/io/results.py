"""
JSON serialization of fit results and oracle reports.

Output is plain JSON: numpy values become Python numbers, non-finite floats
become ``null``, and key order is the insertion order below, so reading a
result and writing it again reproduces the file byte for byte.
"""

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..data.design import CrossedDesign, LevelMaps
from ..inference.covariance import CovReport, standard_errors
from ..solver.logistic import LrFit
from ..solver.schall import FitResult

logger = logging.getLogger(__name__)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values and dataclasses into JSON-ready Python values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def dumps(data: Any) -> str:
    return json.dumps(to_jsonable(data), indent=2, allow_nan=False) + "\n"


def write_json(data: Any, path: str | Path) -> Path:
    """Write JSON output, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(dumps(data))
    logger.info("Wrote %s", path)
    return path


def read_json(path: str | Path) -> Dict[str, Any]:
    with open(path) as f:
        return json.load(f)


def _coefficient_table(names, estimates: np.ndarray, errors: Optional[np.ndarray]) -> List[Dict[str, Any]]:
    return [
        {"name": name, "estimate": float(est), "std_error": None if errors is None else float(err)}
        for name, est, err in zip(names, estimates, errors if errors is not None else [None] * len(names))
    ]


@dataclass
class FitOutput:
    """Everything the ``fit`` command reports."""

    converged: bool
    outer_iterations: int
    coefficients: List[Dict[str, Any]]
    sigma2_a: float
    sigma2_b: float
    phi: float
    phi_raw: float
    diagnostics: Dict[str, Any]
    iterations: List[Dict[str, Any]]
    covariance: Optional[List[List[float]]] = None
    random_effects: Optional[Dict[str, Dict[str, float]]] = None
    naive: Optional[Dict[str, Any]] = None
    config: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        design: CrossedDesign,
        levels: LevelMaps,
        result: FitResult,
        cov: Optional[np.ndarray] = None,
        lr_fit: Optional[LrFit] = None,
        cov_report: Optional[CovReport] = None,
        full_cov: bool = False,
        random_effects: bool = False,
    ) -> "FitOutput":
        """
        Assemble the output of one fit.

        Args:
            design: Fitted design
            levels: Original level keys
            result: GLMM fit
            cov: Sandwich covariance of the GLMM coefficients
            lr_fit: Naive logistic fit, for the comparison section
            cov_report: Naivete and inefficiency, for the comparison section
            full_cov: Include full covariance matrices
            random_effects: Include the predicted a and b keyed by level
        """
        state = result.state
        output = cls(
            converged=result.converged,
            outer_iterations=result.outer_iterations,
            coefficients=_coefficient_table(
                design.feature_names, state.beta, None if cov is None else standard_errors(cov)
            ),
            sigma2_a=state.sigma2_a,
            sigma2_b=state.sigma2_b,
            phi=state.phi,
            phi_raw=state.phi_raw,
            diagnostics={
                "n_obs": design.n_obs,
                "n_rows": design.n_rows,
                "n_cols": design.n_cols,
                "nu_a": state.nu_a,
                "nu_b": state.nu_b,
                "sum_a": float(np.sum(state.a)),
                "sum_b": float(np.sum(state.b)),
            },
            iterations=[
                {k: v for k, v in dataclasses.asdict(rec).items() if k != "seconds"} for rec in result.trace
            ],
            config=dataclasses.asdict(result.config),
        )
        if full_cov and cov is not None:
            output.covariance = cov
        if random_effects:
            output.random_effects = {
                "a": dict(zip(levels.row_levels, (float(v) for v in state.a))),
                "b": dict(zip(levels.col_levels, (float(v) for v in state.b))),
            }
        if lr_fit is not None:
            output.naive = cls._naive_section(design, lr_fit, cov_report, full_cov)
        return output

    @staticmethod
    def _naive_section(
        design: CrossedDesign, lr_fit: LrFit, cov_report: Optional[CovReport], full_cov: bool
    ) -> Dict[str, Any]:
        section: Dict[str, Any] = {
            "converged": lr_fit.converged,
            "iterations": lr_fit.iterations,
            "coefficients": _coefficient_table(design.feature_names, lr_fit.beta, lr_fit.standard_errors),
        }
        if cov_report is not None:
            section.update(
                naivete=dict(zip(design.feature_names, cov_report.naivete)),
                inefficiency=dict(zip(design.feature_names, cov_report.inefficiency)),
                max_naivete=cov_report.max_naivete,
                max_inefficiency=cov_report.max_inefficiency,
            )
            if full_cov:
                section.update(
                    cov_lr_naive=cov_report.cov_lr_naive,
                    cov_glmm_of_lr=cov_report.cov_glmm_of_lr,
                )
        return section

    def to_dict(self) -> Dict[str, Any]:
        data = to_jsonable(self)
        return {k: v for k, v in data.items() if v is not None}
