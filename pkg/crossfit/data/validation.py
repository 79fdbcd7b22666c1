"""
Pre-flight validation of design CSV files.

Reports problems that would stop a fit (errors), things that ingestion will
silently repair or that make a fit fragile (warnings), and summary statistics
of the observation pattern (info).
"""

import logging
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

from ..errors import DesignError
from .ingest import INTERCEPT_NAME, KEY_COLUMNS, load_design_frame

logger = logging.getLogger(__name__)


class ValidationResult:
    """Stores validation results with errors and warnings."""

    def __init__(self):
        self.errors: List[str] = []
        self.warnings: List[str] = []
        self.info: List[str] = []

    def add_error(self, message: str):
        """Add a critical error that prevents fitting."""
        self.errors.append(f"ERROR: {message}")

    def add_warning(self, message: str):
        """Add a warning about potential issues."""
        self.warnings.append(f"WARNING: {message}")

    def add_info(self, message: str):
        self.info.append(f"INFO: {message}")

    def is_valid(self) -> bool:
        """Returns True if no errors exist."""
        return len(self.errors) == 0

    def format_report(self) -> str:
        lines = ["", "=" * 70, "DESIGN VALIDATION REPORT", "=" * 70, ""]
        for title, messages in (("Information", self.info), ("Warnings", self.warnings), ("Errors", self.errors)):
            if messages:
                lines.append(f"{title}:")
                lines.extend(f"  {msg}" for msg in messages)
                lines.append("")
        lines.append("=" * 70)
        if self.is_valid():
            lines.append("VALIDATION PASSED - design can be fitted")
        else:
            lines.append(f"VALIDATION FAILED - {len(self.errors)} error(s) found")
        lines.append("=" * 70)
        return "\n".join(lines)

    def print_report(self):
        """Print validation report to stdout."""
        print(self.format_report())


class DesignValidator:
    """Validates design CSV files for ingestion and fitting."""

    def __init__(self, csv_path: str | Path, intercept: bool = False):
        self.csv_path = Path(csv_path)
        self.intercept = intercept
        self.result = ValidationResult()

    def validate(self) -> ValidationResult:
        """Run all validation checks."""
        if not self.csv_path.exists():
            self.result.add_error(f"CSV file not found: {self.csv_path}")
            return self.result

        try:
            frame = load_design_frame(self.csv_path)
        except DesignError as e:
            self.result.add_error(str(e))
            return self.result

        if frame.empty:
            self.result.add_error("CSV file has no data rows (only headers)")
            return self.result

        self._validate_keys(frame)
        self._validate_response(frame)
        self._validate_features(frame)
        if self.result.is_valid():
            self._summarize_pattern(frame)
        return self.result

    def _validate_keys(self, frame: pd.DataFrame):
        """Check keys are present and report duplicate cells."""
        for column in ("row", "col"):
            missing = int(frame[column].isna().sum())
            if missing:
                self.result.add_error(f"{missing} observation(s) have no '{column}' key")

        duplicates = int(frame.duplicated(subset=["row", "col"]).sum())
        if duplicates:
            self.result.add_warning(
                f"{duplicates} repeated (row, col) pair(s); ingestion keeps only the last occurrence of each"
            )

    def _validate_response(self, frame: pd.DataFrame):
        y = pd.to_numeric(frame["y"], errors="coerce")
        bad = frame.loc[~y.isin([0.0, 1.0]), "y"]
        if len(bad):
            shown = ", ".join(str(v) for v in bad.head(5))
            self.result.add_error(f"{len(bad)} non-binary response value(s), e.g. {shown}")
            return

        mean_y = float(y.mean())
        self.result.add_info(f"Response mean: {mean_y:.4f}")
        if mean_y in (0.0, 1.0):
            self.result.add_error("Response is constant; there is nothing to fit")

    def _validate_features(self, frame: pd.DataFrame):
        """Check features are numeric, complete and of full column rank."""
        names = [c for c in frame.columns if c not in KEY_COLUMNS]
        if not names and not self.intercept:
            self.result.add_error("No feature columns; use --intercept for an intercept-only model")
            return

        features = frame[names].apply(pd.to_numeric, errors="coerce")
        bad_columns = [name for name in names if features[name].isna().any()]
        if bad_columns:
            self.result.add_error(f"Missing or non-numeric values in feature column(s): {', '.join(bad_columns)}")
            return

        x = features.to_numpy(dtype=np.float64)
        if self.intercept and INTERCEPT_NAME not in names:
            x = np.column_stack([np.ones(len(frame)), x])
            names = [INTERCEPT_NAME] + names

        constant = [name for k, name in enumerate(names) if name != INTERCEPT_NAME and np.ptp(x[:, k]) == 0.0]
        if constant:
            self.result.add_warning(f"Constant feature column(s): {', '.join(constant)}")

        rank = np.linalg.matrix_rank(x)
        if rank < x.shape[1]:
            self.result.add_error(f"Feature matrix has rank {rank} < {x.shape[1]} columns; coefficients are not identified")
        self.result.add_info(f"Features ({len(names)}): {', '.join(names)}")

    def _summarize_pattern(self, frame: pd.DataFrame):
        """Counts and concentration of the observation pattern."""
        cells = frame.drop_duplicates(subset=["row", "col"], keep="last")
        n_obs = len(cells)
        row_counts = cells["row"].value_counts()
        col_counts = cells["col"].value_counts()
        n_rows, n_cols = len(row_counts), len(col_counts)

        self.result.add_info(f"N = {n_obs} observations, R = {n_rows} rows, C = {n_cols} columns")
        self.result.add_info(f"Sparsity N/(RC) = {n_obs / (n_rows * n_cols):.3g}")
        self.result.add_info(f"max_i N_i./N = {row_counts.max() / n_obs:.3g}, max_j N_.j/N = {col_counts.max() / n_obs:.3g}")

        singleton_rows = int(np.sum(row_counts.to_numpy() == 1))
        singleton_cols = int(np.sum(col_counts.to_numpy() == 1))
        if singleton_rows or singleton_cols:
            self.result.add_warning(
                f"{singleton_rows} row level(s) and {singleton_cols} column level(s) have a single observation"
            )
        if n_rows == 1 or n_cols == 1:
            self.result.add_warning("Only one level for a factor; its variance component is not identified")
