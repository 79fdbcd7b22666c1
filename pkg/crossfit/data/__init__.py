"""Crossed designs: construction, ingestion and validation."""

from .design import (
    CrossedDesign,
    GroupCounts,
    LevelMaps,
    compact_arrays,
    compact_design,
    compact_pattern,
    group_counts,
    level_names,
    validate_and_compact,
)
from .ingest import INTERCEPT_NAME, read_design_csv, write_design_csv
from .validation import DesignValidator, ValidationResult

__all__ = [
    "CrossedDesign",
    "GroupCounts",
    "LevelMaps",
    "compact_arrays",
    "compact_design",
    "compact_pattern",
    "group_counts",
    "level_names",
    "validate_and_compact",
    "INTERCEPT_NAME",
    "read_design_csv",
    "write_design_csv",
    "DesignValidator",
    "ValidationResult",
]
