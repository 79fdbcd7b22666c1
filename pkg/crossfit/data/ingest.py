"""
CSV ingestion and export for crossed designs.

File format: header row ``row,col,y,x1,...,xp``. Row and column keys are
arbitrary strings, ``y`` is 0 or 1, features are decimal floats.
"""

import logging
from pathlib import Path
from typing import Tuple

import numpy as np
import pandas as pd

from ..errors import DesignError
from .design import CrossedDesign, LevelMaps, compact_arrays

logger = logging.getLogger(__name__)

KEY_COLUMNS = ("row", "col", "y")
INTERCEPT_NAME = "intercept"

# 17 significant digits is enough for any double to survive a text round trip
FLOAT_FORMAT = "%.17g"


def load_design_frame(csv_path: str | Path) -> pd.DataFrame:
    """
    Load a design CSV into a DataFrame without interpreting it.

    Args:
        csv_path: Path to the CSV file

    Returns:
        DataFrame with string keys and float responses/features
    """
    csv_file = Path(csv_path)
    if not csv_file.exists():
        raise FileNotFoundError(f"CSV file not found: {csv_path}")

    try:
        frame = pd.read_csv(
            csv_file,
            dtype={"row": str, "col": str},
            encoding="utf-8-sig",
            float_precision="round_trip",
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        raise DesignError(f"CSV file is empty: {csv_path}")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DesignError(f"Could not parse {csv_path}: {e}")

    frame.columns = [str(c).strip() for c in frame.columns]
    if tuple(frame.columns[:3]) != KEY_COLUMNS:
        raise DesignError(
            f"CSV must start with columns {','.join(KEY_COLUMNS)}; found {','.join(frame.columns[:3])}"
        )
    logger.info("Loaded %d rows from %s", len(frame), csv_path)
    return frame


def read_design_csv(csv_path: str | Path, intercept: bool = False) -> Tuple[CrossedDesign, LevelMaps]:
    """
    Read a design CSV and compact it.

    Args:
        csv_path: Path to the CSV file
        intercept: Prepend an all-ones ``intercept`` feature column

    Returns:
        Tuple of (design, level maps)
    """
    frame = load_design_frame(csv_path)
    if frame[["row", "col", "y"]].isna().any().any():
        raise DesignError("Missing row, col or y values")

    feature_names = list(frame.columns[3:])
    try:
        y = frame["y"].astype(np.float64).to_numpy()
        x = frame[feature_names].astype(np.float64).to_numpy()
    except ValueError as e:
        raise DesignError(f"Non-numeric response or feature value: {e}")

    if intercept and INTERCEPT_NAME in feature_names:
        if not np.all(x[:, feature_names.index(INTERCEPT_NAME)] == 1.0):
            raise DesignError(f"Column '{INTERCEPT_NAME}' exists but is not all ones")
        logger.info("CSV already carries an '%s' column; not adding another", INTERCEPT_NAME)
    elif intercept:
        x = np.column_stack([np.ones(len(frame)), x])
        feature_names = [INTERCEPT_NAME] + feature_names

    if not feature_names:
        raise DesignError("No feature columns; pass --intercept for an intercept-only model")
    if np.isnan(x).any():
        raise DesignError("Missing feature values")

    return compact_arrays(frame["row"].to_numpy(), frame["col"].to_numpy(), y, x, feature_names)


def design_to_frame(design: CrossedDesign, levels: LevelMaps) -> pd.DataFrame:
    """Lay a design out in the CSV column order."""
    frame = pd.DataFrame(
        {
            "row": np.asarray(levels.row_levels, dtype=object)[design.row_of],
            "col": np.asarray(levels.col_levels, dtype=object)[design.col_of],
            "y": design.y.astype(np.int64),
        }
    )
    for k, name in enumerate(design.feature_names):
        frame[name] = design.x[:, k]
    return frame


def write_design_csv(design: CrossedDesign, levels: LevelMaps, csv_path: str | Path) -> Path:
    """
    Write a design in the ingestion format.

    Floats use round-trip formatting, so reading the file back reproduces the
    design bit for bit.
    """
    path = Path(csv_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    design_to_frame(design, levels).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %d observations to %s", design.n_obs, path)
    return path
