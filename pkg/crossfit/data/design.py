"""
Sparse crossed designs.

A design stores one entry per observed (row, column) cell: the two level
indices, the binary response and a dense feature row. Incidence matrices for
the two factors are never formed; every product with them is a segmented
reduction over ``row_of`` / ``col_of``.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import DesignError

logger = logging.getLogger(__name__)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class CrossedDesign:
    """
    Observation pattern, responses and features of a crossed design.

    Arrays are copied and made read-only on construction, so a design can be
    shared freely between threads.
    """

    row_of: np.ndarray
    col_of: np.ndarray
    y: np.ndarray
    x: np.ndarray
    n_rows: int
    n_cols: int
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        row_of = np.asarray(self.row_of, dtype=np.int64)
        col_of = np.asarray(self.col_of, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)

        n_obs = row_of.shape[0]
        if n_obs == 0:
            raise DesignError("Design has no observations")
        if col_of.shape != (n_obs,) or y.shape != (n_obs,) or x.shape[0] != n_obs:
            raise DesignError(
                f"Inconsistent lengths: row_of={row_of.shape}, col_of={col_of.shape}, "
                f"y={y.shape}, x={x.shape}"
            )
        if row_of.min() < 0 or row_of.max() >= self.n_rows:
            raise DesignError(f"Row indices must lie in [0, {self.n_rows})")
        if col_of.min() < 0 or col_of.max() >= self.n_cols:
            raise DesignError(f"Column indices must lie in [0, {self.n_cols})")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise DesignError("Responses must be exactly 0 or 1")
        if not np.all(np.isfinite(x)):
            raise DesignError("Features must be finite")

        row_counts = np.bincount(row_of, minlength=self.n_rows)
        col_counts = np.bincount(col_of, minlength=self.n_cols)
        if row_counts.min() < 1:
            raise DesignError(f"{int(np.sum(row_counts == 0))} row level(s) have no observations")
        if col_counts.min() < 1:
            raise DesignError(f"{int(np.sum(col_counts == 0))} column level(s) have no observations")

        cells = row_of * self.n_cols + col_of
        if np.unique(cells).shape[0] != n_obs:
            raise DesignError("Duplicate (row, column) pairs in design")

        names = tuple(self.feature_names) or tuple(f"x{k + 1}" for k in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DesignError(f"Got {len(names)} feature names for {x.shape[1]} features")

        object.__setattr__(self, "row_of", _frozen(row_of))
        object.__setattr__(self, "col_of", _frozen(col_of))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "n_rows", int(self.n_rows))
        object.__setattr__(self, "n_cols", int(self.n_cols))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_obs(self) -> int:
        return int(self.row_of.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.x.shape[1])

    @property
    def intercept_column(self) -> int | None:
        """Index of the first all-ones feature column, if any."""
        for k in range(self.n_features):
            if np.all(self.x[:, k] == 1.0):
                return k
        return None

    @property
    def has_intercept(self) -> bool:
        return self.intercept_column is not None


@dataclass(frozen=True)
class GroupCounts:
    """Per-level observation counts N_i. and N_.j."""

    row_counts: np.ndarray
    col_counts: np.ndarray


@dataclass(frozen=True)
class LevelMaps:
    """Original keys for each compacted row and column index."""

    row_levels: Tuple[str, ...]
    col_levels: Tuple[str, ...]
    feature_names: Tuple[str, ...] = field(default=())


def group_counts(design: CrossedDesign) -> GroupCounts:
    """Exact per-level observation counts for both factors."""
    return GroupCounts(
        row_counts=np.bincount(design.row_of, minlength=design.n_rows),
        col_counts=np.bincount(design.col_of, minlength=design.n_cols),
    )


def compact_arrays(
    row_keys: Sequence[Any],
    col_keys: Sequence[Any],
    y: Sequence[float],
    x: np.ndarray,
    feature_names: Sequence[str] = (),
) -> Tuple[CrossedDesign, LevelMaps]:
    """
    Build a compact design from parallel arrays of keys, responses and features.

    Duplicate (row, column) keys keep the last occurrence. Levels are labelled
    in sorted key order, so an already contiguous integer labelling maps to
    itself.

    Args:
        row_keys: Row key per observation (any hashable, sortable values)
        col_keys: Column key per observation
        y: Binary responses
        x: N x p feature matrix
        feature_names: Optional names for the p feature columns

    Returns:
        Tuple of (design, level maps)
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    frame = pd.DataFrame({"row": list(row_keys), "col": list(col_keys)})
    if frame.empty:
        raise DesignError("Input has no observations")
    if len(frame) != x.shape[0] or len(frame) != len(y):
        raise DesignError("Keys, responses and features must have the same length")

    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0.0) | (y == 1.0)):
        bad = y[(y != 0.0) & (y != 1.0)][:5]
        raise DesignError(f"Non-binary response values: {bad.tolist()}")

    keep = ~frame.duplicated(subset=["row", "col"], keep="last").to_numpy()
    n_dropped = int(np.sum(~keep))
    if n_dropped:
        logger.warning("Collapsed %d duplicate (row, col) observation(s), keeping the last", n_dropped)
    frame = frame[keep]

    if frame[["row", "col"]].isna().to_numpy().any():
        raise DesignError("Row and column keys must not be missing")
    try:
        row_of, row_levels = pd.factorize(frame["row"], sort=True)
        col_of, col_levels = pd.factorize(frame["col"], sort=True)
    except (TypeError, ValueError) as e:
        raise DesignError(f"Row and column keys must be mutually sortable: {e}")

    design = CrossedDesign(
        row_of=row_of,
        col_of=col_of,
        y=y[keep],
        x=x[keep],
        n_rows=len(row_levels),
        n_cols=len(col_levels),
        feature_names=tuple(feature_names),
    )
    levels = LevelMaps(
        row_levels=tuple(str(k) for k in row_levels),
        col_levels=tuple(str(k) for k in col_levels),
        feature_names=design.feature_names,
    )
    return design, levels


def validate_and_compact(
    triplets: Iterable[Tuple[Any, Any, float, Sequence[float]]],
    feature_names: Sequence[str] = (),
) -> Tuple[CrossedDesign, LevelMaps]:
    """
    Validate raw (row_key, col_key, y, features) records and compact them.

    Args:
        triplets: Records with arbitrary row and column keys
        feature_names: Optional feature column names

    Returns:
        Tuple of (design, level maps)

    Examples:
        Row keys ("u7", "u7", "u9") give n_rows == 2 and row_of == [0, 0, 1].
    """
    records = list(triplets)
    if not records:
        raise DesignError("Input has no observations")

    lengths = {len(rec[3]) for rec in records}
    if len(lengths) != 1:
        raise DesignError(f"Feature vectors have different lengths: {sorted(lengths)}")

    row_keys = [rec[0] for rec in records]
    col_keys = [rec[1] for rec in records]
    try:
        y = np.array([float(rec[2]) for rec in records])
        x = np.array([list(rec[3]) for rec in records], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DesignError(f"Non-numeric response or feature value: {e}")

    return compact_arrays(row_keys, col_keys, y, x.reshape(len(records), -1), feature_names)


def compact_design(design: CrossedDesign) -> CrossedDesign:
    """Relabel levels contiguously in sorted order, dropping unused ones."""
    row_of, col_of, row_levels, col_levels = compact_pattern(design.row_of, design.col_of)
    return CrossedDesign(
        row_of=row_of,
        col_of=col_of,
        y=design.y,
        x=design.x,
        n_rows=len(row_levels),
        n_cols=len(col_levels),
        feature_names=design.feature_names,
    )


def compact_pattern(row_of: np.ndarray, col_of: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Compact a bare observation pattern.

    Returns:
        Tuple of (row_of, col_of, kept row labels, kept column labels)
    """
    row_levels, row_new = np.unique(row_of, return_inverse=True)
    col_levels, col_new = np.unique(col_of, return_inverse=True)
    return row_new, col_new, row_levels, col_levels


def level_names(prefix: str, labels: np.ndarray, width: int) -> List[str]:
    """Zero-padded level keys so lexical order matches numeric order."""
    return [f"{prefix}{int(label):0{width}d}" for label in labels]
