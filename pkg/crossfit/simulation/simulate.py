"""
Synthetic crossed designs.

A size parameter S fixes R = floor(S**rho) row levels and C = floor(S**kappa)
column levels. Each cell (i, j) is observed independently with probability
p_ij in the band [S/(RC), Upsilon S/(RC)], so about S cells are observed.
Features are Gaussian with AR(1) correlation, random effects are Gaussian,
and responses follow the latent logistic threshold model.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..data.design import CrossedDesign, LevelMaps, compact_pattern, level_names
from ..errors import ConfigError, DesignError
from ..solver import links

logger = logging.getLogger(__name__)

# Below this maximum inclusion probability cells are drawn by geometric
# skipping instead of one uniform per grid cell
SKIP_THRESHOLD = 0.1

RngLike = np.random.Generator | int | Sequence[int] | None


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulated dataset."""

    s: float
    rho: float = 0.56
    kappa: float = 0.56
    upsilon: float = 1.0
    beta_true: Tuple[float, ...] = (-2.0,)
    sigma_a: float = 0.8
    sigma_b: float = 0.4
    ar_gamma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta_true", tuple(float(v) for v in self.beta_true))
        if not self.s >= 1:
            raise ConfigError(f"S must be at least 1 (expected N = S), got {self.s}")
        if not (0 < self.rho < 1 and 0 < self.kappa < 1):
            raise ConfigError(f"rho and kappa must lie in (0, 1), got {self.rho} and {self.kappa}")
        if not self.upsilon >= 1:
            raise ConfigError(f"upsilon must be at least 1, got {self.upsilon}")
        if not self.beta_true:
            raise ConfigError("beta_true needs at least the intercept")
        if self.sigma_a < 0 or self.sigma_b < 0:
            raise ConfigError("sigma_a and sigma_b must be nonnegative")
        if not -1 < self.ar_gamma < 1:
            raise ConfigError(f"ar_gamma must lie in (-1, 1), got {self.ar_gamma}")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ConfigError(f"S={self.s} gives R={self.n_rows}, C={self.n_cols}; need at least one level each")
        if self.upsilon * self.base_probability > 1:
            raise ConfigError(
                f"Inclusion probabilities up to {self.upsilon * self.base_probability:.3g} exceed 1; "
                f"increase rho + kappa or decrease S"
            )
        if self.rho + self.kappa <= 1:
            logger.warning("rho + kappa = %.3g <= 1; the pattern will not be sparse", self.rho + self.kappa)

    @property
    def n_rows(self) -> int:
        return int(np.floor(self.s**self.rho))

    @property
    def n_cols(self) -> int:
        return int(np.floor(self.s**self.kappa))

    @property
    def base_probability(self) -> float:
        """S / (RC), the smallest inclusion probability."""
        return self.s / (self.n_rows * self.n_cols)

    @property
    def n_features(self) -> int:
        return len(self.beta_true)


@dataclass(frozen=True)
class Pattern:
    """Observed cells of a sampled pattern with empty levels removed."""

    row_of: np.ndarray
    col_of: np.ndarray
    n_rows: int
    n_cols: int
    row_levels: np.ndarray
    col_levels: np.ndarray

    @property
    def n_obs(self) -> int:
        return int(self.row_of.shape[0])


@dataclass(frozen=True)
class SimTruth:
    """Generating values, with effects for the levels that were kept."""

    beta: np.ndarray
    sigma_a: float
    sigma_b: float
    a: np.ndarray
    b: np.ndarray

    def as_dict(self, levels: LevelMaps) -> Dict[str, object]:
        return {
            "beta": [float(v) for v in self.beta],
            "sigma_a": self.sigma_a,
            "sigma_b": self.sigma_b,
            "a": dict(zip(levels.row_levels, (float(v) for v in self.a))),
            "b": dict(zip(levels.col_levels, (float(v) for v in self.b))),
        }


@dataclass(frozen=True)
class SimulatedData:
    design: CrossedDesign
    levels: LevelMaps
    truth: SimTruth
    config: Optional[SimConfig] = field(default=None)


def inclusion_factors(config: SimConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column multipliers u_i, v_j uniform on [1, sqrt(upsilon)]."""
    if config.upsilon == 1.0:
        return np.ones(config.n_rows), np.ones(config.n_cols)
    top = np.sqrt(config.upsilon)
    return rng.uniform(1.0, top, config.n_rows), rng.uniform(1.0, top, config.n_cols)


def _skip_sample(n_cells: int, p_max: float, rng: np.random.Generator) -> np.ndarray:
    chunk = int(1.2 * n_cells * p_max) + 64
    found = []
    position = -1
    while True:
        cells = position + np.cumsum(rng.geometric(p_max, size=chunk))
        found.append(cells[cells < n_cells])
        if cells[-1] >= n_cells:
            break
        position = int(cells[-1])
    return np.concatenate(found)


def sample_pattern(config: SimConfig, rng: RngLike = None) -> Pattern:
    """
    Sample which cells are observed.

    Sparse configurations are drawn by geometric skipping over the flattened
    R x C grid at the largest inclusion probability, then thinned to each
    cell's own probability; the grid itself is never allocated. Rows and
    columns that received no observation are dropped.

    Args:
        config: Simulation parameters
        rng: Generator or seed; ``config.seed`` when omitted

    Returns:
        Pattern with cells in row-major order
    """
    rng = np.random.default_rng(config.seed if rng is None else rng)
    n_rows, n_cols = config.n_rows, config.n_cols
    u, v = inclusion_factors(config, rng)
    p_max = config.base_probability * config.upsilon

    if p_max < SKIP_THRESHOLD:
        cells = _skip_sample(n_rows * n_cols, p_max, rng)
        rows, cols = np.divmod(cells, n_cols)
        if config.upsilon > 1.0:
            accept = rng.random(cells.shape[0]) < config.base_probability * u[rows] * v[cols] / p_max
            rows, cols = rows[accept], cols[accept]
    else:
        probabilities = config.base_probability * np.outer(u, v)
        rows, cols = np.nonzero(rng.random((n_rows, n_cols)) < probabilities)

    if rows.shape[0] == 0:
        raise DesignError(f"No cells observed at S={config.s}; the configuration is degenerate")

    row_of, col_of, row_levels, col_levels = compact_pattern(rows, cols)
    logger.debug(
        "Sampled N=%d cells over R=%d/%d rows and C=%d/%d columns",
        rows.shape[0],
        len(row_levels),
        n_rows,
        len(col_levels),
        n_cols,
    )
    return Pattern(row_of, col_of, len(row_levels), len(col_levels), row_levels, col_levels)


def gen_features(n_obs: int, p: int, ar_gamma: float, rng: RngLike = None) -> np.ndarray:
    """
    Intercept column followed by p - 1 Gaussian AR(1) features.

    Columns k and l have correlation ar_gamma ** |k - l|.
    """
    if p < 1:
        raise ConfigError("p counts the intercept and must be at least 1")
    if not -1 < ar_gamma < 1:
        raise ConfigError(f"ar_gamma must lie in (-1, 1), got {ar_gamma}")
    rng = np.random.default_rng(rng)
    intercept = np.ones((n_obs, 1))
    if p == 1:
        return intercept
    corr = linalg.toeplitz(ar_gamma ** np.arange(p - 1))
    chol = linalg.cholesky(corr, lower=True)
    return np.hstack([intercept, rng.standard_normal((n_obs, p - 1)) @ chol.T])


def gen_response(
    pattern: Pattern,
    x: np.ndarray,
    beta_true: Sequence[float],
    sigma_a: float,
    sigma_b: float,
    rng: RngLike = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw random effects and threshold the latent logistic variable.

    Returns:
        Tuple of (y, a, b) with y = 1 exactly when x'beta + a_i + b_j + e_ij > 0
    """
    rng = np.random.default_rng(rng)
    a = rng.normal(0.0, sigma_a, pattern.n_rows)
    b = rng.normal(0.0, sigma_b, pattern.n_cols)
    eta = x @ np.asarray(beta_true, dtype=np.float64) + a[pattern.row_of] + b[pattern.col_of]
    y = (eta + rng.logistic(size=pattern.n_obs) > 0).astype(np.float64)
    return y, a, b


def replicate_rng(seed: int, replicate: Optional[int] = None) -> np.random.Generator:
    """Independent stream per (seed, replicate)."""
    return np.random.default_rng(seed if replicate is None else [seed, replicate])


def simulate(config: SimConfig, replicate: Optional[int] = None) -> SimulatedData:
    """
    Sample a pattern, features and responses in one reproducible stream.

    Level keys are ``r000017``-style, zero padded so that sorting the keys
    reproduces the generator's order.
    """
    rng = replicate_rng(config.seed, replicate)
    pattern = sample_pattern(config, rng)
    x = gen_features(pattern.n_obs, config.n_features, config.ar_gamma, rng)
    y, a, b = gen_response(pattern, x, config.beta_true, config.sigma_a, config.sigma_b, rng)

    feature_names = ("intercept",) + tuple(f"x{k}" for k in range(1, config.n_features))
    design = CrossedDesign(pattern.row_of, pattern.col_of, y, x, pattern.n_rows, pattern.n_cols, feature_names)
    levels = LevelMaps(
        row_levels=tuple(level_names("r", pattern.row_levels, len(str(config.n_rows - 1)))),
        col_levels=tuple(level_names("c", pattern.col_levels, len(str(config.n_cols - 1)))),
        feature_names=feature_names,
    )
    truth = SimTruth(
        beta=np.asarray(config.beta_true),
        sigma_a=config.sigma_a,
        sigma_b=config.sigma_b,
        a=a,
        b=b,
    )
    logger.info("Simulated S=%g: N=%d, R=%d, C=%d", config.s, design.n_obs, design.n_rows, design.n_cols)
    return SimulatedData(design=design, levels=levels, truth=truth, config=config)


def true_weights(design: CrossedDesign, truth: SimTruth) -> np.ndarray:
    """Population weights pi(eta)(1 - pi(eta)) at the generating parameters."""
    eta = design.x @ truth.beta + truth.a[design.row_of] + truth.b[design.col_of]
    return links.variance(eta)
