"""
Shared fixtures for the crossfit test suite.

Random instances are built by factory fixtures so each test controls its own
sizes and seed.
"""

from pathlib import Path

import numpy as np
import pytest

from crossfit.data import CrossedDesign
from crossfit.solver import FactorWeights, PwlsProblem
from crossfit.solver.schall import FitState

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def make_design(rng, n_rows, n_cols, n_obs, p=2, intercept=True, y=None):
    """
    Random crossed design in which every row and column level is observed.

    The first max(R, C) cells form a staircase that touches every level; the
    rest are drawn without replacement from the remaining cells.
    """
    n_obs = min(n_obs, n_rows * n_cols)
    span = max(n_rows, n_cols)
    if n_obs < span:
        raise ValueError("Need at least max(R, C) observations to cover every level")

    steps = np.arange(span)
    staircase = (steps % n_rows) * n_cols + steps % n_cols
    others = np.setdiff1d(np.arange(n_rows * n_cols), staircase)
    extra = rng.choice(others, size=n_obs - span, replace=False)
    cells = np.sort(np.concatenate([staircase, extra]))
    row_of, col_of = np.divmod(cells, n_cols)

    features = rng.standard_normal((n_obs, p - 1 if intercept else p))
    x = np.column_stack([np.ones(n_obs), features]) if intercept else features
    if y is None:
        y = (rng.random(n_obs) < 0.5).astype(float)
    return CrossedDesign(row_of, col_of, y, x, n_rows, n_cols)


def make_weights(rng, design, low=0.05, high=0.25):
    return FactorWeights.from_weights(design, rng.uniform(low, high, design.n_obs))


def make_problem(rng, n_rows, n_cols, n_obs, p=3, tol=1e-24, max_sweeps=5000, intercept=True):
    design = make_design(rng, n_rows, n_cols, n_obs, p=p, intercept=intercept)
    weights = make_weights(rng, design)
    z = rng.standard_normal(design.n_obs) * 2.0
    sigma2_a, sigma2_b = rng.uniform(0.2, 2.0, 2)
    return PwlsProblem(design, weights, z, sigma2_a, sigma2_b, tol=tol, max_sweeps=max_sweeps)


def make_state(rng, design, sigma2_a=0.64, sigma2_b=0.16, phi=1.0):
    """A FitState carrying random weights; only w, the variances and phi matter to covariances."""
    state = FitState.initial(design)
    w = rng.uniform(0.05, 0.25, design.n_obs)
    return FitState(
        beta=state.beta,
        a=state.a,
        b=state.b,
        sigma2_a=sigma2_a,
        sigma2_b=sigma2_b,
        phi=phi,
        mu=state.mu,
        w=w,
        zeta=state.zeta,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def design_factory():
    return make_design


@pytest.fixture
def weights_factory():
    return make_weights


@pytest.fixture
def problem_factory():
    return make_problem


@pytest.fixture
def state_factory():
    return make_state


@pytest.fixture
def small_design(rng):
    """5 x 4 design with 15 observations, intercept plus one feature."""
    return make_design(rng, 5, 4, 15, p=2)


@pytest.fixture
def tiny_csv():
    return FIXTURES_DIR / "tiny_design.csv"
