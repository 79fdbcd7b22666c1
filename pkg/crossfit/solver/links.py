"""
Logistic link quantities evaluated from the linear predictor.

Everything is computed from zeta with the symmetric form
pi(-zeta) = 1 - pi(zeta), so neither tail loses precision to cancellation.
"""

import numpy as np
from scipy.special import expit


def mean(zeta: np.ndarray) -> np.ndarray:
    """pi(zeta), the logistic CDF."""
    return expit(zeta)


def variance(zeta: np.ndarray) -> np.ndarray:
    """pi(zeta) (1 - pi(zeta))."""
    return expit(zeta) * expit(-zeta)


def residual(y: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """y - pi(zeta), exact in both tails for binary y."""
    return np.where(y == 1.0, expit(-zeta), -expit(zeta))


def second_derivative(zeta: np.ndarray) -> np.ndarray:
    """pi''(zeta) = pi (1 - pi) (1 - 2 pi)."""
    return variance(zeta) * (expit(-zeta) - expit(zeta))

