"""Small Monte Carlo reporting helpers.

Monte Carlo comparisons in this package always carry a confidence interval,
never a bare mean.
"""

from __future__ import annotations

import numpy as np
from scipy import stats as sps


def mean_ci(samples, level: float = 0.99) -> tuple[float, float]:
    """Sample mean and normal-approximation CI half-width at ``level``."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("no samples")
    m = float(x.mean())
    if x.size == 1:
        return m, float("inf")
    se = float(x.std(ddof=1)) / np.sqrt(x.size)
    z = float(sps.norm.ppf(0.5 + level / 2.0))
    return m, z * se


def sign_with_tol(x: float, tol: float) -> str:
    if x > tol:
        return "positive"
    if x < -tol:
        return "negative"
    return "neutral"
