"""Least-squares power-law fits on log-log axes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    slope: float
    slope_stderr: float
    intercept: float
    r_squared: float
    n_points: int

    def as_row(self) -> dict:
        return {"slope": self.slope, "slope_stderr": self.slope_stderr,
                "intercept": self.intercept, "r_squared": self.r_squared,
                "n_points": self.n_points}


def loglog_fit(x, y) -> FitResult:
    """Ordinary least squares of log10(y) on log10(x).

    slope_stderr is the usual OLS estimate sqrt(SSR/(n-2)/Sxx); with two
    points it is reported as 0 and r_squared as 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-d arrays of equal length")
    if x.shape[0] < 3:
        raise FitError("need at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("log-log fit needs strictly positive data")
    lx, ly = np.log10(x), np.log10(y)
    n = lx.shape[0]
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if sxx == 0:
        raise FitError("x values are all identical")
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (slope * lx + intercept)
    ssr = float(np.sum(resid**2))
    syy = float(np.sum((ly - ly.mean()) ** 2))
    stderr = float(np.sqrt(ssr / (n - 2) / sxx)) if n > 2 else 0.0
    r2 = 1.0 - ssr / syy if syy > 0 else 1.0
    return FitResult(slope=slope, slope_stderr=stderr, intercept=intercept,
                     r_squared=float(r2), n_points=n)
