"""Monte Carlo estimates and log-log power-law fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EstimationError, FitError

KURTOSIS_WARN = 100.0


@dataclass(frozen=True)
class Estimate:
    point: float
    standard_error: float
    sample_count: int

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.point - k * self.standard_error, self.point + k * self.standard_error


@dataclass(frozen=True)
class PowerLawFit:
    """y ~ exp(intercept) * x^exponent, fitted on logs."""

    exponent: float
    intercept: float
    r_squared: float

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.exponent


def _samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise EstimationError("need at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise EstimationError("samples must be finite")
    return x


def mean_ci(samples: Sequence[float]) -> Estimate:
    """Sample mean with standard error sd / sqrt(N) (sd with N - 1)."""
    x = _samples(samples)
    return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))


def variance_estimate(samples: Sequence[float]) -> Estimate:
    """Unbiased sample variance with its large-sample standard error.

    SE^2 = (m4 - s^4 (N - 3)/(N - 1)) / N, with m4 the fourth central moment.
    """
    x = _samples(samples)
    n = x.size
    d = x - x.mean()
    s2 = float(np.dot(d, d) / (n - 1))
    m4 = float(np.mean(d ** 4))
    var_se2 = max(m4 - s2 * s2 * (n - 3) / (n - 1), 0.0) / n
    return Estimate(s2, math.sqrt(var_se2), n)


def tail_prob(samples: Sequence[float], threshold: float) -> Estimate:
    """Fraction of samples with |x| >= threshold, binomial standard error."""
    x = _samples(samples)
    p = float(np.mean(np.abs(x) >= threshold))
    return Estimate(p, math.sqrt(p * (1 - p) / x.size), int(x.size))


def empirical_lp_norm(samples: Sequence[float], p: float, center: float = 0.0) -> Estimate:
    """(mean |x - center|^p)^(1/p), with a delta-method standard error.

    Warns when |x - center|^p has kurtosis above 100: its mean then
    converges slowly and the standard error is unreliable.
    """
    if not p >= 1:
        raise EstimationError("p must be at least 1")
    x = _samples(samples)
    y = np.abs(x - center) ** p
    moment = mean_ci(y)
    sd = y.std()
    if sd > 0:
        kurt = float(np.mean((y - y.mean()) ** 4) / sd ** 4)
        if kurt > KURTOSIS_WARN:
            warnings.warn(f"|x - c|^p has kurtosis {kurt:.0f}; L^p estimate converges slowly",
                          RuntimeWarning, stacklevel=2)
    norm = moment.point ** (1.0 / p)
    se = norm / (p * moment.point) * moment.standard_error if moment.point > 0 else 0.0
    return Estimate(float(norm), float(se), moment.sample_count)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line y = a + b x; returns (slope, intercept, r^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3 or x.size != y.size:
        raise FitError("need at least 3 (x, y) pairs")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise FitError("x values must not all be equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return slope, intercept, r2


def powerlaw_fit(points: Sequence[tuple[float, float]]) -> PowerLawFit:
    """Ordinary least squares of log y on log x."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise FitError("need at least 3 points")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise FitError("power-law fit needs strictly positive values")
    slope, intercept, r2 = linear_fit(np.log(pts[:, 0]), np.log(pts[:, 1]))
    return PowerLawFit(slope, intercept, r2)


def effective_time(t: float, vertex_count: float) -> float:
    """t_* = min(t, n^2), or t itself on an infinite graph."""
    if not t >= 0:
        raise EstimationError("t must be nonnegative")
    if math.isinf(vertex_count):
        return float(t)
    return float(min(t, float(vertex_count) ** 2))
