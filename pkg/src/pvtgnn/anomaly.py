"""Residual-based anomaly detection.

Absolute prediction errors are standardised into Z-scores, Tukey fences are
computed on the Z-scores, and points above the upper fence are flagged. Fences
on Z and on the raw residuals select the same points because the Z-transform
is affine with positive slope. Unusually small errors (below the lower fence)
are counted for diagnostics but never flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpread, LengthMismatch, TooFew

IQR_FACTOR = 1.5


def residuals(actual, predicted) -> np.ndarray:
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape:
        raise LengthMismatch(f"actual has shape {a.shape}, predicted {p.shape}")
    return np.abs(a - p)


def zscores(e) -> tuple[np.ndarray, float, float]:
    """Z-scores with the population standard deviation.

    Raises DegenerateSpread when there are fewer than two values or the
    spread is at most 1e-12.
    """
    e = np.asarray(e, dtype=np.float64)
    if e.size < 2:
        raise DegenerateSpread(f"need at least 2 residuals, got {e.size}")
    mu = float(np.mean(e))
    sigma = float(np.sqrt(np.mean((e - mu) ** 2)))
    if sigma <= 1e-12:
        raise DegenerateSpread(f"residual spread {sigma!r} is too small to rank")
    return (e - mu) / sigma, mu, sigma


def quantile(sorted_values: np.ndarray, q: float) -> float:
    """Linear interpolation at position ``q * (n - 1)`` of an ascending array."""
    n = len(sorted_values)
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return float(sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]))


def iqr_bounds(values) -> tuple[float, float, float, float, float]:
    """``(Q1, Q3, iqr, lower, upper)`` with fences at ``Q1 - 1.5 iqr`` and ``Q3 + 1.5 iqr``."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size < 4:
        raise TooFew(f"need at least 4 values for quartiles, got {v.size}")
    q1 = quantile(v, 0.25)
    q3 = quantile(v, 0.75)
    iqr = q3 - q1
    return q1, q3, iqr, q1 - IQR_FACTOR * iqr, q3 + IQR_FACTOR * iqr


def flag_anomalies(z, bounds) -> np.ndarray:
    """``z > upper``, strictly; ``bounds`` is the tuple from :func:`iqr_bounds`."""
    upper = bounds[4]
    return np.asarray(z, dtype=np.float64) > upper


def flag_residuals(e) -> np.ndarray:
    """Upper-fence flags for a residual vector, without building a report."""
    z, _, _ = zscores(e)
    return flag_anomalies(z, iqr_bounds(z))


def box_stats(e) -> dict:
    e = np.sort(np.asarray(e, dtype=np.float64))
    q1, q3, _, lower, upper = iqr_bounds(e)
    return {
        "min": float(e[0]),
        "q1": q1,
        "median": quantile(e, 0.5),
        "q3": q3,
        "max": float(e[-1]),
        "whisker_low": float(e[e >= lower][0]),
        "whisker_high": float(e[e <= upper][-1]),
        "outlier_count": int(np.count_nonzero((e < lower) | (e > upper))),
    }


@dataclass
class AnomalyReport:
    residuals: np.ndarray
    mean: float | None
    std: float | None
    zscores: np.ndarray
    q1: float | None
    q3: float | None
    iqr: float | None
    lower_bound: float | None
    upper_bound: float | None
    flags: np.ndarray
    anomaly_fraction: float
    box_stats: dict
    below_lower_count: int = 0
    diagnostic: str | None = None
    timestamps: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.residuals)

    def summary(self) -> dict:
        """JSON-ready summary (no per-point arrays)."""
        return {
            "n": self.n,
            "mean_residual": self.mean,
            "std_residual": self.std,
            "q1": self.q1,
            "q3": self.q3,
            "iqr": self.iqr,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "anomaly_count": int(np.count_nonzero(self.flags)),
            "anomaly_fraction": self.anomaly_fraction,
            "below_lower_count": self.below_lower_count,
            "box_stats": self.box_stats,
            "diagnostic": self.diagnostic,
        }


def detect(actual, predicted, timestamps=None) -> AnomalyReport:
    """Residuals, Z-scores, IQR fences on the Z-scores, upper-fence flags.

    Constant residuals (e.g. perfect predictions) give a report with no flags
    and a ``diagnostic`` message instead of raising.
    """
    e = residuals(actual, predicted)
    ts = list(timestamps) if timestamps is not None else []
    stats = box_stats(e) if e.size >= 4 else {}
    try:
        z, mu, sigma = zscores(e)
    except DegenerateSpread as exc:
        return AnomalyReport(
            residuals=e, mean=float(np.mean(e)) if e.size else None, std=None, zscores=np.zeros(0),
            q1=None, q3=None, iqr=None, lower_bound=None, upper_bound=None,
            flags=np.zeros(e.size, dtype=bool), anomaly_fraction=0.0, box_stats=stats,
            diagnostic=f"DegenerateSpread: {exc}", timestamps=ts,
        )
    bounds = iqr_bounds(z)
    q1, q3, iqr, lower, upper = bounds
    flags = flag_anomalies(z, bounds)
    return AnomalyReport(
        residuals=e, mean=mu, std=sigma, zscores=z, q1=q1, q3=q3, iqr=iqr,
        lower_bound=lower, upper_bound=upper, flags=flags,
        anomaly_fraction=float(np.count_nonzero(flags)) / e.size,
        box_stats=stats, below_lower_count=int(np.count_nonzero(z < lower)), timestamps=ts,
    )
