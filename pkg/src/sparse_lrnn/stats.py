"""Prediction-error metrics and zero-crossing tail statistics."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "nmrse",
    "eps_error_timeavg",
    "zero_crossing_distances",
    "kurtosis",
    "loglog_slope",
    "sparsity_fraction",
    "ZeroCrossingStats",
    "crossing_stats",
]


def nmrse(predicted, target):
    """Root-mean-square error divided by the standard deviation of ``target``."""
    o = np.asarray(predicted, dtype=np.float64).ravel()
    x = np.asarray(target, dtype=np.float64).ravel()
    if o.shape != x.shape or x.size < 2:
        raise ValueError("need two equal-length series of at least two samples")
    spread = np.sqrt(np.mean((x - x.mean()) ** 2))
    if spread == 0:
        raise ValueError("constant series has no spread to normalize by")
    return float(np.sqrt(np.mean((o - x) ** 2)) / spread)


def eps_error_timeavg(predicted, target, eps, lam_appr):
    """``lam_appr * sum_t max(0, |o_t - x_t| - eps)``.

    With ``lam_appr = 1/T`` this is the time average of the insensitive loss.
    """
    o = np.asarray(predicted, dtype=np.float64).ravel()
    x = np.asarray(target, dtype=np.float64).ravel()
    if o.shape != x.shape:
        raise ValueError("series lengths differ")
    return float(lam_appr * np.maximum(np.abs(o - x) - eps, 0.0).sum())


def zero_crossing_distances(values):
    """Gaps, in samples, between consecutive sign changes.

    Index ``i`` is a crossing when ``v_i`` and ``v_{i+1}`` differ in sign.
    An exact zero takes the sign of the next nonzero sample (trailing zeros
    take the last nonzero sign). Fewer than two crossings give an empty array.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    s = np.sign(v)
    nz = np.flatnonzero(s)
    if nz.size == 0:
        return np.zeros(0, dtype=np.int64)
    # index of the next nonzero sample at or after each position
    nxt = np.searchsorted(nz, np.arange(v.size))
    nxt = np.minimum(nxt, nz.size - 1)
    s = s[nz[nxt]]
    crossings = np.flatnonzero(s[:-1] != s[1:])
    return np.diff(crossings).astype(np.int64)


def kurtosis(samples):
    """Excess kurtosis ``E[(X - mu)^4] / sigma^4 - 3`` with population moments."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 4:
        raise ValueError("kurtosis needs at least four samples")
    d = x - x.mean()
    var = np.mean(d**2)
    if var == 0:
        raise ValueError("zero variance")
    return float(np.mean(d**4) / var**2 - 3.0)


def loglog_slope(distances):
    """Slope and r^2 of a line through the log-binned distance histogram.

    Bins are ``[2^k, 2^(k+1))``. Each nonempty bin contributes the point
    (log10 of its geometric centre, log10 of count / (total * width)).
    """
    d = np.asarray(distances).ravel()
    if d.size == 0 or d.min() < 1:
        raise ValueError("distances must be positive")
    k = np.floor(np.log2(d)).astype(int)
    counts = np.bincount(k)
    bins = np.flatnonzero(counts)
    if bins.size < 3:
        raise ValueError(f"only {bins.size} nonempty bins; need at least 3")
    lo = 2.0 ** bins
    centre = np.sqrt(lo * 2.0 * lo)
    density = counts[bins] / (d.size * lo)
    lx, ly = np.log10(centre), np.log10(density)
    slope, intercept = np.polyfit(lx, ly, 1)
    fit = slope * lx + intercept
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum((ly - fit) ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def sparsity_fraction(m, threshold):
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    m = np.asarray(m)
    return float(np.mean(np.abs(m) < threshold)) if m.size else 0.0


@dataclass(frozen=True)
class ZeroCrossingStats:
    distances: np.ndarray
    kurtosis: float
    loglog_slope: float
    slope_r2: float


def crossing_stats(values):
    """Crossing distances with their kurtosis and log-log slope (NaN when undefined)."""
    d = zero_crossing_distances(values)
    try:
        kurt = kurtosis(d)
    except ValueError:
        kurt = float("nan")
    try:
        slope, r2 = loglog_slope(d)
    except ValueError:
        slope, r2 = float("nan"), float("nan")
    return ZeroCrossingStats(d, kurt, slope, r2)
