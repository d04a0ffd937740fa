"""Handcrafted statistical baseline features.

Layout of the 102-long vector:

* 72 statistics, 12 per signal in channel order (acc x/y/z, gyro x/y/z):
  mean, min, max, variance, excess kurtosis, skewness, and the 30..80%
  quantiles in 10% steps.
* 30 correlations, one (Pearson, Kendall tau-b) pair for each of the 15
  unordered signal pairs in lexicographic order (0,1), (0,2), ..., (4,5).

Moments use population (divide-by-N) estimates. Quantities that are
undefined on a constant signal are reported as 0.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import InvalidInputError

QUANTILES = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
STAT_NAMES = ("mean", "min", "max", "variance", "kurtosis", "skewness") + tuple(
    f"q{int(q * 100)}" for q in QUANTILES
)
SIGNAL_PAIRS = tuple(itertools.combinations(range(6), 2))
NUM_FEATURES = 6 * len(STAT_NAMES) + 2 * len(SIGNAL_PAIRS)


def stat_features(signal) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError("signal must be a non-empty 1-D array")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("signal contains non-finite values")
    mean = x.mean()
    centered = x - mean
    var = np.mean(centered**2)
    if var > 1e-300 and np.ptp(x) > 0:
        skew = np.mean(centered**3) / var**1.5
        kurt = np.mean(centered**4) / var**2 - 3.0
    else:
        var, skew, kurt = 0.0, 0.0, 0.0
    quantiles = np.quantile(x, QUANTILES)
    return np.concatenate([[mean, x.min(), x.max(), var, kurt, skew], quantiles])


def kendall_tau_b(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    i, j = np.triu_indices(a.size, k=1)
    da = np.sign(a[i] - a[j])
    db = np.sign(b[i] - b[j])
    s = float(np.sum(da * db))  # concordant minus discordant
    n_a = float(np.count_nonzero(da))  # pairs not tied in a
    n_b = float(np.count_nonzero(db))
    if n_a == 0 or n_b == 0:
        return 0.0
    return s / np.sqrt(n_a * n_b)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ca = a - a.mean()
    cb = b - b.mean()
    denom = np.sqrt(np.dot(ca, ca) * np.dot(cb, cb))
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(ca, cb) / denom, -1.0, 1.0))


def correlation_features(a, b) -> tuple[float, float]:
    """Pearson r and Kendall tau-b; both 0 if either input is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise InvalidInputError(f"inputs must be 1-D of equal length, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise InvalidInputError("need at least 2 points")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0, 0.0
    return pearson(a, b), kendall_tau_b(a, b)


def extract_handcrafted(session_signals) -> np.ndarray:
    """Build the 102-long feature vector from six resampled signals."""
    sig = np.asarray(session_signals, dtype=np.float64)
    if sig.ndim != 2 or sig.shape[0] != 6:
        raise InvalidInputError(f"expected 6 signals, got shape {sig.shape}")
    stats = [stat_features(row) for row in sig]
    corrs = [correlation_features(sig[p], sig[q]) for p, q in SIGNAL_PAIRS]
    return np.concatenate([np.concatenate(stats), np.asarray(corrs).ravel()])


def feature_names() -> list[str]:
    names = [f"s{c}_{stat}" for c in range(6) for stat in STAT_NAMES]
    for p, q in SIGNAL_PAIRS:
        names += [f"pearson_{p}{q}", f"kendall_{p}{q}"]
    return names
