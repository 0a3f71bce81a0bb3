"""Twenty hand-crafted per-series features and the three input layouts.

Fifteen temporal features describe how the series moves, five plain
statistics describe its level and spread.  The order of ``FEATURE_NAMES`` is
fixed and shared by every model and explanation.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

FEATURE_NAMES = (
    "autocorr_lag1", "centroid", "mean_abs_diff", "mean_diff", "median_abs_diff",
    "median_diff", "sum_abs_diff", "zero_cross_rate", "slope", "abs_energy",
    "area_under_curve", "entropy", "peak_to_peak", "pos_turning", "neg_turning",
    "max", "min", "mean", "variance", "std",
)
N_FEATURES = len(FEATURE_NAMES)
CONFIGS = ("default", "feat_only", "with_feats")


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a * a).sum() * (b * b).sum())
    if den == 0:
        return 0.0
    return float((a * b).sum() / den)


def _entropy(x, bins=10):
    if x.max() == x.min():
        return 0.0
    counts, _ = np.histogram(x, bins=bins)
    p = counts[counts > 0] / x.size
    return float(-(p * np.log(p)).sum())


def extract_features(x) -> np.ndarray:
    """Return the 20 feature values of ``x`` in ``FEATURE_NAMES`` order."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise ValueError("feature extraction needs a 1-D series of length >= 3")
    if not np.all(np.isfinite(x)):
        raise ValueError("feature extraction needs finite values")
    T = x.size
    t = np.arange(T, dtype=float)
    dx = np.diff(x)
    adx = np.abs(dx)
    energy = float((x * x).sum())

    centered = x - x.mean()
    crossings = int(np.count_nonzero(centered[:-1] * centered[1:] < 0))
    tc = t - t.mean()
    slope = float((tc * centered).sum() / (tc * tc).sum())

    mid, left, right = x[1:-1], x[:-2], x[2:]
    variance = float((centered * centered).mean())

    return np.array([
        _pearson(x[:-1], x[1:]),
        float((t * x * x).sum() / energy) if energy > 0 else 0.0,
        float(adx.mean()),
        float(dx.mean()),
        float(np.median(adx)),
        float(np.median(dx)),
        float(adx.sum()),
        crossings / (T - 1),
        slope,
        energy,
        float(((x[:-1] + x[1:]) / 2.0).sum()),
        _entropy(x),
        float(x.max() - x.min()),
        float(np.count_nonzero((left < mid) & (mid > right))),
        float(np.count_nonzero((left > mid) & (mid < right))),
        float(x.max()),
        float(x.min()),
        float(x.mean()),
        variance,
        float(np.sqrt(variance)),
    ])


def feature_matrix(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.stack([extract_features(row) for row in values])


def concat_config(x, f, config: str) -> np.ndarray:
    """Model input for one series under ``config``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if config == "default":
        return x.copy()
    if config == "feat_only":
        return f.copy()
    if config == "with_feats":
        return np.concatenate([x, f])
    raise ValueError(f"unknown feature configuration {config!r}; expected one of {CONFIGS}")


def position_names(T: int, config: str) -> list:
    """Name of every input position: ``t{i}`` for timesteps, the feature name otherwise."""
    steps = [f"t{i}" for i in range(T)]
    if config == "default":
        return steps
    if config == "feat_only":
        return list(FEATURE_NAMES)
    if config == "with_feats":
        return steps + list(FEATURE_NAMES)
    raise ValueError(f"unknown feature configuration {config!r}; expected one of {CONFIGS}")


def n_time_positions(T: int, config: str) -> int:
    return 0 if config == "feat_only" else T


def build_inputs(values, config: str) -> np.ndarray:
    """Stack ``concat_config`` over every row of ``values``."""
    values = np.asarray(values, dtype=float)
    if config == "default":
        return values.copy()
    F = feature_matrix(values)
    return np.stack([concat_config(x, f, config) for x, f in zip(values, F)])


def write_feature_csv(ids, F, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *FEATURE_NAMES])
        for i, row in zip(ids, F):
            w.writerow([i, *(repr(float(v)) for v in row)])
