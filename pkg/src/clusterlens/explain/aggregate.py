"""Turning per-sample attributions into global, per-cluster and windowed importances."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import spearmanr


def _stack(attributions) -> np.ndarray:
    rows = [np.asarray(getattr(a, "values", a), dtype=float) for a in attributions]
    if not rows:
        raise ValueError("need at least one attribution")
    p = rows[0].size
    if any(r.size != p for r in rows):
        raise ValueError("attributions have different lengths")
    return np.stack(rows)


def aggregate_global(attributions) -> np.ndarray:
    """Mean absolute attribution per position (absolute value first, then mean)."""
    return np.abs(_stack(attributions)).mean(axis=0)


def aggregate_cluster(attributions, labels, cluster):
    """Absolute attributions of the members of ``cluster`` and their mean curve."""
    A = _stack(attributions)
    labels = np.asarray(labels)
    if labels.size != A.shape[0]:
        raise ValueError("one label per attribution is required")
    members = np.abs(A[labels == cluster])
    if members.shape[0] == 0:
        raise ValueError(f"cluster {cluster} has no members")
    return members, members.mean(axis=0)


def window_means(values, window: int = 5) -> np.ndarray:
    """Mean of each consecutive disjoint window; the last window may be shorter."""
    if window < 1:
        raise ValueError("window must be at least 1")
    v = np.asarray(values, dtype=float)
    return np.array([v[s:s + window].mean() for s in range(0, v.size, window)])


def window_average(values, window: int = 5) -> np.ndarray:
    """Replace every position by the mean of its window."""
    v = np.asarray(values, dtype=float)
    means = window_means(v, window)
    return np.repeat(means, window)[: v.size]


def n_windows(p_time: int, window: int = 5) -> int:
    return math.ceil(p_time / window)


def rank_agreement(a, b, k: int) -> dict:
    """Spearman correlation of two importance vectors and Jaccard overlap of their top-k sets.

    A constant vector has no ranking; Spearman is then reported as 0 with
    ``spearman_defined`` set to False.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("importance vectors must be 1-D and of equal length")
    p = a.size
    if p < 2:
        raise ValueError("need at least two positions")
    if not 1 <= k <= p:
        raise ValueError("k must lie in [1, p]")
    defined = bool(np.ptp(a) > 0 and np.ptp(b) > 0)
    rho = float(spearmanr(a, b).statistic) if defined else 0.0
    top_a = set(np.argsort(-a, kind="stable")[:k].tolist())
    top_b = set(np.argsort(-b, kind="stable")[:k].tolist())
    jac = len(top_a & top_b) / len(top_a | top_b)
    return {"spearman": rho, "topk_jaccard": jac, "spearman_defined": defined}
