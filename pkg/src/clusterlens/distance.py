"""Dissimilarity kernels and pairwise distance matrices.

Three metrics are available: Euclidean, dynamic time warping (squared local
cost, square root of the accumulated cost, optional Sakoe-Chiba band) and a
movement-pattern distance (MPBD) that compares the directions of consecutive
moves of two series.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

METRIC_KINDS = ("euclidean", "dtw", "mpbd")


@dataclass(frozen=True)
class Metric:
    kind: str = "euclidean"
    band: Optional[int] = None
    eps: float = 1e-8
    w_same: float = 0.0
    w_one: float = 0.5
    w_opp: float = 1.0

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric {self.kind!r}; expected one of {METRIC_KINDS}")
        if self.band is not None and self.band < 0:
            raise ValueError("DTW band must be non-negative")
        if self.eps < 0:
            raise ValueError("MPBD dead-zone must be non-negative")
        if not 0 <= self.w_same <= self.w_one <= self.w_opp:
            raise ValueError("MPBD weights must satisfy 0 <= w_same <= w_one <= w_opp")

    def descriptor(self) -> dict:
        if self.kind == "euclidean":
            return {"kind": "euclidean"}
        if self.kind == "dtw":
            return {"kind": "dtw", "band": self.band}
        return {"kind": "mpbd", "eps": self.eps, "w_same": self.w_same,
                "w_one": self.w_one, "w_opp": self.w_opp}

    @classmethod
    def from_descriptor(cls, desc) -> "Metric":
        if isinstance(desc, str):
            return cls(kind=desc)
        return cls(**desc)


def _as_series(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return x


def euclidean(x, y) -> float:
    x, y = _as_series(x, "x"), _as_series(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return float(np.sqrt(np.sum((x - y) ** 2)))


@njit(cache=True, nogil=True)
def _dtw_cost(x, y, band):
    n, m = x.size, y.size
    inf = np.inf
    prev = np.full(m, inf)
    cur = np.full(m, inf)
    for i in range(n):
        lo = 0
        hi = m - 1
        if band >= 0:
            lo = max(0, i - band)
            hi = min(m - 1, i + band)
        for j in range(m):
            cur[j] = inf
        for j in range(lo, hi + 1):
            c = (x[i] - y[j]) ** 2
            if i == 0 and j == 0:
                cur[j] = c
                continue
            best = inf
            if i > 0 and prev[j] < best:
                best = prev[j]
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
            if i > 0 and j > 0 and prev[j - 1] < best:
                best = prev[j - 1]
            cur[j] = c + best
        prev, cur = cur, prev
    return prev[m - 1]


def dtw(x, y, band: Optional[int] = None) -> float:
    """DTW distance with steps (1,0), (0,1), (1,1) and squared local cost."""
    x, y = _as_series(x, "x"), _as_series(y, "y")
    if x.size == 0 or y.size == 0:
        raise ValueError("DTW needs non-empty series")
    if band is not None:
        if band < 0:
            raise ValueError("band must be non-negative")
        if abs(x.size - y.size) > band:
            raise ValueError(
                f"band {band} cannot align series of lengths {x.size} and {y.size}")
    cost = _dtw_cost(x, y, -1 if band is None else int(band))
    return float(np.sqrt(cost))


@njit(cache=True, nogil=True)
def _mpbd(x, y, eps, w_same, w_one, w_opp):
    total = 0.0
    count = 0
    for t in range(x.size - 1):
        dx = x[t + 1] - x[t]
        dy = y[t + 1] - y[t]
        sx = 1 if dx > eps else (-1 if dx < -eps else 0)
        sy = 1 if dy > eps else (-1 if dy < -eps else 0)
        if sx == 0 and sy == 0:
            continue
        count += 1
        if sx == 0 or sy == 0:
            total += w_one
        elif sx == sy:
            total += w_same
        else:
            total += w_opp
    if count == 0:
        return 0.0
    return total / count


def mpbd(x, y, m: Optional[Metric] = None) -> float:
    """Movement-pattern distance: mean per-move penalty over steps where either series moves.

    A step costs ``w_same`` when both series move the same way, ``w_opp``
    when they move in opposite directions and ``w_one`` when only one moves.
    Moves smaller than ``eps`` in magnitude count as no move.
    """
    m = m or Metric(kind="mpbd")
    x, y = _as_series(x, "x"), _as_series(y, "y")
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("MPBD needs series of length >= 2")
    return float(_mpbd(x, y, m.eps, m.w_same, m.w_one, m.w_opp))


def kernel(m: Metric):
    """Return a two-argument distance function for ``m``."""
    if m.kind == "euclidean":
        return euclidean
    if m.kind == "dtw":
        return lambda x, y: dtw(x, y, m.band)
    return lambda x, y: mpbd(x, y, m)


@dataclass
class DistanceMatrix:
    values: np.ndarray
    ids: list
    metric: Metric

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.ids)
        if self.values.shape != (n, n):
            raise ValueError("distance matrix shape does not match ids")

    def to_csv(self, path) -> None:
        """Write ids as the header and the lower triangle (diagonal included) row by row."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["#metric", json.dumps(self.metric.descriptor(), sort_keys=True)])
            w.writerow(self.ids)
            for i in range(len(self.ids)):
                w.writerow([repr(float(v)) for v in self.values[i, :i + 1]])

    @classmethod
    def from_csv(cls, path) -> "DistanceMatrix":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        metric = Metric.from_descriptor(json.loads(rows[0][1]))
        ids = rows[1]
        n = len(ids)
        values = np.zeros((n, n))
        for i, row in enumerate(rows[2:2 + n]):
            values[i, :i + 1] = [float(v) for v in row]
        values = values + np.tril(values, -1).T
        return cls(values=values, ids=ids, metric=metric)


def _row(series, i, fn, ids):
    out = np.zeros(i)
    for j in range(i):
        try:
            out[j] = fn(series[i], series[j])
        except ValueError as exc:
            raise ValueError(f"distance({ids[i]}, {ids[j]}): {exc}") from exc
    return out


def pairwise_matrix(c, m: Metric, n_jobs: int = 1) -> DistanceMatrix:
    """Symmetric matrix of ``m`` over every pair of series in ``c``.

    Rows are filled independently (``n_jobs`` threads), so the result does not
    depend on scheduling.
    """
    if not c.fully_observed:
        raise ValueError("pairwise distances need a fully observed collection")
    series = c.values
    n = series.shape[0]
    values = np.zeros((n, n))
    if m.kind == "euclidean":
        # exact per-pair evaluation keeps symmetry bitwise; the Gram trick does not
        for i in range(n):
            values[i, :i] = np.sqrt(np.sum((series[i] - series[:i]) ** 2, axis=1))
    else:
        fn = kernel(m)
        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                rows = list(pool.map(lambda i: _row(series, i, fn, c.ids), range(n)))
        else:
            rows = [_row(series, i, fn, c.ids) for i in range(n)]
        for i, row in enumerate(rows):
            values[i, :i] = row
    values = values + values.T
    return DistanceMatrix(values=values, ids=list(c.ids), metric=m)


def cross_matrix(A, B, m: Metric) -> np.ndarray:
    """Distances between every row of ``A`` and every row of ``B``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if m.kind == "euclidean":
        return np.sqrt(np.maximum(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1), 0.0))
    fn = kernel(m)
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            out[i, j] = fn(A[i], B[j])
    return out


def collection_hash(c) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(list(c.ids)).encode())
    h.update(np.ascontiguousarray(c.values).tobytes())
    h.update(np.ascontiguousarray(c.mask).tobytes())
    return h.hexdigest()


def cached_pairwise(c, m: Metric, cache_dir, n_jobs: int = 1) -> DistanceMatrix:
    """``pairwise_matrix`` backed by an on-disk CSV cache keyed by data and metric."""
    key = hashlib.sha256(
        (collection_hash(c) + json.dumps(m.descriptor(), sort_keys=True)).encode()
    ).hexdigest()[:24]
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"dist_{key}.csv"
    if path.exists():
        return DistanceMatrix.from_csv(path)
    d = pairwise_matrix(c, m, n_jobs=n_jobs)
    d.to_csv(path)
    return d
