"""K-means, PAM k-medoids, internal validity indices and choice of k."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .distance import DistanceMatrix, Metric


@dataclass
class ClusteringResult:
    k: int
    assignments: np.ndarray
    inertia: float
    metric: Metric
    iterations: int
    ids: list
    centers: Optional[np.ndarray] = None
    medoids: Optional[np.ndarray] = None
    history: list = field(default_factory=list)
    algorithm: str = "kmeans"

    @property
    def medoid_ids(self):
        if self.medoids is None:
            return None
        return [self.ids[m] for m in self.medoids]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def to_files(self, csv_path, json_path, validity: Optional["ValidityScores"] = None):
        with Path(csv_path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "cluster"])
            for i, a in zip(self.ids, self.assignments):
                w.writerow([i, int(a)])
        side = {
            "algorithm": self.algorithm,
            "k": self.k,
            "inertia": float(self.inertia),
            "iterations": self.iterations,
            "metric": self.metric.descriptor(),
        }
        if self.medoids is not None:
            side["medoids"] = self.medoid_ids
        if validity is not None:
            side["validity"] = validity.as_dict()
        Path(json_path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


@dataclass
class ValidityScores:
    silhouette: float
    calinski_harabasz: float
    davies_bouldin: float
    inertia: float

    def as_dict(self) -> dict:
        return {"silhouette": self.silhouette, "calinski_harabasz": self.calinski_harabasz,
                "davies_bouldin": self.davies_bouldin, "inertia": self.inertia}


@dataclass(frozen=True)
class KPlan:
    k_L: int
    k_M: int
    k_H: int

    def as_tuple(self):
        return (self.k_L, self.k_M, self.k_H)


def _matrix(c):
    values = getattr(c, "values", c)
    if getattr(c, "mask", None) is not None and not np.all(c.mask):
        raise ValueError("clustering needs a fully observed collection")
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _ids(c, n):
    ids = getattr(c, "ids", None)
    return list(ids) if ids is not None else [f"s{i}" for i in range(n)]


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def wcss(X, assignments, centers) -> float:
    X = np.asarray(X, dtype=float)
    return float(((X - centers[assignments]) ** 2).sum())


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def _repair_empty(X, labels, centers, k):
    """Give each empty cluster the point farthest from its current center."""
    labels = labels.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        own = ((X - centers[labels]) ** 2).sum(axis=1)
        # a point must not be taken from a cluster it is the only member of
        counts = np.bincount(labels, minlength=k)
        own[counts[labels] <= 1] = -1.0
        far = int(np.argmax(own))
        labels[far] = j
        centers[j] = X[far]
    return labels


def kmeans_fit(c, k: int, seed: int = 0, max_iter: int = 300) -> ClusteringResult:
    """Lloyd's k-means with k-means++ seeding.

    ``history`` holds the WCSS after every assignment and every update step,
    in order, so the monotone decrease can be audited.
    """
    X = _matrix(c)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of series ({n})")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(X, k, rng)
    history = []
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        new_labels = np.argmin(_sq_dists(X, centers), axis=1)
        new_labels = _repair_empty(X, new_labels, centers, k)
        history.append(wcss(X, new_labels, centers))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
        history.append(wcss(X, labels, centers))
    labels = new_labels
    return ClusteringResult(
        k=k, assignments=labels, inertia=wcss(X, labels, centers),
        metric=Metric("euclidean"), iterations=it, ids=_ids(c, n),
        centers=centers, history=history, algorithm="kmeans",
    )


def _dmatrix(d):
    if isinstance(d, DistanceMatrix):
        return d.values, list(d.ids), d.metric
    D = np.asarray(d, dtype=float)
    return D, [f"s{i}" for i in range(D.shape[0])], Metric("euclidean")


def _nearest_two(D, medoids):
    sub = D[:, medoids]
    order = np.argsort(sub, axis=1, kind="stable")
    nearest = order[:, 0]
    d1 = sub[np.arange(sub.shape[0]), nearest]
    if len(medoids) > 1:
        d2 = sub[np.arange(sub.shape[0]), order[:, 1]]
    else:
        d2 = np.full(sub.shape[0], np.inf)
    return nearest, d1, d2


def pam_fit(d, k: int, seed: int = 0, max_swaps: int = 10_000) -> ClusteringResult:
    """Partitioning around medoids (BUILD then steepest-descent SWAP).

    Works on any dissimilarity matrix.  The procedure is deterministic (ties
    go to the lowest index), so ``seed`` does not change the result; it is
    accepted to keep the signature aligned with :func:`kmeans_fit`.
    """
    D, ids, metric = _dmatrix(d)
    n = D.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of series ({n})")

    # BUILD
    medoids = [int(np.argmin(D.sum(axis=1)))]
    nearest_d = D[:, medoids[0]].copy()
    for _ in range(1, k):
        gain = np.maximum(nearest_d[:, None] - D, 0.0).sum(axis=0)
        gain[medoids] = -np.inf
        nxt = int(np.argmax(gain))
        medoids.append(nxt)
        nearest_d = np.minimum(nearest_d, D[:, nxt])

    medoids = np.array(medoids)
    cost = float(nearest_d.sum())
    history = [cost]
    tol = 1e-12 * max(1.0, abs(cost))
    swaps = 0
    while swaps < max_swaps:
        nearest, d1, d2 = _nearest_two(D, medoids)
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        best = (cost, -1, -1)
        for slot in range(k):
            others = np.where(nearest == slot, d2, d1)
            cand = np.minimum(D, others[:, None]).sum(axis=0)
            cand[is_medoid] = np.inf
            o = int(np.argmin(cand))
            if cand[o] < best[0] - tol:
                best = (float(cand[o]), slot, o)
        if best[1] < 0:
            break
        medoids[best[1]] = best[2]
        cost = float(D[:, medoids].min(axis=1).sum())
        history.append(cost)
        swaps += 1

    assignments, d1, _ = _nearest_two(D, medoids)
    return ClusteringResult(
        k=k, assignments=assignments, inertia=float(d1.sum()), metric=metric,
        iterations=swaps, ids=ids, medoids=medoids, history=history, algorithm="kmedoids",
    )


def silhouette_samples(D, labels, k=None) -> np.ndarray:
    """Per-series silhouette from a full distance matrix; singletons score 0."""
    D = np.asarray(D, dtype=float)
    labels = np.asarray(labels, dtype=int)
    k = int(labels.max()) + 1 if k is None else k
    n = D.shape[0]
    sums = np.zeros((n, k))
    for j in range(k):
        sums[:, j] = D[:, labels == j].sum(axis=1)
    counts = np.bincount(labels, minlength=k).astype(float)
    own = counts[labels]
    a = sums[np.arange(n), labels] / np.maximum(own - 1, 1)
    mean_other = sums / counts[None, :]
    mean_other[np.arange(n), labels] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return s


def _db(sigma, center_dist):
    k = sigma.size
    worst = np.zeros(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if i == j:
                continue
            num = sigma[i] + sigma[j]
            if center_dist[i, j] > 0:
                ratios.append(num / center_dist[i, j])
            else:
                ratios.append(0.0 if num == 0 else np.inf)
        worst[i] = max(ratios)
    return float(worst.mean())


def validity(data, r: ClusteringResult) -> ValidityScores:
    """Silhouette, Calinski-Harabasz, Davies-Bouldin and inertia of ``r``.

    ``data`` is the clustered collection (Euclidean, centroid-based indices) or
    a :class:`DistanceMatrix` (medoid-based indices under the supplied metric).
    """
    labels = np.asarray(r.assignments)
    k = r.k
    n = labels.size
    if k < 2:
        raise ValueError("validity indices need at least 2 clusters")
    if k >= n:
        raise ValueError("validity indices are undefined when k equals the number of series")
    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        raise ValueError("every cluster must be non-empty")

    if isinstance(data, DistanceMatrix):
        if r.medoids is None:
            raise ValueError("distance-matrix validity needs a medoid result")
        D = data.values
        med = np.asarray(r.medoids)
        overall = int(np.argmin(D.sum(axis=1)))
        within_d = D[np.arange(n), med[labels]]
        W = float((within_d ** 2).sum())
        B = float((counts * D[med, overall] ** 2).sum())
        sigma = np.array([within_d[labels == j].mean() for j in range(k)])
        center_dist = D[np.ix_(med, med)]
        inertia = float(r.inertia)
    else:
        X = _matrix(data)
        diff = X[:, None, :] - X[None, :, :]
        D = np.sqrt((diff ** 2).sum(axis=2))
        centroids = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
        grand = X.mean(axis=0)
        within_sq = ((X - centroids[labels]) ** 2).sum(axis=1)
        W = float(within_sq.sum())
        B = float((counts * ((centroids - grand) ** 2).sum(axis=1)).sum())
        sigma = np.array([np.sqrt(within_sq[labels == j]).mean() for j in range(k)])
        center_dist = np.sqrt(((centroids[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2))
        inertia = W

    ch = (B / (k - 1)) / (W / (n - k)) if W > 0 else np.inf
    return ValidityScores(
        silhouette=float(silhouette_samples(D, labels, k).mean()),
        calinski_harabasz=float(ch),
        davies_bouldin=_db(sigma, center_dist),
        inertia=inertia,
    )


def chord_distances(ks, inertias) -> np.ndarray:
    """Distance of each normalised curve point from the first-to-last chord."""
    x = np.asarray(ks, dtype=float)
    y = np.asarray(inertias, dtype=float)
    x = (x - x.min()) / (x.max() - x.min())
    span = y.max() - y.min()
    y = (y - y.min()) / span if span > 0 else np.zeros_like(y)
    x0, y0, x1, y1 = x[0], y[0], x[-1], y[-1]
    norm = math.hypot(x1 - x0, y1 - y0)
    return np.abs((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0) / norm


def suggest_k(ks, inertias) -> int:
    """Elbow of an inertia curve: the interior k farthest from the end-to-end chord."""
    ks = list(ks)
    if len(ks) < 3:
        raise ValueError("the elbow rule needs at least 3 candidate values of k")
    if len(inertias) != len(ks):
        raise ValueError("ks and inertias must have the same length")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("ks must be strictly increasing")
    dist = chord_distances(ks, inertias)[1:-1]
    return int(ks[1 + int(np.argmax(dist))])


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def k_plan(k_M: int) -> KPlan:
    if k_M < 3:
        raise ValueError("the medium number of clusters must be at least 3")
    return KPlan(k_L=round_half_up(0.5 * k_M), k_M=k_M, k_H=2 * k_M)
