"""Explanation sets: per-sample attributions of one model plus their aggregates."""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .aggregate import aggregate_cluster, aggregate_global, window_average, window_means
from .gradients import grad_cam, gradient_shap
from .shapley import Attribution
from .treeshap import treeshap

METHODS = ("treeshap", "gradientshap", "gradcam", "tree_gain")


@dataclass
class ExplanationSet:
    method: str
    names: list
    n_time: int
    attributions: list = field(default_factory=list)
    global_importance: Optional[np.ndarray] = None
    per_cluster: dict = field(default_factory=dict)
    window: int = 5
    windowed: dict = field(default_factory=dict)

    def matrix(self) -> np.ndarray:
        return np.stack([a.values for a in self.attributions])

    def finalize(self, clusters=None, window: int = 5) -> "ExplanationSet":
        """Compute global, per-cluster and windowed aggregates from the attributions."""
        self.window = window
        if self.attributions:
            self.global_importance = aggregate_global(self.attributions)
        if clusters is not None and self.attributions:
            clusters = np.asarray(clusters)
            for c in np.unique(clusters):
                _, mean = aggregate_cluster(self.attributions, clusters, c)
                self.per_cluster[int(c)] = mean
        if self.n_time > 0 and self.global_importance is not None:
            self.windowed = {"global": window_means(self.global_importance[: self.n_time], window)}
            for c, v in self.per_cluster.items():
                self.windowed[c] = window_means(v[: self.n_time], window)
        return self

    def windowed_curve(self, values) -> np.ndarray:
        """``values`` with the time segment window-averaged and feature positions untouched."""
        v = np.asarray(values, dtype=float).copy()
        if self.n_time > 0:
            v[: self.n_time] = window_average(v[: self.n_time], self.window)
        return v

    def to_csv(self, path) -> None:
        clusters = sorted(self.per_cluster)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["position", "global", *[f"cluster_{c}" for c in clusters]])
            for i, name in enumerate(self.names):
                row = [name, _fmt(self.global_importance[i])]
                row += [_fmt(self.per_cluster[c][i]) for c in clusters]
                w.writerow(row)

    def samples_to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "class_index", "base_value", *self.names])
            for a in self.attributions:
                w.writerow([a.sample_id, a.class_index, _fmt(a.base_value),
                            *(_fmt(v) for v in a.values)])


def _fmt(v) -> str:
    return format(float(v), ".12g")


def sample_seed(seed: int, sample_id: str) -> int:
    return int(np.random.SeedSequence([seed, zlib.crc32(str(sample_id).encode())])
               .generate_state(1)[0])


def explain_trees(e, X, ids, names, n_time, clusters=None, window=5) -> ExplanationSet:
    """TreeSHAP of every row for its predicted class."""
    X = np.asarray(X, dtype=float)
    pred = e.predict(X)
    out = ExplanationSet(method="treeshap", names=list(names), n_time=n_time)
    for i, x in enumerate(X):
        out.attributions.append(treeshap(e, x, int(pred[i]), sample_id=str(ids[i])))
    return out.finalize(clusters, window)


def tree_gain_set(e, names, n_time, window=5) -> ExplanationSet:
    from ..trees import gain_importance

    out = ExplanationSet(method="tree_gain", names=list(names), n_time=n_time)
    out.global_importance = gain_importance(e)
    out.window = window
    if n_time > 0:
        out.windowed = {"global": window_means(out.global_importance[:n_time], window)}
    return out


def explain_network(m, X, ids, names, n_time, method, background=None, clusters=None,
                    window=5, n_samples=200, seed=0) -> ExplanationSet:
    """GradientSHAP or Grad-CAM of every row for its predicted class."""
    X = np.asarray(X, dtype=float)
    pred = m.predict(X)
    out = ExplanationSet(method=method, names=list(names), n_time=n_time)
    for i, x in enumerate(X):
        sid = str(ids[i])
        if method == "gradientshap":
            a = gradient_shap(m, x, background, int(pred[i]), n_samples=n_samples,
                              seed=sample_seed(seed, sid), sample_id=sid)
        elif method == "gradcam":
            a = grad_cam(m, x, int(pred[i]), sample_id=sid)
        else:
            raise ValueError(f"unknown network explanation method {method!r}")
        out.attributions.append(a)
    return out.finalize(clusters, window)


__all__ = ["Attribution", "ExplanationSet", "METHODS", "explain_network", "explain_trees",
           "sample_seed", "tree_gain_set"]
