"""Cluster labels as classification targets.

Clusters become classes: tiny clusters are dropped, the largest one is
downsampled, and three model families (k nearest neighbours, boosted trees,
the FCN) are scored by macro metrics over five seeded stratified splits.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .clustering import round_half_up
from .distance import Metric, cross_matrix
from .neural import FcnArchitecture, fit_fcn
from .trees import fit_gbt

MIN_CLASS_SIZE = 4
MODEL_KINDS = ("knn", "gbt", "fcn")
METRIC_NAMES = ("accuracy", "macro_precision", "macro_recall", "macro_f1")
N_SEEDS = 5

GRIDS = {
    "gbt": {"gamma": [0.0, 1.0, 2.0], "max_depth": [3, 6, 9]},
    "knn": {"n_neighbors": [5, 10, 15], "metric": ["minkowski", "dtw"]},
    "fcn": {"optimizer": ["adam", "sgd"], "lr": [0.01, 0.001, 0.0001],
            "n_layers": [1, 2, 3, 4], "first_filters": [4, 16, 64, 128]},
}

DEFAULTS = {
    "gbt": {"gamma": 0.0, "max_depth": 6},
    "knn": {"n_neighbors": 5, "metric": "minkowski"},
    "fcn": {"optimizer": "adam", "lr": 0.01, "n_layers": 1, "first_filters": 16},
}


# ---------------------------------------------------------------- labels

def filter_clusters(labels, min_size: int = MIN_CLASS_SIZE):
    """Drop classes with fewer than ``min_size`` members and re-index the rest.

    Returns ``(keep, new_labels, mapping)``: the kept sample indices, their
    dense labels, and ``{old label: new label}``.
    """
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    survivors = classes[counts >= min_size]
    if survivors.size < 2:
        raise ValueError(f"only {survivors.size} class(es) have at least {min_size} samples")
    mapping = {c.item(): i for i, c in enumerate(survivors)}
    keep = np.flatnonzero(np.isin(labels, survivors))
    new = np.array([mapping[v.item()] for v in labels[keep]], dtype=int)
    return keep, new, mapping


def downsample_cap(labels) -> int:
    counts = np.bincount(np.asarray(labels, dtype=int))
    counts = counts[counts > 0]
    return int(counts.sum() // counts.size)


def downsample_largest(labels, seed: int = 0) -> np.ndarray:
    """Indices kept after cutting the largest class down to the mean class size."""
    labels = np.asarray(labels, dtype=int)
    counts = np.bincount(labels)
    if np.count_nonzero(counts) < 2:
        raise ValueError("downsampling needs at least two classes")
    v = downsample_cap(labels)
    big = int(np.argmax(counts))  # first maximum, so ties go to the lowest index
    idx = np.arange(labels.size)
    if counts[big] <= v:
        return idx
    members = idx[labels == big]
    chosen = np.random.default_rng(seed).choice(members, size=v, replace=False)
    return np.sort(np.concatenate([idx[labels != big], chosen]))


@dataclass
class ClassTask:
    inputs: np.ndarray
    labels: np.ndarray
    config: str
    k_before: int
    k_after: int
    v: int
    ids: list = field(default_factory=list)
    names: list = field(default_factory=list)
    n_time: int = 0
    mapping: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.k_after


def make_task(inputs, clusters, config: str, seed: int = 0, ids=None, names=None,
              n_time: int = 0) -> ClassTask:
    """Filter and downsample cluster labels into a classification task."""
    inputs = np.asarray(inputs, dtype=float)
    clusters = np.asarray(clusters)
    if inputs.shape[0] != clusters.size:
        raise ValueError("inputs and cluster labels have different lengths")
    ids = list(ids) if ids is not None else [str(i) for i in range(clusters.size)]
    keep, y, mapping = filter_clusters(clusters)
    v = downsample_cap(y)
    sub = downsample_largest(y, seed)
    rows = keep[sub]
    return ClassTask(inputs=inputs[rows], labels=y[sub], config=config,
                     k_before=int(np.unique(clusters).size), k_after=len(mapping), v=v,
                     ids=[ids[i] for i in rows], names=list(names or []), n_time=n_time,
                     mapping=mapping)


def stratified_split(labels, test_fraction: float = 0.3, seed: int = 0):
    """Per-class proportional split with at least one sample on each side."""
    labels = np.asarray(labels, dtype=int)
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        n = members.size
        if n < 2:
            raise ValueError(f"class {c} has a single sample and cannot be split")
        n_test = min(max(round_half_up(n * test_fraction), 1), n - 1)
        members = rng.permutation(members)
        test.append(members[:n_test])
        train.append(members[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


# ---------------------------------------------------------------- knn

def _knn_vote(dist_row, train_labels, K):
    order = np.argsort(dist_row, kind="stable")[:K]  # distance ties -> lower train index
    lab = train_labels[order]
    d = dist_row[order]
    classes = np.unique(lab)
    votes = np.array([np.count_nonzero(lab == c) for c in classes])
    tied = classes[votes == votes.max()]
    if tied.size == 1:
        return int(tied[0])
    sums = np.array([d[lab == c].sum() for c in tied])
    return int(tied[np.flatnonzero(sums == sums.min())[0]])


def _knn_metric(metric: str) -> Metric:
    if metric == "minkowski":
        return Metric("euclidean")
    if metric == "dtw":
        return Metric("dtw")
    raise ValueError(f"unknown KNN metric {metric!r}")


def knn_predict(train_X, train_y, query, K: int = 5, metric: str = "minkowski") -> int:
    """Majority vote of the ``K`` nearest training rows to ``query``.

    Vote ties go to the class with the smaller summed neighbour distance, then
    to the lower class index.
    """
    q = np.atleast_1d(np.asarray(query, dtype=float)).reshape(1, -1)
    return int(knn_predict_many(train_X, train_y, q, K, metric)[0])


def knn_predict_many(train_X, train_y, Q, K: int = 5, metric: str = "minkowski") -> np.ndarray:
    train_X = np.asarray(train_X, dtype=float)
    if train_X.ndim == 1:
        train_X = train_X[:, None]
    train_y = np.asarray(train_y, dtype=int)
    Q = np.asarray(Q, dtype=float)
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > train_X.shape[0]:
        raise ValueError(f"K={K} exceeds the {train_X.shape[0]} training samples")
    D = cross_matrix(Q, train_X, _knn_metric(metric))
    return np.array([_knn_vote(row, train_y, K) for row in D], dtype=int)


# ---------------------------------------------------------------- models

@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    K: int
    metric: str

    def predict(self, X) -> np.ndarray:
        return knn_predict_many(self.X, self.y, X, self.K, self.metric)


def fit_model(kind: str, X, y, params: dict, n_classes: int, seed: int = 0, n_time=None):
    """Train one model of ``kind`` with hyperparameters ``params``."""
    if kind == "knn":
        return KnnModel(np.asarray(X, dtype=float), np.asarray(y, dtype=int),
                        int(params["n_neighbors"]), params["metric"])
    if kind == "gbt":
        return fit_gbt(X, y, gamma=float(params["gamma"]), max_depth=int(params["max_depth"]),
                       seed=seed, n_classes=n_classes)
    if kind == "fcn":
        arch = FcnArchitecture(int(params["n_layers"]), int(params["first_filters"]), n_classes)
        return fit_fcn(X, y, arch, optimizer=params["optimizer"], lr=float(params["lr"]),
                       epochs=int(params.get("epochs", 200)), seed=seed, n_time=n_time)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def grid_points(kind: str, grid: Optional[dict] = None) -> list:
    grid = GRIDS[kind] if grid is None else grid
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


# ---------------------------------------------------------------- metrics

def evaluate(pred, truth) -> dict:
    """Accuracy and macro precision, recall, F1 over the classes present in ``truth``."""
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    if pred.shape != truth.shape:
        raise ValueError("predictions and truth have different lengths")
    prec, rec, f1 = [], [], []
    for c in np.unique(truth):
        tp = np.count_nonzero((pred == c) & (truth == c))
        n_pred = np.count_nonzero(pred == c)
        n_true = np.count_nonzero(truth == c)
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_true
        prec.append(p)
        rec.append(r)
        f1.append(2 * p * r / (p + r) if p + r > 0 else 0.0)
    return {
        "accuracy": float(np.mean(pred == truth)),
        "macro_precision": float(np.mean(prec)),
        "macro_recall": float(np.mean(rec)),
        "macro_f1": float(np.mean(f1)),
        "per_class_f1": [float(v) for v in f1],
    }


def _train_eval(task: ClassTask, kind, params, seed, model_seed):
    tr, te = stratified_split(task.labels, 0.3, seed)
    model = fit_model(kind, task.inputs[tr], task.labels[tr], params, task.n_classes,
                      seed=model_seed, n_time=task.n_time)
    return model, evaluate(model.predict(task.inputs[te]), task.labels[te]), (tr, te)


def grid_search(task: ClassTask, kind: str, grid: Optional[dict] = None, seed: int = 0,
                model_seed: int = 0):
    """Best hyperparameters by test accuracy on the split of ``seed``.

    Returns ``(best, trace)`` where ``trace`` lists every grid point with its
    accuracy or the error that made it fail.
    """
    points = grid_points(kind, grid)
    if not points:
        raise ValueError("empty hyperparameter grid")
    trace = []
    best, best_acc = None, -np.inf
    for params in points:
        try:
            _, metrics, _ = _train_eval(task, kind, params, seed, model_seed)
        except (ValueError, FloatingPointError) as exc:
            trace.append({"params": params, "error": str(exc)})
            continue
        trace.append({"params": params, "accuracy": metrics["accuracy"]})
        if metrics["accuracy"] > best_acc:
            best, best_acc = params, metrics["accuracy"]
    if best is None:
        raise ValueError(f"every {kind} grid point failed to train")
    return best, trace


@dataclass
class EvalReport:
    model: str
    config: str
    k_before: int
    k_after: int
    params: dict
    per_seed: list  # one metrics dict per seed

    def mean(self, name: str) -> float:
        return float(np.mean([r[name] for r in self.per_seed]))

    def std(self, name: str) -> float:
        return float(np.std([r[name] for r in self.per_seed]))

    def summary(self) -> dict:
        return {name: {"mean": self.mean(name), "std": self.std(name)} for name in METRIC_NAMES}

    def row(self, dataset: str = "") -> list:
        cells = [dataset, self.config, self.model, f"{self.k_before}->{self.k_after}"]
        for name in ("macro_f1", "accuracy", "macro_precision", "macro_recall"):
            cells.append(f"{self.mean(name):.3f} ± {self.std(name):.3f}")
        return cells

    def as_dict(self) -> dict:
        return {"model": self.model, "config": self.config, "k_before": self.k_before,
                "k_after": self.k_after, "params": self.params, "per_seed": self.per_seed,
                "summary": self.summary()}


REPORT_HEADER = ["dataset", "config", "model", "k", "f1", "accuracy", "precision", "recall"]


def write_report_csv(reports, path, dataset: str = "") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in reports:
            w.writerow(r.row(dataset))


def run_eval_suite(task: ClassTask, kind: str, params: dict, seeds=tuple(range(N_SEEDS)),
                   model_seed: int = 0, keep_models: bool = False):
    """Train and score on every seeded split; population std over seeds."""
    per_seed, models = [], []
    for s in seeds:
        model, metrics, split = _train_eval(task, kind, params, int(s), model_seed + int(s))
        metrics = dict(metrics, seed=int(s))
        per_seed.append(metrics)
        if keep_models:
            models.append((model, split))
    report = EvalReport(model=kind, config=task.config, k_before=task.k_before,
                        k_after=task.k_after, params=dict(params), per_seed=per_seed)
    return (report, models) if keep_models else report
