"""End-to-end orchestration: preprocess, cluster, select k, classify, explain, report.

One JSON document configures a run.  Every stage writes its artifacts into a
subdirectory of the output directory together with a ``stage.json`` holding
the stage key (a hash of the configuration sections it depends on and the
keys of its upstream stages).  A stage whose key and artifacts are already on
disk is not recomputed.

All randomness comes from ``master_seed`` through named sub-seeds, so two
runs with the same configuration write byte-identical CSV and JSON files.
The one exception is ``manifest.json``, which records wall-clock times.
"""

from __future__ import annotations

import copy
import hashlib
import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (DEFAULTS, GRIDS, MODEL_KINDS, ClassTask, grid_search,
                       make_task, run_eval_suite, stratified_split, write_report_csv)
from .clustering import (ClusteringResult, k_plan, kmeans_fit, pam_fit, suggest_k, validity,
                         wcss)
from .dataset import (PreprocessReport, drop_sparse, fill_missing_nearest, load_csv, load_trace,
                      minmax_scale, remove_outliers, save_csv, slice_window)
from .distance import Metric, cached_pairwise, collection_hash
from .explain import explain_network, explain_trees, rank_agreement, tree_gain_set
from .explain.sets import ExplanationSet
from .features import CONFIGS, build_inputs, n_time_positions, position_names
from .neural import FcnModel
from .report import cluster_overlay_svg, dump_json, elbow_svg
from .trees import TreeEnsemble

STAGES = ("preprocess", "selectk", "cluster", "classify", "explain", "report")
BUILTIN = {"builtin:trace": load_trace}
MODEL_METHODS = {"gbt": ("treeshap", "tree_gain"), "fcn": ("gradientshap", "gradcam"), "knn": ()}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage


# ---------------------------------------------------------------- configuration

DEFAULT_CONFIG = {
    "dataset": {
        "path": "builtin:trace",
        "slice": None,
        "fill_missing": True,
        "drop_sparse": 0.8,
        "scale": [0.1, 1.0],
        "remove_outliers": False,
    },
    "clustering": {"algorithm": "labels", "metric": "euclidean", "k": "auto",
                   "candidates": [2, 3, 4, 5, 6], "levels": True},
    "classification": {"models": ["gbt", "knn", "fcn"], "configs": ["feat_only"],
                       "grid": False, "seeds": [0, 1, 2, 3, 4], "fcn_epochs": 200},
    "explain": {"methods": ["treeshap", "tree_gain", "gradientshap", "gradcam"], "window": 5,
                "top_k": 10, "n_samples": 200, "background": 100, "max_samples": None},
    "output_dir": "out",
    "master_seed": 0,
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    dataset: dict
    clustering: dict
    classification: dict
    explain: dict
    output_dir: str = "out"
    master_seed: int = 0
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d, base_dir=".") -> "RunConfig":
        unknown = set(d) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        full = _merge(DEFAULT_CONFIG, d)
        cfg = cls(**full, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d, base_dir=path.parent)

    def as_dict(self) -> dict:
        return {"dataset": self.dataset, "clustering": self.clustering,
                "classification": self.classification, "explain": self.explain,
                "output_dir": self.output_dir, "master_seed": self.master_seed}

    @property
    def metric(self) -> Metric:
        return Metric.from_descriptor(self.clustering["metric"])

    @property
    def labels_mode(self) -> bool:
        return self.clustering["algorithm"] == "labels"

    def validate(self) -> None:
        cl = self.clustering
        if cl["algorithm"] not in ("kmeans", "kmedoids", "labels"):
            raise ConfigError(f"unknown clustering algorithm {cl['algorithm']!r}")
        try:
            metric = self.metric
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad metric: {exc}") from exc
        if cl["algorithm"] == "kmeans" and metric.kind != "euclidean":
            raise ConfigError("kmeans requires the euclidean metric")
        k = cl["k"]
        if k != "auto" and not (isinstance(k, int) and k >= 2):
            raise ConfigError("clustering.k must be an integer >= 2 or \"auto\"")
        if k == "auto":
            cand = cl["candidates"]
            if len(cand) < 3 or any(b <= a for a, b in zip(cand, cand[1:])):
                raise ConfigError("k candidates must be at least 3 strictly increasing integers")
        c = self.classification
        if not c["models"]:
            raise ConfigError("select at least one model")
        if not c["configs"]:
            raise ConfigError("select at least one feature configuration")
        for m in c["models"]:
            if m not in MODEL_KINDS:
                raise ConfigError(f"unknown model {m!r}")
        for f in c["configs"]:
            if f not in CONFIGS:
                raise ConfigError(f"unknown feature configuration {f!r}")
        if not c["seeds"]:
            raise ConfigError("classification.seeds must not be empty")
        for m in self.explain["methods"]:
            if m not in ("treeshap", "tree_gain", "gradientshap", "gradcam"):
                raise ConfigError(f"unknown explanation method {m!r}")
        if int(self.explain["window"]) < 1:
            raise ConfigError("explain.window must be at least 1")
        if not isinstance(self.master_seed, int):
            raise ConfigError("master_seed must be an integer")

    def hash(self) -> str:
        d = self.as_dict()
        d.pop("output_dir")
        return _hash(d)


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def sub_seed(master: int, name: str) -> int:
    """Independent seed for the named consumer, derived from ``master``."""
    return int(np.random.SeedSequence([master, zlib.crc32(name.encode())])
               .generate_state(1)[0])


# ---------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    config_hash: str
    output_dir: str
    tool_version: str = __version__
    stages: dict = field(default_factory=dict)

    @property
    def artifacts(self) -> list:
        return [a for s in self.stages.values() for a in s.get("artifacts", [])]

    def completed(self) -> list:
        return [n for n, s in self.stages.items() if s["status"] in ("ok", "cached")]

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "tool_version": self.tool_version,
                "output_dir": self.output_dir, "stages": self.stages,
                "artifacts": self.artifacts}

    def write(self) -> None:
        dump_json(self.to_dict(), Path(self.output_dir) / "manifest.json")

    @classmethod
    def read(cls, out_dir) -> "RunManifest":
        d = json.loads((Path(out_dir) / "manifest.json").read_text())
        return cls(config_hash=d["config_hash"], output_dir=d["output_dir"],
                   tool_version=d["tool_version"], stages=d["stages"])


# ---------------------------------------------------------------- runner

class Runner:
    """Executes stages in order, reusing on-disk results whose keys match."""

    def __init__(self, cfg: RunConfig, out_dir=None, force=False):
        self.cfg = cfg
        if out_dir is not None:
            self.out = Path(out_dir)
        else:
            self.out = Path(cfg.output_dir)
            if not self.out.is_absolute():
                self.out = Path(cfg.base_dir) / self.out
        self.out.mkdir(parents=True, exist_ok=True)
        self.force = force
        self.manifest = RunManifest(config_hash=cfg.hash(), output_dir=str(self.out))
        self.keys = {}
        self.state = {}

    # stage bookkeeping
    def _dir(self, stage) -> Path:
        d = self.out / stage
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _rel(self, p) -> str:
        return Path(p).relative_to(self.out).as_posix()

    def _cached(self, stage, key):
        rec = self.out / stage / "stage.json"
        if self.force or not rec.exists():
            return None
        d = json.loads(rec.read_text())
        if d.get("key") != key or not all((self.out / a).exists() for a in d["artifacts"]):
            return None
        return d["artifacts"]

    def _execute(self, stage, key, fn, load):
        t0 = time.perf_counter()
        cached = self._cached(stage, key)
        try:
            if cached is not None:
                load()
                artifacts, status = cached, "cached"
            else:
                artifacts = sorted(self._rel(p) for p in fn())
                dump_json({"key": key, "artifacts": artifacts}, self._dir(stage) / "stage.json")
                status = "ok"
        except Exception as exc:  # recorded, then re-raised with the stage name
            self.manifest.stages[stage] = {"status": "failed", "error": str(exc),
                                           "seconds": time.perf_counter() - t0}
            self.manifest.write()
            raise StageError(stage, exc) from exc
        self.keys[stage] = key
        self.manifest.stages[stage] = {"status": status, "artifacts": artifacts,
                                       "seconds": time.perf_counter() - t0}
        self.manifest.write()

    def run(self, upto: str = "report") -> RunManifest:
        if upto not in STAGES:
            raise ValueError(f"unknown stage {upto!r}")
        for stage in STAGES[: STAGES.index(upto) + 1]:
            if stage == "selectk" and not self._needs_selectk():
                self.manifest.stages[stage] = {"status": "skipped", "artifacts": [],
                                               "seconds": 0.0}
                continue
            try:
                getattr(self, f"stage_{stage}")()
            except StageError:
                raise
            except Exception as exc:  # raised before the stage body, e.g. unreadable input
                self.manifest.stages[stage] = {"status": "failed", "error": str(exc),
                                               "seconds": 0.0}
                self.manifest.write()
                raise StageError(stage, exc) from exc
        return self.manifest

    def _needs_selectk(self) -> bool:
        return not self.cfg.labels_mode and self.cfg.clustering["k"] == "auto"

    # -------------------------------------------------------- preprocess
    def _load_dataset(self):
        path = self.cfg.dataset["path"]
        if path in BUILTIN:
            return BUILTIN[path]()
        p = Path(path)
        if not p.is_absolute():
            p = Path(self.cfg.base_dir) / p
        return load_csv(p)

    def stage_preprocess(self):
        ds = self.cfg.dataset
        raw = self._load_dataset()
        key = _hash({"dataset": ds, "data": collection_hash(raw),
                     "metric": self.cfg.metric.descriptor(), "seed": self.cfg.master_seed})
        d = self.out / "preprocess"

        def compute():
            c = raw
            report = PreprocessReport()
            if ds["slice"]:
                c = slice_window(c, int(ds["slice"]["start"]), int(ds["slice"]["length"]))
            if ds["drop_sparse"] is not None:
                c, r = drop_sparse(c, float(ds["drop_sparse"]))
                report = report.merge(r)
            if ds["fill_missing"]:
                report.filled_count += int((~c.mask).sum())
                c = fill_missing_nearest(c)
            if ds["scale"]:
                lo, hi = ds["scale"]
                c = minmax_scale(c, lo, hi, report=report)
            if ds["remove_outliers"]:
                dm = cached_pairwise(c, self.cfg.metric, self.out / "cache")
                c, r = remove_outliers(c, dm)
                report = report.merge(r)
            if not c.fully_observed:
                raise ValueError("preprocessed data still has missing values; "
                                 "enable fill_missing")
            save_csv(c, self._dir("preprocess") / "data.csv")
            (d / "report.json").write_text(report.to_json() + "\n")
            self.state["data"] = c
            return [d / "data.csv", d / "report.json"]

        def load():
            self.state["data"] = load_csv(d / "data.csv")

        self._execute("preprocess", key, compute, load)

    # -------------------------------------------------------- clustering helpers
    def _distances(self, c):
        return cached_pairwise(c, self.cfg.metric, self.out / "cache")

    def _fit(self, c, k, seed):
        if self.cfg.clustering["algorithm"] == "kmeans":
            return kmeans_fit(c, k, seed=seed)
        return pam_fit(self._distances(c), k, seed=seed)

    # -------------------------------------------------------- select k
    def stage_selectk(self):
        cl = self.cfg.clustering
        key = _hash({"up": self.keys["preprocess"], "clustering": cl})
        d = self.out / "selectk"

        def compute():
            c = self.state["data"]
            seed = sub_seed(self.cfg.master_seed, "selectk")
            ks = [int(k) for k in cl["candidates"]]
            inertias = [float(self._fit(c, k, seed).inertia) for k in ks]
            k_M = suggest_k(ks, inertias)
            plan = k_plan(k_M).as_tuple() if cl["levels"] else (k_M,)
            out = self._dir("selectk")
            with (out / "inertia.csv").open("w") as fh:
                fh.write("k,inertia\n")
                for k, v in zip(ks, inertias):
                    fh.write(f"{k},{v!r}\n")
            info = {"candidates": ks, "inertia": inertias, "k_M": k_M, "levels": list(plan)}
            dump_json(info, out / "selectk.json")
            self.state["selectk"] = info
            return [out / "inertia.csv", out / "selectk.json"]

        def load():
            self.state["selectk"] = json.loads((d / "selectk.json").read_text())

        self._execute("selectk", key, compute, load)

    # -------------------------------------------------------- cluster
    def _levels(self):
        cl = self.cfg.clustering
        if self.cfg.labels_mode:
            return ["labels"], "labels"
        if cl["k"] == "auto":
            info = self.state["selectk"]
            return [f"k{k}" for k in info["levels"]], f"k{info['k_M']}"
        k = int(cl["k"])
        if cl["levels"] and k >= 3:
            return [f"k{v}" for v in k_plan(k).as_tuple()], f"k{k}"
        return [f"k{k}"], f"k{k}"

    def stage_cluster(self):
        cl = self.cfg.clustering
        up = self.keys.get("selectk", self.keys["preprocess"])
        key = _hash({"up": up, "clustering": cl, "seed": self.cfg.master_seed})
        d = self.out / "cluster"

        def compute():
            c = self.state["data"]
            levels, medium = self._levels()
            out = self._dir("cluster")
            files = []
            assignments = {}
            for level in levels:
                if level == "labels":
                    if c.labels is None:
                        raise ValueError("labels-as-clusters mode needs a labelled dataset")
                    lab = np.asarray(c.labels, dtype=int)
                    centers = np.stack([c.values[lab == v].mean(axis=0)
                                        for v in range(lab.max() + 1)])
                    r = ClusteringResult(k=int(np.unique(lab).size), assignments=lab,
                                         inertia=wcss(c.values, lab, centers),
                                         metric=self.cfg.metric,
                                         iterations=0, ids=list(c.ids), algorithm="labels")
                    scores = None
                else:
                    k = int(level[1:])
                    r = self._fit(c, k, sub_seed(self.cfg.master_seed, f"cluster/{level}"))
                    data = c if cl["algorithm"] == "kmeans" else self._distances(c)
                    scores = validity(data, r)
                r.to_files(out / f"{level}.csv", out / f"{level}.json", scores)
                files += [out / f"{level}.csv", out / f"{level}.json"]
                assignments[level] = np.asarray(r.assignments, dtype=int)
            dump_json({"levels": levels, "medium": medium}, out / "levels.json")
            files.append(out / "levels.json")
            self.state["clusters"] = assignments
            self.state["levels"] = (levels, medium)
            return files

        def load():
            info = json.loads((d / "levels.json").read_text())
            self.state["levels"] = (info["levels"], info["medium"])
            self.state["clusters"] = {lv: _read_assignments(d / f"{lv}.csv")
                                      for lv in info["levels"]}

        self._execute("cluster", key, compute, load)

    # -------------------------------------------------------- classify
    def _task(self, level, config):
        c = self.state["data"]
        X = build_inputs(c.values, config)
        return make_task(X, self.state["clusters"][level], config,
                         seed=sub_seed(self.cfg.master_seed, f"downsample/{level}"),
                         ids=c.ids, names=position_names(c.length, config),
                         n_time=n_time_positions(c.length, config))

    def _params(self, kind, p):
        if kind == "fcn":
            p = dict(p, epochs=int(self.cfg.classification["fcn_epochs"]))
        return p

    def stage_classify(self):
        cc = self.cfg.classification
        key = _hash({"up": self.keys["cluster"], "classification": cc})
        d = self.out / "classify"

        def compute():
            levels, medium = self.state["levels"]
            out = self._dir("classify")
            models_dir = out / "models"
            models_dir.mkdir(exist_ok=True)
            seeds = [int(s) for s in cc["seeds"]]
            mseed = sub_seed(self.cfg.master_seed, "classify")
            best, grid_trace, reports, files = {}, {}, [], []
            for config in cc["configs"]:
                task = self._task(medium, config)
                for kind in cc["models"]:
                    if cc["grid"]:
                        grid = GRIDS[kind]
                        p, trace = grid_search(task, kind, grid, seed=seeds[0], model_seed=mseed)
                        grid_trace[f"{kind}/{config}"] = trace
                    else:
                        p = DEFAULTS[kind]
                    best[f"{kind}/{config}"] = self._params(kind, p)
            for level in levels:
                for config in cc["configs"]:
                    task = self._task(level, config)
                    for kind in cc["models"]:
                        params = best[f"{kind}/{config}"]
                        rep, models = run_eval_suite(task, kind, params, seeds=seeds,
                                                     model_seed=mseed, keep_models=True)
                        reports.append((level, rep))
                        model = models[0][0]
                        if kind in ("gbt", "fcn"):
                            path = models_dir / f"{level}_{kind}_{config}.json"
                            model.to_json(path)
                            files.append(path)
            rows = [rep for _, rep in reports]
            write_report_csv(rows, out / "results.csv", dataset=self._dataset_name())
            dump_json({"best_params": best, "grid": grid_trace,
                       "results": [dict(rep.as_dict(), level=lv) for lv, rep in reports]},
                      out / "results.json")
            self.state["classify"] = json.loads((out / "results.json").read_text())
            return files + [out / "results.csv", out / "results.json"]

        def load():
            self.state["classify"] = json.loads((d / "results.json").read_text())

        self._execute("classify", key, compute, load)

    def _dataset_name(self) -> str:
        path = self.cfg.dataset["path"]
        return path.split(":", 1)[1] if path in BUILTIN else Path(path).stem

    # -------------------------------------------------------- explain
    def stage_explain(self):
        ex = self.cfg.explain
        key = _hash({"up": self.keys["classify"], "explain": ex})

        def compute():
            levels, medium = self.state["levels"]
            cc = self.cfg.classification
            out = self._dir("explain")
            split_seed = int(cc["seeds"][0])
            eseed = sub_seed(self.cfg.master_seed, "explain")
            window, top_k = int(ex["window"]), int(ex["top_k"])
            index, files, sets = [], [], {}
            for config in cc["configs"]:
                task = self._task(medium, config)
                tr, _ = stratified_split(task.labels, 0.3, split_seed)
                if ex["max_samples"]:
                    tr = tr[: int(ex["max_samples"])]
                X, y = task.inputs[tr], task.labels[tr]
                ids = [task.ids[i] for i in tr]
                for kind in cc["models"]:
                    methods = [m for m in MODEL_METHODS[kind] if m in ex["methods"]]
                    if not methods:
                        continue
                    path = self.out / "classify" / "models" / f"{medium}_{kind}_{config}.json"
                    for method in methods:
                        s = self._explain_one(kind, method, path, task, X, y, ids, window, eseed)
                        stem = f"{kind}_{config}_{method}"
                        s.to_csv(out / f"{stem}.csv")
                        files.append(out / f"{stem}.csv")
                        if s.attributions:
                            s.samples_to_csv(out / f"{stem}_samples.csv")
                            files.append(out / f"{stem}_samples.csv")
                        sets[(kind, config, method)] = s
                        index.append({"model": kind, "config": config, "method": method,
                                      "level": medium, "file": f"{stem}.csv",
                                      "n_time": s.n_time, "samples": ids,
                                      "clusters": [int(v) for v in y]})
            agreement = []
            keys = sorted(sets)
            for i, a in enumerate(keys):
                for b in keys[i + 1:]:
                    if a[1] != b[1]:
                        continue
                    ra = rank_agreement(sets[a].global_importance, sets[b].global_importance,
                                        min(top_k, len(sets[a].names)))
                    agreement.append({"config": a[1], "a": f"{a[0]}/{a[2]}",
                                      "b": f"{b[0]}/{b[2]}", **ra})
            dump_json(index, out / "index.json")
            dump_json(agreement, out / "agreement.json")
            return files + [out / "index.json", out / "agreement.json"]

        self._execute("explain", key, compute, lambda: None)

    def _explain_one(self, kind, method, path, task: ClassTask, X, y, ids, window, eseed):
        names, n_time = task.names, task.n_time
        if kind == "gbt":
            e = TreeEnsemble.from_json(path)
            if method == "tree_gain":
                return tree_gain_set(e, names, n_time, window)
            return explain_trees(e, X, ids, names, n_time, clusters=y, window=window)
        m = FcnModel.from_json(path)
        background = None
        if method == "gradientshap":
            nb = int(self.cfg.explain["background"])
            rng = np.random.default_rng(sub_seed(eseed, "background"))
            pick = np.sort(rng.choice(X.shape[0], size=min(nb, X.shape[0]), replace=False))
            background = X[pick]
        return explain_network(m, X, ids, names, n_time, method, background=background,
                               clusters=y, window=window,
                               n_samples=int(self.cfg.explain["n_samples"]), seed=eseed)

    # -------------------------------------------------------- report
    def stage_report(self):
        t0 = time.perf_counter()
        try:
            files = emit_report(self.manifest, self.cfg)
        except Exception as exc:
            self.manifest.stages["report"] = {"status": "failed", "error": str(exc),
                                              "seconds": time.perf_counter() - t0}
            self.manifest.write()
            raise StageError("report", exc) from exc
        self.manifest.stages["report"] = {"status": "ok",
                                          "artifacts": sorted(self._rel(p) for p in files),
                                          "seconds": time.perf_counter() - t0}
        self.manifest.write()


def _read_assignments(path) -> np.ndarray:
    rows = Path(path).read_text().splitlines()[1:]
    return np.array([int(r.rsplit(",", 1)[1]) for r in rows], dtype=int)


def _read_explanation(path):
    lines = Path(path).read_text().splitlines()
    head = lines[0].split(",")
    body = [ln.split(",") for ln in lines[1:]]
    names = [r[0] for r in body]
    cols = {h: np.array([float(r[j]) for r in body]) for j, h in enumerate(head) if j > 0}
    return names, cols


def emit_report(manifest: RunManifest, cfg: RunConfig = None) -> list:
    """Write ``report/report.json`` and SVG plots for every completed stage."""
    done = manifest.completed()
    if not done:
        raise ValueError("the manifest has no completed stages to report on")
    out = Path(manifest.output_dir)
    rdir = out / "report"
    rdir.mkdir(parents=True, exist_ok=True)
    report, files = {"config_hash": manifest.config_hash, "stages": done}, []

    if "selectk" in done:
        info = json.loads((out / "selectk" / "selectk.json").read_text())
        report["selectk"] = info
        elbow_svg(info["candidates"], info["inertia"], info["k_M"], rdir / "elbow.svg")
        files.append(rdir / "elbow.svg")

    if "cluster" in done:
        lv = json.loads((out / "cluster" / "levels.json").read_text())
        table = []
        for level in lv["levels"]:
            side = json.loads((out / "cluster" / f"{level}.json").read_text())
            table.append({"level": level, "k": side["k"], "algorithm": side["algorithm"],
                          **side.get("validity", {})})
        report["validity"] = table

    if "classify" in done:
        res = json.loads((out / "classify" / "results.json").read_text())
        report["classification"] = [
            {"level": r["level"], "config": r["config"], "model": r["model"],
             "k": f"{r['k_before']}->{r['k_after']}", "params": r["params"], **{
                 name: r["summary"][name] for name in r["summary"]}}
            for r in res["results"]]

    if "explain" in done:
        report["agreement"] = json.loads((out / "explain" / "agreement.json").read_text())
        files += _explanation_plots(out, rdir)

    dump_json(report, rdir / "report.json")
    return [rdir / "report.json"] + files


def _explanation_plots(out: Path, rdir: Path) -> list:
    index = json.loads((out / "explain" / "index.json").read_text())
    data = load_csv(out / "preprocess" / "data.csv")
    row_of = {sid: i for i, sid in enumerate(data.ids)}
    groups = {}
    for entry in index:
        if entry["n_time"] == 0:
            continue
        groups.setdefault((entry["model"], entry["config"]), []).append(entry)
    files = []
    for (model, config), entries in sorted(groups.items()):
        first = entries[0]
        clusters = np.array(first["clusters"])
        rows = np.array([row_of[s] for s in first["samples"]])
        curves = {e["method"]: _read_explanation(out / "explain" / e["file"])[1]
                  for e in entries}
        for c in np.unique(clusters):
            tracks = {}
            for method, cols in curves.items():
                col = cols.get(f"cluster_{c}")
                if col is None:
                    continue
                s = ExplanationSet(method=method, names=[], n_time=first["n_time"])
                tracks[method] = s.windowed_curve(col)[: first["n_time"]]
            if not tracks:
                continue
            path = rdir / f"cluster{c}_{model}_{config}.svg"
            cluster_overlay_svg(data.values[rows[clusters == c]], tracks, path,
                                title=f"cluster {c}, {model}, {config}")
            files.append(path)
    return files


def run(cfg: RunConfig, out_dir=None, upto: str = "report", force=False) -> RunManifest:
    return Runner(cfg, out_dir=out_dir, force=force).run(upto)
