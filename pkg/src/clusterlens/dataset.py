"""Loading and preprocessing of equal-length time-series collections.

Every series is one row of a ``values`` matrix.  Missing cells are kept as
NaN in ``values`` and flagged ``False`` in ``mask``; statistics never look at
them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np


class DataFormatError(ValueError):
    """Raised for malformed input files or invalid collections."""


@dataclass
class TimeSeriesCollection:
    ids: list
    values: np.ndarray
    mask: np.ndarray
    labels: Optional[np.ndarray] = None
    granularity: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DataFormatError("values must be a 2-D matrix (n_series x T)")
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.values.shape:
            raise DataFormatError("mask shape does not match values")
        self.ids = [str(i) for i in self.ids]
        if len(self.ids) != self.values.shape[0]:
            raise DataFormatError("number of ids does not match number of rows")
        seen = set()
        for i in self.ids:
            if i in seen:
                raise DataFormatError(f"duplicate id {i}")
            seen.add(i)
        if self.values.shape[0] and self.values.shape[1] < 2:
            raise DataFormatError("series must have at least 2 timesteps")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (len(self.ids),):
                raise DataFormatError("labels must have one entry per series")
        self.values = np.where(self.mask, self.values, np.nan)

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())

    def subset(self, rows) -> "TimeSeriesCollection":
        rows = np.asarray(rows, dtype=int)
        return TimeSeriesCollection(
            ids=[self.ids[r] for r in rows],
            values=self.values[rows],
            mask=self.mask[rows],
            labels=None if self.labels is None else self.labels[rows],
            granularity=self.granularity,
        )

    @classmethod
    def from_array(cls, values, ids=None, labels=None, granularity=""):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if ids is None:
            ids = [f"s{i}" for i in range(values.shape[0])]
        return cls(ids=list(ids), values=values, mask=~np.isnan(values),
                   labels=labels, granularity=granularity)


@dataclass
class PreprocessReport:
    dropped_sparse: list = field(default_factory=list)
    dropped_outliers: list = field(default_factory=list)
    filled_count: int = 0
    scaling: dict = field(default_factory=dict)

    def merge(self, other: "PreprocessReport") -> "PreprocessReport":
        return PreprocessReport(
            dropped_sparse=self.dropped_sparse + other.dropped_sparse,
            dropped_outliers=self.dropped_outliers + other.dropped_outliers,
            filled_count=self.filled_count + other.filled_count,
            scaling={**self.scaling, **other.scaling},
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def load_csv(path) -> TimeSeriesCollection:
    """Read a collection from ``id,t0,t1,...`` or ``id,label,t0,...`` CSV.

    Empty cells are missing values.  Row order is preserved.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "id":
            raise DataFormatError(f"{path}: first header column must be 'id'")
        has_label = len(header) > 1 and header[1] == "label"
        first_value_col = 2 if has_label else 1
        width = len(header)

        ids, rows, labels = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: ragged row with {len(row)} cells, expected {width}")
            if has_label:
                try:
                    labels.append(int(row[1]))
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{lineno}, column 'label': cannot parse {row[1]!r}") from None
            parsed = []
            for col, cell in enumerate(row[first_value_col:], start=first_value_col):
                cell = cell.strip()
                if cell == "":
                    parsed.append(np.nan)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{lineno}, column {header[col]!r}: cannot parse {cell!r}") from None
            ids.append(row[0].strip())
            rows.append(parsed)

    n_t = width - first_value_col
    values = np.array(rows, dtype=float).reshape(len(rows), n_t)
    return TimeSeriesCollection(
        ids=ids, values=values, mask=~np.isnan(values),
        labels=np.array(labels, dtype=int) if has_label else None,
    )


def save_csv(c: TimeSeriesCollection, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["id"] + (["label"] if c.labels is not None else [])
        w.writerow(head + [f"t{i}" for i in range(c.length)])
        for r in range(c.n_series):
            cells = [repr(float(v)) if m else "" for v, m in zip(c.values[r], c.mask[r])]
            lead = [c.ids[r]] + ([str(int(c.labels[r]))] if c.labels is not None else [])
            w.writerow(lead + cells)


def load_trace() -> TimeSeriesCollection:
    """The bundled Trace benchmark (200 series, 275 steps, 4 labelled classes)."""
    ref = resources.files("clusterlens") / "data" / "trace.csv"
    with resources.as_file(ref) as p:
        c = load_csv(p)
    c.granularity = "secondly"
    return c


def fill_missing_nearest(c: TimeSeriesCollection) -> TimeSeriesCollection:
    """Replace each missing cell with the observed value at the nearest index.

    Ties go to the earlier index.
    """
    values = c.values.copy()
    for r in range(c.n_series):
        observed = np.flatnonzero(c.mask[r])
        if observed.size == 0:
            raise DataFormatError(f"series {c.ids[r]} has no observed values")
        if observed.size == c.length:
            continue
        missing = np.flatnonzero(~c.mask[r])
        # searchsorted gives the first observed index to the right
        right = np.searchsorted(observed, missing)
        left = np.clip(right - 1, 0, observed.size - 1)
        right = np.clip(right, 0, observed.size - 1)
        d_left = np.abs(missing - observed[left])
        d_right = np.abs(observed[right] - missing)
        pick = np.where(d_left <= d_right, observed[left], observed[right])
        values[r, missing] = values[r, pick]
    return replace(c, values=values, mask=np.ones_like(c.mask))


def drop_sparse(c: TimeSeriesCollection, threshold: float = 0.8):
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    missing_frac = 1.0 - c.mask.mean(axis=1)
    keep = missing_frac <= threshold
    report = PreprocessReport(dropped_sparse=[c.ids[i] for i in np.flatnonzero(~keep)])
    return c.subset(np.flatnonzero(keep)), report


def minmax_scale(c: TimeSeriesCollection, lo: float = 0.1, hi: float = 1.0,
                 report: Optional[PreprocessReport] = None) -> TimeSeriesCollection:
    """Per-series affine map onto ``[lo, hi]``; constant series go to the midpoint."""
    if not lo < hi:
        raise ValueError("lo must be smaller than hi")
    values = c.values.copy()
    for r in range(c.n_series):
        obs = c.mask[r]
        if not obs.any():
            continue
        mn = float(np.min(values[r, obs]))
        mx = float(np.max(values[r, obs]))
        if report is not None:
            report.scaling[c.ids[r]] = (mn, mx)
        if mx == mn:
            values[r, obs] = (lo + hi) / 2.0
        else:
            values[r, obs] = lo + (hi - lo) * (values[r, obs] - mn) / (mx - mn)
            # pin the extremes so a second pass is an exact no-op
            values[r, obs] = np.clip(values[r, obs], lo, hi)
    return replace(c, values=values, mask=c.mask.copy())


def tukey_upper_fence(x) -> float:
    q1, q3 = np.percentile(np.asarray(x, dtype=float), [25, 75])
    return float(q3 + 1.5 * (q3 - q1))


def remove_outliers(c: TimeSeriesCollection, d):
    """Drop series whose nearest-neighbour distance is above the Tukey fence.

    ``d`` is a :class:`~clusterlens.distance.DistanceMatrix` (or a plain square
    array) computed over ``c`` in the same row order.
    """
    values = getattr(d, "values", d)
    values = np.asarray(values, dtype=float)
    n = c.n_series
    if n < 4:
        raise ValueError("outlier removal needs at least 4 series")
    if values.shape != (n, n):
        raise ValueError("distance matrix does not match the collection")
    off = values + np.diag(np.full(n, np.inf))
    nn = off.min(axis=1)
    fence = tukey_upper_fence(nn)
    drop = nn > fence
    if drop.all():  # cannot happen with a Tukey fence, kept as a guard
        drop[np.argmin(nn)] = False
    report = PreprocessReport(dropped_outliers=[c.ids[i] for i in np.flatnonzero(drop)])
    return c.subset(np.flatnonzero(~drop)), report


def slice_window(c: TimeSeriesCollection, start: int, length: int) -> TimeSeriesCollection:
    """Restrict every series to ``[start, start+length)``; incomplete series are dropped."""
    if start < 0 or length < 1 or start + length > c.length:
        raise ValueError(
            f"window [{start}, {start + length}) outside series of length {c.length}")
    sub = replace(
        c,
        values=c.values[:, start:start + length].copy(),
        mask=c.mask[:, start:start + length].copy(),
        labels=None if c.labels is None else c.labels.copy(),
    )
    complete = np.flatnonzero(sub.mask.all(axis=1))
    return sub.subset(complete)
