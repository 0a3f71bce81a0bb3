"""Hand-written SVG line plots and the summary report of a pipeline run."""

from __future__ import annotations

import json
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Panel:
    """Maps data coordinates into one rectangular plot area."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        lo, hi = ylim
        if not hi > lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.xlim = xlim if xlim[1] > xlim[0] else (xlim[0], xlim[0] + 1)
        self.ylim = (lo, hi)

    def px(self, x):
        a, b = self.xlim
        return self.x0 + (np.asarray(x, dtype=float) - a) / (b - a) * self.w

    def py(self, y):
        a, b = self.ylim
        return self.y0 + self.h - (np.asarray(y, dtype=float) - a) / (b - a) * self.h

    def polyline(self, x, y, color="#000", width=1.0, opacity=1.0) -> str:
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.px(x), self.py(y)))
        return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
                f'stroke-opacity="{opacity}" points="{pts}"/>')

    def markers(self, x, y, color="#000", r=3.0) -> str:
        return "".join(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="{r}" fill="{color}"/>'
                       for a, b in zip(self.px(x), self.py(y)))

    def frame(self, title="", xlabel="", ylabel="", xticks=None) -> str:
        parts = [f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" '
                 f'fill="none" stroke="#444" stroke-width="0.8"/>']
        if title:
            parts.append(_text(self.x0, self.y0 - 6, title, size=12))
        if xlabel:
            parts.append(_text(self.x0 + self.w / 2, self.y0 + self.h + 30, xlabel,
                               anchor="middle"))
        if ylabel:
            parts.append(_text(self.x0 - 45, self.y0 + self.h / 2, ylabel, anchor="middle",
                               rotate=True))
        lo, hi = self.ylim
        for v in (lo, hi):
            parts.append(_text(self.x0 - 4, float(self.py(v)) + 4, f"{v:.3g}", anchor="end",
                               size=9))
        ticks = self.xlim if xticks is None else xticks
        for v in ticks:
            parts.append(_text(float(self.px(v)), self.y0 + self.h + 14, f"{v:g}",
                               anchor="middle", size=9))
        return "".join(parts)


def _text(x, y, s, anchor="start", size=10, rotate=False) -> str:
    tr = f' transform="rotate(-90 {_fmt(x)} {_fmt(y)})"' if rotate else ""
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}"{tr}>{escape(str(s))}</text>')


def _svg(width, height, body) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">'
            f'<rect width="100%" height="100%" fill="white"/>{body}</svg>\n')


def elbow_svg(ks, inertias, selected, path=None, title="Elbow curve") -> str:
    ks = np.asarray(ks, dtype=float)
    inertias = np.asarray(inertias, dtype=float)
    p = _Panel(70, 30, 420, 240, (ks.min(), ks.max()), (inertias.min(), inertias.max()))
    body = p.frame(title, "k", "inertia", xticks=ks)
    body += p.polyline(ks, inertias, PALETTE[0], 1.5)
    body += p.markers(ks, inertias, PALETTE[0])
    if selected is not None:
        j = int(np.flatnonzero(ks == selected)[0])
        body += p.markers([ks[j]], [inertias[j]], PALETTE[1], r=5)
        body += _text(float(p.px(ks[j])) + 8, float(p.py(inertias[j])) - 8, f"k = {selected}",
                      size=10)
    svg = _svg(520, 310, body)
    if path is not None:
        Path(path).write_text(svg)
    return svg


def cluster_overlay_svg(instances, tracks: dict, path=None, title="") -> str:
    """Members in gray with the cluster mean on top, one explanation track per method."""
    instances = np.atleast_2d(np.asarray(instances, dtype=float))
    T = instances.shape[1]
    t = np.arange(T)
    n_tracks = len(tracks)
    width, ph, gap = 620, 180, 50
    height = 40 + ph + n_tracks * (ph * 0.6 + gap) + 40
    top = _Panel(70, 30, 520, ph, (0, T - 1), (instances.min(), instances.max()))
    body = top.frame(title, "", "value")
    for row in instances:
        body += top.polyline(t, row, "#999", 0.6, 0.35)
    body += top.polyline(t, instances.mean(axis=0), "#000", 2.0)
    y = 30 + ph + gap
    for i, (name, curve) in enumerate(tracks.items()):
        curve = np.asarray(curve, dtype=float)[:T]
        p = _Panel(70, y, 520, ph * 0.6, (0, T - 1), (min(curve.min(), 0.0), curve.max()))
        last = i == n_tracks - 1
        body += p.frame(name, "time step" if last else "", "importance")
        body += p.polyline(t, curve, PALETTE[i % len(PALETTE)], 1.5)
        y += ph * 0.6 + gap
    svg = _svg(width, int(height), body)
    if path is not None:
        Path(path).write_text(svg)
    return svg


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
