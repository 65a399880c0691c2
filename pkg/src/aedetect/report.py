"""Reconstruction-error time series as CSV and a dependency-free SVG plot."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

BAND_COLORS = {"powersave": "#e41a1c", "performance": "#377eb8"}


def segments(timestamps) -> list[tuple[int, int]]:
    """``(start, stop)`` row ranges of consecutive timestamps."""
    ts = np.asarray(timestamps)
    if ts.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(ts) != 1) + 1
    edges = np.concatenate([[0], breaks, [ts.size]])
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def anomaly_bands(timestamps, labels) -> list[tuple[int, int, str]]:
    """``(first_ts, last_ts, label)`` for each run of consecutive rows sharing
    a non-default label.  Rows are valid samples only, so a band spans any
    monitoring gap inside an anomaly period."""
    bands = []
    prev = None
    for ts, lab in zip(timestamps, labels):
        if lab != "default":
            if prev == lab:
                bands[-1][1] = int(ts)
            else:
                bands.append([int(ts), int(ts), lab])
        prev = lab
    return [tuple(b) for b in bands]


def write_timeseries(rows: list[dict], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp_index", "label", "error", "normalized_error", "verdict"])
        for r in rows:
            w.writerow([r["timestamp_index"], r["label"], repr(r["error"]), repr(r["normalized_error"]),
                        r["verdict"]])
    return path


def render_svg(rows: list[dict], width: int = 900, height: int = 300, title: str = "") -> str:
    """Normalized error over time; one path with a break at every gap and a
    shaded band per anomaly interval."""
    margin = 40
    ts = np.array([r["timestamp_index"] for r in rows], dtype=float)
    ys = np.array([r["normalized_error"] for r in rows], dtype=float)
    labels = [r["label"] for r in rows]
    x0, x1 = (ts.min(), ts.max()) if ts.size else (0.0, 1.0)
    y1 = float(ys.max()) if ys.size else 1.0
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > 0 else 1.0
    pw, ph = width - 2 * margin, height - 2 * margin

    def sx(t):
        return margin + (t - x0) / (x1 - x0) * pw

    def sy(v):
        return margin + ph - v / y1 * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{escape(title)}</title>',
        f'<rect x="{margin}" y="{margin}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>',
    ]
    for start, stop, lab in anomaly_bands(ts.astype(int), labels):
        left, right = sx(start), sx(stop + 1) if stop + 1 <= x1 else sx(stop)
        parts.append(
            f'<rect class="anomaly-band" data-label="{escape(lab)}" x="{left:.2f}" y="{margin}" '
            f'width="{max(right - left, 1.0):.2f}" height="{ph}" fill="{BAND_COLORS.get(lab, "#999")}" '
            f'fill-opacity="0.25"/>'
        )
    cmds = []
    for a, b in segments(ts):
        pts = [f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(ts[a:b], ys[a:b])]
        cmds.append("M" + " L".join(pts))
    parts.append(f'<path class="error-trace" d="{" ".join(cmds)}" fill="none" stroke="#6baed6" '
                 f'stroke-width="1"/>')
    parts.append(f'<text x="{margin}" y="{margin - 10}" font-size="12">{escape(title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(rows: list[dict], path, title: str = "") -> Path:
    path = Path(path)
    path.write_text(render_svg(rows, title=title))
    return path
