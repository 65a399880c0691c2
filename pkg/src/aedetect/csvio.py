"""CSV formats: labeled traces, evaluation tables and per-row scores."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from . import detector as det
from .synthgen import GovernorMode, LabeledTrace


class TraceFormatError(ValueError):
    pass


def write_trace(trace: LabeledTrace, path) -> Path:
    """One row per sample: ``node_id,timestamp_index,label,valid,v0..v{d-1}``.

    A ``#dim=<d>`` line precedes the data.  Floats use ``repr`` so they read
    back bit-exact.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"#dim={trace.dim}\n")
        w = csv.writer(fh, lineterminator="\n")
        for i in range(len(trace)):
            w.writerow(
                [trace.node_id, int(trace.timestamps[i]), trace.labels[i].value,
                 int(bool(trace.valid_mask[i]))]
                + [repr(float(v)) for v in trace.samples[i]]
            )
    return path


def read_trace(path) -> LabeledTrace:
    path = Path(path)
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("#dim="):
            raise TraceFormatError(f"{path}: missing '#dim=' header line")
        try:
            dim = int(header[5:])
        except ValueError:
            raise TraceFormatError(f"{path}: bad dimension header {header!r}") from None
        node_id = None
        stamps, labels, valid, rows = [], [], [], []
        for lineno, rec in enumerate(csv.reader(fh), start=2):
            if not rec:
                continue
            if len(rec) != 4 + dim:
                raise TraceFormatError(f"{path}:{lineno}: expected {4 + dim} fields, got {len(rec)}")
            if node_id is None:
                node_id = rec[0]
            elif rec[0] != node_id:
                raise TraceFormatError(f"{path}:{lineno}: mixed node ids {node_id!r} and {rec[0]!r}")
            if not rec[2].strip():
                raise TraceFormatError(f"{path}:{lineno}: missing label")
            try:
                labels.append(GovernorMode.parse(rec[2]))
                stamps.append(int(rec[1]))
                if rec[3] not in ("0", "1"):
                    raise ValueError(f"valid flag must be 0 or 1, got {rec[3]!r}")
                valid.append(rec[3] == "1")
                rows.append([float(v) for v in rec[4:]])
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
    samples = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    if not np.all(np.isfinite(samples)):
        raise TraceFormatError(f"{path}: non-finite sample values")
    return LabeledTrace(node_id=node_id or path.stem, samples=samples, labels=labels,
                        valid_mask=np.array(valid, dtype=bool), timestamps=np.array(stamps, dtype=np.int64))


def write_table(reports: Sequence[det.EvaluationReport], path, average: bool = False) -> Path:
    """F-score table: ``node,n95_N,n95_A,...`` with one row per node."""
    path = Path(path)
    candidates = [r.percentile_n for r in reports[0].rows]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(det.table_header(candidates))
        for rep in reports:
            w.writerow(det.table_row(rep))
        if average and len(reports) > 1:
            w.writerow(det.macro_average(reports))
    return path


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def write_summary(rows, path) -> Path:
    """``node,normal_mean,anomaly_mean,ratio,best_n`` per node (blank when undefined)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "normal_mean", "anomaly_mean", "ratio", "best_n"])
        for node, normal, anomaly, ratio, best in rows:
            w.writerow([node, _fmt(normal), _fmt(anomaly), _fmt(ratio), "" if best is None else f"{best:g}"])
    return path


ROW_FIELDS = ["node_id", "timestamp_index", "label", "error", "normalized_error", "verdict"]


def write_rows(path, node_id, timestamps, labels, errors, normalized, verdicts) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for ts, lab, e, ne, v in zip(timestamps, labels, errors, normalized, verdicts):
            w.writerow([node_id, int(ts), lab.value if isinstance(lab, GovernorMode) else lab,
                        repr(float(e)), repr(float(ne)), v])
    return path


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ROW_FIELDS:
            raise TraceFormatError(f"{path}: expected columns {ROW_FIELDS}")
        out = []
        for rec in reader:
            out.append({
                "node_id": rec["node_id"],
                "timestamp_index": int(rec["timestamp_index"]),
                "label": rec["label"],
                "error": float(rec["error"]),
                "normalized_error": float(rec["normalized_error"]),
                "verdict": rec["verdict"],
            })
    return out
