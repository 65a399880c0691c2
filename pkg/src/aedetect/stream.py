"""Line-delimited online inference.

Input lines are ``node_id,seq,v0,...,v{d-1}`` in raw units; each produces
``node_id,seq,error,normalized_error,verdict,latency_us``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from . import autoencoder as ae
from . import dataprep as dp
from . import detector as det


class DimensionMismatch(ValueError):
    pass


class MalformedRecord(ValueError):
    pass


@dataclass(frozen=True)
class StreamRecord:
    node_id: str
    seq: int
    values: np.ndarray


@dataclass(frozen=True)
class AlarmEvent:
    node_id: str
    seq: int
    error: float
    normalized_error: float
    verdict: str
    latency_us: float

    def format(self) -> str:
        return (f"{self.node_id},{self.seq},{self.error!r},{self.normalized_error!r},"
                f"{self.verdict},{self.latency_us:.1f}")


def parse_record(line: str, dim: int) -> StreamRecord:
    fields = line.strip().split(",")
    if len(fields) < 2:
        raise MalformedRecord("expected node_id,seq,values...")
    if len(fields) - 2 != dim:
        raise DimensionMismatch(f"record has {len(fields) - 2} values, model expects {dim}")
    try:
        seq = int(fields[1])
        values = np.array([float(v) for v in fields[2:]], dtype=np.float64)
    except ValueError as exc:
        raise MalformedRecord(str(exc)) from None
    if not np.all(np.isfinite(values)):
        raise MalformedRecord("non-finite value")
    return StreamRecord(fields[0], seq, values)


class OnlineDetector:
    """One node's model and threshold; scores records one at a time."""

    def __init__(self, model: ae.AutoencoderModel, profile: det.DetectorProfile):
        if profile is None:
            raise ValueError("model file has no detector profile; run calibrate first")
        self.model = model
        self.profile = profile

    def score(self, record: StreamRecord) -> AlarmEvent:
        t0 = time.perf_counter()
        x = dp.apply_norm(record.values, self.model.norm)
        _, out = ae.forward(self.model, x)
        error = float(np.mean(np.abs(x - out)))
        verdict = det.classify(error, self.profile)
        latency = (time.perf_counter() - t0) * 1e6
        return AlarmEvent(record.node_id, record.seq, error, error / self.profile.train_error_mean,
                          verdict, latency)

    def run(self, lines: Iterable[str], out: TextIO, err: TextIO) -> list[AlarmEvent]:
        """Score every well-formed line in order.

        Malformed lines are reported on ``err`` and skipped; a wrong number of
        values raises :class:`DimensionMismatch`.
        """
        events = []
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = parse_record(line, self.model.d)
            except MalformedRecord as exc:
                err.write(f"line {lineno}: skipped malformed record: {exc}\n")
                continue
            event = self.score(record)
            out.write(event.format() + "\n")
            events.append(event)
        return events


def median_latency_us(events: Iterable[AlarmEvent]) -> float:
    lat = [e.latency_us for e in events]
    return float(np.median(lat)) if lat else math.nan
