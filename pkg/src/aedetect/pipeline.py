"""End-to-end experiment: per-node training, calibration and evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autoencoder as ae
from . import dataprep as dp
from . import detector as det
from .synthgen import LabeledTrace

log = logging.getLogger(__name__)


def training_rows(trace: LabeledTrace, train_fraction: float, holdout_fraction: float = 0.0):
    """Raw normal rows used for fitting, the held-out normal rows, and the eval rows.

    With ``holdout_fraction > 0`` the trailing part of the training window is
    kept out of the fit and used for threshold calibration instead.
    """
    train, evaluation = dp.split(trace, train_fraction)
    if not 0.0 <= holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must lie in [0, 1)")
    n_fit = len(train) - int(np.floor(holdout_fraction * len(train)))
    if n_fit == 0:
        raise ValueError("holdout leaves no rows to train on")
    fit = train.take(np.arange(n_fit))
    held = train.take(np.arange(n_fit, len(train)))
    return fit, held, evaluation


def train_node(trace: LabeledTrace, config: ae.TrainConfig, train_fraction: float = 0.5,
               holdout_fraction: float = 0.0, callback=None):
    fit, _, _ = training_rows(trace, train_fraction, holdout_fraction)
    stats = dp.fit_norm(fit.samples)
    return ae.train(dp.apply_norm(fit.samples, stats), config, norm=stats, callback=callback)


def calibration_errors(model: ae.AutoencoderModel, trace: LabeledTrace, train_fraction: float = 0.5,
                       holdout_fraction: float = 0.0) -> np.ndarray:
    fit, held, _ = training_rows(trace, train_fraction, holdout_fraction)
    rows = held if holdout_fraction > 0 else fit
    if len(rows) == 0:
        raise ValueError("no normal rows available for calibration")
    return ae.row_errors(model, dp.apply_norm(rows.samples, model.norm))


def eval_dataset(model: ae.AutoencoderModel, trace: LabeledTrace, train_fraction: float = 0.5) -> dp.Dataset:
    _, evaluation = dp.split(trace, train_fraction)
    if len(evaluation) == 0:
        raise ValueError(f"node {trace.node_id}: no evaluation rows after the training window")
    return dp.to_dataset(evaluation, model.norm)


def calibrate_node(model, trace, candidates=det.DEFAULT_CANDIDATES, train_fraction=0.5,
                   holdout_fraction=0.0):
    """Pick the threshold percentile for one node.

    Returns ``(profile, report, calibration_errors)``.
    """
    cal = calibration_errors(model, trace, train_fraction, holdout_fraction)
    validation = eval_dataset(model, trace, train_fraction)
    best_n, report = det.search_percentile(model, cal, validation, candidates)
    profile = det.calibrate(cal, best_n, node_id=trace.node_id)
    return profile, report, cal


@dataclass
class ScoredRows:
    node_id: str
    timestamps: np.ndarray
    labels: list
    errors: np.ndarray
    normalized: np.ndarray
    verdicts: list

    @property
    def anomaly_flags(self) -> np.ndarray:
        return np.array([v == det.ANOMALY for v in self.verdicts], dtype=bool)


def score_dataset(model, profile: det.DetectorProfile, dataset: dp.Dataset) -> ScoredRows:
    errors = ae.row_errors(model, dataset.X)
    return ScoredRows(
        node_id=dataset.node_id,
        timestamps=dataset.timestamps,
        labels=list(dataset.labels),
        errors=errors,
        normalized=errors / profile.train_error_mean,
        verdicts=[det.classify(e, profile) for e in errors],
    )


def evaluate_node(model, profile, trace, candidates=det.DEFAULT_CANDIDATES, train_fraction=0.5,
                  holdout_fraction=0.0):
    """Table-style report for every candidate plus the embedded profile's verdicts."""
    cal = calibration_errors(model, trace, train_fraction, holdout_fraction)
    dataset = eval_dataset(model, trace, train_fraction)
    scored = score_dataset(model, profile, dataset)
    report = det.evaluate_candidates(cal, scored.errors, dataset.anomaly_mask(), candidates,
                                     node_id=trace.node_id)
    summary = det.error_ratio_summary_from_errors(scored.errors, dataset.anomaly_mask(),
                                                  profile.train_error_mean)
    report.normal_error_mean, report.anomaly_error_mean = summary[0], summary[1]
    return report, scored


@dataclass
class NodeRun:
    node_id: str
    model: ae.AutoencoderModel
    history: list
    profile: det.DetectorProfile
    report: det.EvaluationReport


@dataclass
class FleetRun:
    nodes: list = field(default_factory=list)
    generic_model: ae.AutoencoderModel | None = None
    generic_summary: tuple | None = None  # (normal mean, anomaly mean, ratio)

    @property
    def dedicated_ratios(self) -> list[float]:
        return [n.report.ratio for n in self.nodes]


def run_fleet(traces: Sequence[LabeledTrace], config: ae.TrainConfig = ae.TrainConfig(),
              train_fraction: float = 0.5, candidates=det.DEFAULT_CANDIDATES,
              generic: bool = True) -> FleetRun:
    """Dedicated model per node and, optionally, one generic model on pooled data.

    The generic model is normalized on the pooled training rows, and its
    errors are normalized by its own mean training error before the
    anomaly/normal ratio is taken over all nodes' evaluation rows.
    """
    run = FleetRun()
    for trace in traces:
        model, history = train_node(trace, config, train_fraction)
        profile, report, _ = calibrate_node(model, trace, candidates, train_fraction)
        log.info("%s: best n=%g ratio=%.2f", trace.node_id, profile.percentile_n, report.ratio or float("nan"))
        run.nodes.append(NodeRun(trace.node_id, model, history, profile, report))
    if generic:
        parts = [dp.split(t, train_fraction) for t in traces]
        pooled = np.vstack([train.samples for train, _ in parts])
        stats = dp.fit_norm(pooled)
        model, _ = ae.train(dp.apply_norm(pooled, stats), config, norm=stats)
        mean = float(np.mean(ae.row_errors(model, dp.apply_norm(pooled, stats))))
        errors = np.concatenate([ae.row_errors(model, dp.apply_norm(ev.samples, stats)) for _, ev in parts])
        mask = np.concatenate([ev.anomaly_mask() for _, ev in parts])
        run.generic_model = model
        run.generic_summary = det.error_ratio_summary_from_errors(errors, mask, mean)
    return run
