"""Percentile thresholds, binary classification and per-class F-scores."""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autoencoder as ae

NORMAL = "normal"
ANOMALY = "anomaly"
DEFAULT_CANDIDATES = (95.0, 97.0, 99.0)


@dataclass(frozen=True)
class DetectorProfile:
    node_id: str
    theta: float
    percentile_n: float
    train_error_mean: float


def percentile(values, n: float) -> float:
    """Nearest-rank percentile: the ``ceil(n/100 * N)``-th smallest value."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("percentile of an empty sequence")
    if not (0 < n <= 100):
        raise ValueError(f"percentile rank must lie in (0, 100], got {n}")
    # exact rational arithmetic: n/100*N in floats can land just above an integer
    rank = math.ceil(Fraction(n) * v.size / 100)
    return float(v[rank - 1])


def calibrate(errors_normal, n: float, node_id: str = "") -> DetectorProfile:
    errors = np.asarray(errors_normal, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("calibration needs at least one error value")
    return DetectorProfile(
        node_id=node_id,
        theta=percentile(errors, n),
        percentile_n=float(n),
        train_error_mean=float(np.mean(errors)),
    )


def classify(error: float, profile: DetectorProfile | float) -> str:
    theta = profile.theta if isinstance(profile, DetectorProfile) else float(profile)
    if not math.isfinite(error):
        raise ValueError(f"non-finite reconstruction error {error!r}")
    return ANOMALY if error > theta else NORMAL


def classify_many(errors, theta: float) -> np.ndarray:
    """Boolean anomaly flags; same rule as :func:`classify`."""
    errors = np.asarray(errors, dtype=np.float64)
    if not np.all(np.isfinite(errors)):
        raise ValueError("non-finite reconstruction error")
    return errors > theta


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f: float
    tp: int
    fp: int
    fn: int


def _ratio(num, den):
    return num / den if den else 0.0


def f_scores(predictions, labels) -> dict:
    """Per-class precision, recall and F for boolean anomaly flags.

    ``predictions`` and ``labels`` are sequences of booleans (True = anomaly).
    Zero denominators give 0.
    """
    pred = np.asarray(predictions, dtype=bool)
    true = np.asarray(labels, dtype=bool)
    if pred.shape != true.shape:
        raise ValueError("predictions and labels differ in length")
    if pred.size == 0:
        raise ValueError("cannot score an empty set")
    out = {}
    for cls, p, t in ((ANOMALY, pred, true), (NORMAL, ~pred, ~true)):
        tp = int(np.sum(p & t))
        fp = int(np.sum(p & ~t))
        fn = int(np.sum(~p & t))
        prec = _ratio(tp, tp + fp)
        rec = _ratio(tp, tp + fn)
        out[cls] = ClassScores(prec, rec, _ratio(2 * prec * rec, prec + rec), tp, fp, fn)
    return out


@dataclass
class CandidateResult:
    percentile_n: float
    theta: float
    scores: dict
    tn: int = 0

    @property
    def f_normal(self) -> float:
        return self.scores[NORMAL].f

    @property
    def f_anomaly(self) -> float:
        return self.scores[ANOMALY].f

    @property
    def objective(self) -> float:
        return 0.5 * (self.f_normal + self.f_anomaly)

    def confusion(self) -> dict:
        a = self.scores[ANOMALY]
        return {"tp": a.tp, "fp": a.fp, "fn": a.fn, "tn": self.tn}


@dataclass
class EvaluationReport:
    node_id: str
    rows: list = field(default_factory=list)
    best_n: float | None = None
    normal_error_mean: float | None = None
    anomaly_error_mean: float | None = None

    @property
    def ratio(self) -> float | None:
        if self.normal_error_mean is None or self.anomaly_error_mean is None:
            return None
        return self.anomaly_error_mean / self.normal_error_mean

    def row(self, n: float) -> CandidateResult:
        for r in self.rows:
            if r.percentile_n == n:
                return r
        raise KeyError(n)

    @property
    def best(self) -> CandidateResult:
        return self.row(self.best_n)


def evaluate_candidates(calibration_errors, eval_errors, eval_anomaly, candidates=DEFAULT_CANDIDATES,
                        node_id: str = "") -> EvaluationReport:
    """Score every candidate percentile and pick the best one.

    Best means the highest mean of the two class F-scores; ties go to the
    larger percentile.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("at least one percentile candidate is required")
    eval_errors = np.asarray(eval_errors, dtype=np.float64)
    truth = np.asarray(eval_anomaly, dtype=bool)
    if eval_errors.size == 0:
        raise ValueError("empty validation set")
    report = EvaluationReport(node_id=node_id)
    for n in candidates:
        theta = percentile(calibration_errors, n)
        pred = classify_many(eval_errors, theta)
        scores = f_scores(pred, truth)
        report.rows.append(CandidateResult(float(n), theta, scores, tn=int(np.sum(~pred & ~truth))))
    best = max(report.rows, key=lambda r: (r.objective, r.percentile_n))
    report.best_n = best.percentile_n
    return report


def search_percentile(model: ae.AutoencoderModel, calibration_errors, validation,
                      candidates: Sequence[float] = DEFAULT_CANDIDATES) -> tuple[float, EvaluationReport]:
    """Generate-and-test over ``candidates`` on a labeled normalized dataset."""
    if len(validation) == 0:
        raise ValueError("empty validation set")
    errors = ae.row_errors(model, validation.X)
    report = evaluate_candidates(calibration_errors, errors, validation.anomaly_mask(), candidates,
                                 node_id=validation.node_id)
    mean = float(np.mean(calibration_errors))
    summary = error_ratio_summary_from_errors(errors, validation.anomaly_mask(), mean)
    report.normal_error_mean, report.anomaly_error_mean = summary[0], summary[1]
    return report.best_n, report


def error_ratio_summary_from_errors(errors, anomaly_mask, train_error_mean: float):
    """``(normal mean, anomaly mean, ratio)`` of errors divided by the training mean.

    A group without rows yields ``None`` for its mean and for the ratio.
    """
    if not train_error_mean > 0:
        raise ValueError("train_error_mean must be positive")
    normalized = np.asarray(errors, dtype=np.float64) / train_error_mean
    mask = np.asarray(anomaly_mask, dtype=bool)
    normal = float(np.mean(normalized[~mask])) if np.any(~mask) else None
    anomaly = float(np.mean(normalized[mask])) if np.any(mask) else None
    ratio = anomaly / normal if normal and anomaly is not None else None
    return normal, anomaly, ratio


def error_ratio_summary(model: ae.AutoencoderModel, dataset, train_error_mean: float):
    errors = ae.row_errors(model, dataset.X)
    return error_ratio_summary_from_errors(errors, dataset.anomaly_mask(), train_error_mean)


def format_percentile(n: float) -> str:
    return f"{n:g}".replace(".", "_")


def table_header(candidates) -> list[str]:
    cols = ["node"]
    for n in candidates:
        tag = format_percentile(n)
        cols += [f"n{tag}_N", f"n{tag}_A"]
    return cols


def table_row(report: EvaluationReport) -> list[str]:
    out = [report.node_id]
    for r in report.rows:
        out += [f"{r.f_normal:.4f}", f"{r.f_anomaly:.4f}"]
    return out


def macro_average(reports: Sequence[EvaluationReport]) -> list[str]:
    """Per-column mean over nodes, laid out like :func:`table_row`."""
    out = ["average"]
    for i in range(len(reports[0].rows)):
        out.append(f"{np.mean([r.rows[i].f_normal for r in reports]):.4f}")
        out.append(f"{np.mean([r.rows[i].f_anomaly for r in reports]):.4f}")
    return out
