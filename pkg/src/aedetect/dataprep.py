"""Gap filtering, chronological train/eval split and min-max normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .synthgen import GovernorMode, LabeledTrace


@dataclass(frozen=True)
class NormStats:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64)
        hi = np.asarray(self.max, dtype=np.float64)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("min and max must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("min must not exceed max")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def dim(self) -> int:
        return self.min.shape[0]


@dataclass
class Dataset:
    """Normalized rows of one node, with labels and original timestamps."""

    node_id: str
    X: np.ndarray
    labels: list
    timestamps: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        if len(self.labels) != self.X.shape[0] or len(self.timestamps) != self.X.shape[0]:
            raise ValueError("labels and timestamps must align with X")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("dataset contains non-finite values")

    def __len__(self):
        return self.X.shape[0]

    def anomaly_mask(self) -> np.ndarray:
        return np.array([m is not GovernorMode.DEFAULT for m in self.labels], dtype=bool)


def filter_valid(trace: LabeledTrace) -> LabeledTrace:
    return trace.take(trace.valid_mask)


def fit_norm(samples) -> NormStats:
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_norm needs a non-empty 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("fit_norm input contains non-finite values")
    return NormStats(X.min(axis=0), X.max(axis=0))


def apply_norm(samples, stats: NormStats) -> np.ndarray:
    """Scale to [0, 1] on the fitting range; constant columns map to 0.

    Values outside the fitted range are left unclamped.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.shape[-1] != stats.dim:
        raise ValueError(f"expected {stats.dim} features, got {X.shape[-1]}")
    span = stats.max - stats.min
    flat = span == 0
    safe = np.where(flat, 1.0, span)
    out = (X - stats.min) / safe
    if np.any(flat):
        out[..., flat] = 0.0
    return out


def denormalize(normalized, stats: NormStats) -> np.ndarray:
    Z = np.asarray(normalized, dtype=np.float64)
    return Z * (stats.max - stats.min) + stats.min


def split(trace: LabeledTrace, train_fraction: float) -> tuple[LabeledTrace, LabeledTrace]:
    """Chronological split of the valid rows.

    Returns ``(train, eval)`` in raw units.  ``train`` keeps only the
    default-governor rows of the leading ``train_fraction`` of valid rows;
    ``eval`` is every remaining valid row, labels included.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    valid = filter_valid(trace)
    n_train = int(np.floor(train_fraction * len(valid)))
    head = valid.take(np.arange(n_train))
    train = head.take(~head.anomaly_mask())
    if len(train) == 0:
        raise ValueError(f"node {trace.node_id}: no normal rows in the training window")
    evaluation = valid.take(np.arange(n_train, len(valid)))
    return train, evaluation


def to_dataset(trace: LabeledTrace, stats: NormStats) -> Dataset:
    return Dataset(
        node_id=trace.node_id,
        X=apply_norm(trace.samples, stats),
        labels=list(trace.labels),
        timestamps=trace.timestamps.copy(),
    )


def prepare(trace: LabeledTrace, train_fraction: float) -> tuple[Dataset, Dataset, NormStats]:
    """filter -> split -> fit on train -> normalize both sides."""
    train, evaluation = split(trace, train_fraction)
    stats = fit_norm(train.samples)
    return to_dataset(train, stats), to_dataset(evaluation, stats), stats
