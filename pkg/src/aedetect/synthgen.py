"""Synthetic multi-node HPC telemetry with frequency-governor anomalies.

Each node produces a time series of ``dim`` channels.  The first eight are
"core" physical channels driven by a shared workload process; the rest are
affine mixtures of the core channels plus independent noise.  Under the
default governor the clock frequency tracks the load; ``powersave`` and
``performance`` pin it to the lowest/highest value, which breaks every
relationship that goes through frequency (power, temperature, fans,
throughput, and the filler channels mixed from them).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

F_MIN = 2.0
F_MAX = 4.0
LOAD_AR = 0.95
LOAD_MEAN = 0.5
LOAD_NOISE = 0.05
NOISE_FRACTION = 0.02  # per-channel noise std, as a fraction of the channel range

N_CORE = 8
CORE_CHANNELS = (
    "load",
    "frequency",
    "power",
    "core_temp",
    "fan_speed",
    "room_temp",
    "throughput",
    "gpu_usage",
)

# nominal engineering ranges of the core channels
_CORE_LO = np.array([0.0, F_MIN, 300.0, 45.0, 1000.0, 20.0, 0.0, 0.0])
_CORE_SPAN = np.array([1.0, F_MAX - F_MIN, 900.0, 50.0, 5000.0, 5.0, 40.0, 1.0])

# Filler channels share the same "physics" on every node; nodes differ only
# through their NodeProfile offsets and gains.


class GovernorMode(enum.Enum):
    DEFAULT = "default"
    POWERSAVE = "powersave"
    PERFORMANCE = "performance"

    @classmethod
    def parse(cls, text: str) -> "GovernorMode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown governor mode {text!r}") from None


@dataclass(frozen=True)
class NodeProfile:
    """Per-node calibration: channel offsets and gains plus the RNG seed.

    ``baseline_offsets`` and ``gain_factors`` must have one entry per channel
    of the traces generated from this profile.  Load and frequency are never
    rescaled (their ranges are part of the generator contract); the entries
    for channels 0 and 1 are ignored.
    """

    node_id: str
    baseline_offsets: np.ndarray
    gain_factors: np.ndarray
    seed: int

    def __post_init__(self):
        offsets = np.asarray(self.baseline_offsets, dtype=np.float64)
        gains = np.asarray(self.gain_factors, dtype=np.float64)
        if offsets.ndim != 1 or offsets.shape != gains.shape:
            raise ValueError("offsets and gains must be 1-D arrays of equal length")
        if not np.all(gains > 0):
            raise ValueError("gain_factors must be strictly positive")
        if not (np.all(np.isfinite(offsets)) and np.all(np.isfinite(gains))):
            raise ValueError("offsets and gains must be finite")
        object.__setattr__(self, "baseline_offsets", offsets)
        object.__setattr__(self, "gain_factors", gains)

    @property
    def dim(self) -> int:
        return self.baseline_offsets.shape[0]

    @classmethod
    def random(cls, node_id: str, dim: int, seed: int) -> "NodeProfile":
        """Draw offsets in N(0, 0.5) and gains in U(0.5, 2) from ``seed``."""
        rng = np.random.default_rng([seed, 1])
        return cls(
            node_id=node_id,
            baseline_offsets=rng.normal(0.0, 0.5, size=dim),
            gain_factors=rng.uniform(0.5, 2.0, size=dim),
            seed=seed,
        )


@dataclass(frozen=True)
class AnomalySchedule:
    """Half-open ``(start, end, mode)`` intervals, sorted and disjoint."""

    intervals: tuple = ()

    def __post_init__(self):
        ivs = tuple((int(s), int(e), GovernorMode(m)) for s, e, m in self.intervals)
        prev_end = None
        for start, end, mode in ivs:
            if start >= end:
                raise ValueError(f"empty or reversed interval ({start}, {end})")
            if start < 0:
                raise ValueError(f"interval ({start}, {end}) starts before 0")
            if mode is GovernorMode.DEFAULT:
                raise ValueError("anomaly intervals cannot use the default governor")
            if prev_end is not None and start < prev_end:
                raise ValueError("intervals must be sorted and non-overlapping")
            prev_end = end
        object.__setattr__(self, "intervals", ivs)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def check_bounds(self, length: int) -> None:
        for start, end, _ in self.intervals:
            if end > length:
                raise ValueError(f"interval ({start}, {end}) exceeds trace length {length}")

    def labels(self, length: int) -> list[GovernorMode]:
        self.check_bounds(length)
        out = [GovernorMode.DEFAULT] * length
        for start, end, mode in self.intervals:
            out[start:end] = [mode] * (end - start)
        return out


@dataclass
class LabeledTrace:
    node_id: str
    samples: np.ndarray  # (T, d), engineering units
    labels: list = field(default_factory=list)
    valid_mask: np.ndarray = None
    timestamps: np.ndarray = None  # original sample indices, survives filtering

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a 2-D array")
        n = self.samples.shape[0]
        self.labels = list(self.labels)
        if self.valid_mask is None:
            self.valid_mask = np.ones(n, dtype=bool)
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.timestamps is None:
            self.timestamps = np.arange(n, dtype=np.int64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if not (len(self.labels) == n == self.valid_mask.shape[0] == self.timestamps.shape[0]):
            raise ValueError("samples, labels, valid_mask and timestamps must have equal length")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def label_array(self) -> np.ndarray:
        return np.array([m.value for m in self.labels], dtype=object)

    def anomaly_mask(self) -> np.ndarray:
        return np.array([m is not GovernorMode.DEFAULT for m in self.labels], dtype=bool)

    def take(self, index) -> "LabeledTrace":
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return LabeledTrace(
            node_id=self.node_id,
            samples=self.samples[index].reshape(len(index), self.dim),
            labels=[self.labels[i] for i in index],
            valid_mask=self.valid_mask[index],
            timestamps=self.timestamps[index],
        )

    def equals(self, other: "LabeledTrace") -> bool:
        return (
            self.node_id == other.node_id
            and np.array_equal(self.samples, other.samples)
            and self.labels == other.labels
            and np.array_equal(self.valid_mask, other.valid_mask)
            and np.array_equal(self.timestamps, other.timestamps)
        )


def _mixing(dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights (dim - N_CORE, N_CORE) and intercepts for the filler channels.

    The recipe belongs to the node: two nodes wire their derived sensors
    differently, so a model fitted to one node's channel relations does not
    transfer exactly to another's.
    """
    n_fill = dim - N_CORE
    weights = np.empty((n_fill, N_CORE))
    intercepts = np.empty(n_fill)
    freq_driven = (1, 2, 3, 4, 6)
    for j in range(n_fill):
        # seeded per channel: a channel's recipe does not depend on dim
        rng = np.random.default_rng([seed, 4, j])
        w = rng.uniform(-1.0, 1.0, size=N_CORE)
        # every filler channel sees the load and at least one frequency-driven channel
        w[0] = rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 1.0)
        k = freq_driven[rng.integers(len(freq_driven))]
        w[k] = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)
        weights[j] = w
        intercepts[j] = rng.uniform(-1.0, 1.0)
    return weights, intercepts


def _gap_mask(rng: np.random.Generator, length: int, gap_fraction: float) -> np.ndarray:
    mask = np.ones(length, dtype=bool)
    n_gap = int(round(gap_fraction * length))
    if n_gap == 0:
        return mask
    if n_gap >= length:
        return np.zeros(length, dtype=bool)
    n_free = length - n_gap
    n_runs = max(1, min(n_gap // 25, n_free + 1))
    # split n_gap into n_runs positive run lengths
    cuts = np.sort(rng.choice(np.arange(1, n_gap), size=n_runs - 1, replace=False)) if n_runs > 1 else []
    run_lengths = np.diff(np.concatenate([[0], cuts, [n_gap]])).astype(int)
    # distinct insertion points among the valid samples keep runs separated
    slots = np.sort(rng.choice(n_free + 1, size=n_runs, replace=False))
    pos = 0
    prev_slot = 0
    for slot, run in zip(slots, run_lengths):
        pos += slot - prev_slot
        mask[pos : pos + run] = False
        pos += run
        prev_slot = slot
    return mask


def generate_trace(
    profile: NodeProfile,
    length: int,
    dim: int,
    schedule: AnomalySchedule | Iterable = (),
    gap_fraction: float = 0.0,
) -> LabeledTrace:
    """Generate one labeled node trace.

    Pure function of its arguments: the randomness comes only from
    ``profile.seed``.  Frequency noise is truncated at three standard
    deviations so the range contract holds for every sample.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    if dim < N_CORE:
        raise ValueError(f"dim must be at least {N_CORE}, got {dim}")
    if profile.dim != dim:
        raise ValueError(f"profile has {profile.dim} channels, trace needs {dim}")
    if not 0.0 <= gap_fraction <= 1.0:
        raise ValueError("gap_fraction must lie in [0, 1]")
    if not isinstance(schedule, AnomalySchedule):
        schedule = AnomalySchedule(tuple(schedule))
    labels = schedule.labels(length)

    rng = np.random.default_rng([profile.seed, 0])
    modes = np.array([m.value for m in labels])
    powersave = modes == GovernorMode.POWERSAVE.value
    performance = modes == GovernorMode.PERFORMANCE.value

    # workload: AR(1) around LOAD_MEAN, clipped to [0, 1]
    innov = rng.normal(0.0, LOAD_NOISE, size=length)
    load = np.empty(length)
    level = LOAD_MEAN + innov[0] / math.sqrt(1 - LOAD_AR**2)
    for t in range(length):
        if t:
            level = LOAD_MEAN + LOAD_AR * (level - LOAD_MEAN) + innov[t]
        level = min(1.0, max(0.0, level))
        load[t] = level

    f_sigma = NOISE_FRACTION * (F_MAX - F_MIN)
    f_noise = np.clip(rng.normal(0.0, f_sigma, size=length), -3 * f_sigma, 3 * f_sigma)
    freq = F_MIN + load * (F_MAX - F_MIN)
    freq[powersave] = F_MIN
    freq[performance] = F_MAX
    freq = freq + f_noise
    fnorm = (freq - F_MIN) / (F_MAX - F_MIN)

    # power in watts: dynamic part scales with load x frequency, static with frequency
    power = 250.0 * load + 150.0 * fnorm + 200.0 * load * fnorm + 300.0
    power += rng.normal(0.0, NOISE_FRACTION * 600.0, size=length)

    # core temperature lags the power draw
    steady = 30.0 + 0.06 * power
    temp = np.empty(length)
    temp[0] = steady[0]
    t_noise = rng.normal(0.0, NOISE_FRACTION * 40.0, size=length)
    for t in range(1, length):
        temp[t] = temp[t - 1] + 0.3 * (steady[t] - temp[t - 1])
    temp += t_noise

    fan = 2000.0 + 80.0 * (temp - 50.0) + rng.normal(0.0, NOISE_FRACTION * 3000.0, size=length)

    room = np.empty(length)
    room_innov = rng.normal(0.0, 0.1, size=length)
    room[0] = 22.0
    for t in range(1, length):
        room[t] = 22.0 + 0.99 * (room[t - 1] - 22.0) + room_innov[t]

    throughput = 10.0 * load * freq + rng.normal(0.0, NOISE_FRACTION * 40.0, size=length)
    gpu = np.clip(0.8 * load + 0.1 + rng.normal(0.0, NOISE_FRACTION, size=length), 0.0, 1.0)

    core = np.column_stack([load, freq, power, temp, fan, room, throughput, gpu])

    # work on unit-range views; node calibration is applied there so offsets
    # and gains mean the same thing on every channel
    unit = (core - _CORE_LO) / _CORE_SPAN
    samples = np.empty((length, dim))
    samples[:, :N_CORE] = unit
    if dim > N_CORE:
        weights, intercepts = _mixing(dim, profile.seed)
        filler = unit @ weights.T + intercepts
        ranges = np.abs(weights).sum(axis=1)
        filler += rng.normal(0.0, 1.0, size=filler.shape) * (NOISE_FRACTION * ranges)
        samples[:, N_CORE:] = filler

    # load and frequency keep their nominal scale
    scaled = slice(2, dim)
    samples[:, scaled] = samples[:, scaled] * profile.gain_factors[scaled] + profile.baseline_offsets[scaled]
    samples[:, :N_CORE] = samples[:, :N_CORE] * _CORE_SPAN + _CORE_LO

    valid = _gap_mask(np.random.default_rng([profile.seed, 2]), length, gap_fraction)
    return LabeledTrace(node_id=profile.node_id, samples=samples, labels=labels, valid_mask=valid)


def fleet_generate(
    profiles: Sequence[NodeProfile],
    length: int,
    dim: int,
    schedules: Sequence | AnomalySchedule | None = None,
    gap_fraction: float = 0.0,
) -> list[LabeledTrace]:
    """One trace per profile.  ``schedules`` is a single schedule shared by
    all nodes or a list with one schedule per profile."""
    if not profiles:
        raise ValueError("at least one profile is required")
    ids = [p.node_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node_id in profiles")
    if schedules is None:
        schedules = [AnomalySchedule()] * len(profiles)
    elif isinstance(schedules, AnomalySchedule):
        schedules = [schedules] * len(profiles)
    elif len(schedules) != len(profiles):
        raise ValueError("need exactly one schedule per profile")
    return [
        generate_trace(p, length, dim, s, gap_fraction) for p, s in zip(profiles, schedules)
    ]


def default_schedule(length: int, seed: int, start_fraction: float = 0.5,
                     n_powersave: int = 2, n_performance: int = 1,
                     interval_fraction: float = 0.05) -> AnomalySchedule:
    """Spread governor anomalies over the tail of a trace.

    The tail after ``start_fraction`` is cut into equal slots, one per
    anomaly; each anomaly sits at a random offset inside its slot.
    Powersave periods come first and performance last.
    """
    modes = [GovernorMode.POWERSAVE] * n_powersave + [GovernorMode.PERFORMANCE] * n_performance
    if not modes:
        return AnomalySchedule()
    rng = np.random.default_rng([seed, 3])
    begin = int(math.ceil(start_fraction * length))
    slot = (length - begin) // len(modes)
    width = max(1, int(interval_fraction * length))
    if width >= slot:
        raise ValueError("trace too short for the requested anomaly layout")
    intervals = []
    for i, mode in enumerate(modes):
        lo = begin + i * slot
        start = lo + int(rng.integers(0, slot - width))
        intervals.append((start, start + width, mode))
    return AnomalySchedule(tuple(intervals))


def make_fleet(n_nodes: int, dim: int, seed: int, prefix: str = "node") -> list[NodeProfile]:
    return [NodeProfile.random(f"{prefix}{i:02d}", dim, seed * 1000 + i) for i in range(n_nodes)]
