"""Observables: windowed mass density, binned profiles, gaps and tagged tracks."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .particles import Model, SystemState

__all__ = [
    "Frame",
    "DensityProfile",
    "ProfileAccumulator",
    "TaggedTrack",
    "cumulative_mass",
    "density_window",
    "density_profile",
    "merge_profiles",
    "gap_samples",
    "gap_stats",
    "increment_variance",
    "increment_scaling",
    "rod_labels",
    "write_profile_csv",
    "read_profile_csv",
    "write_summary_json",
]


class Frame(Enum):
    STATIC = "static"
    BARRIER_COMOVING = "comoving"


def _frame(state: SystemState) -> tuple[Frame, float]:
    if state.model is Model.BARRIER_PUSHED:
        return Frame.BARRIER_COMOVING, state.params.speed * state.t
    return Frame.STATIC, 0.0


@dataclass
class DensityProfile:
    """Mass fraction per bin. ``bin_edges`` are in the profile's frame."""

    bin_edges: np.ndarray
    values: np.ndarray
    frame: Frame = Frame.STATIC

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.bin_edges.ndim != 1 or self.bin_edges.shape[0] < 2:
            raise ValueError("need at least one bin")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly ascending")
        if self.values.shape != (self.bin_edges.shape[0] - 1,):
            raise ValueError("one value per bin expected")

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)


def cumulative_mass(state: SystemState, y) -> np.ndarray:
    """Rod material in ``(-inf, y]`` (static coordinates).

    Rods are disjoint, so every rod starting at or before ``y`` except the
    last one lies fully to the left of ``y``.
    """
    eps = state.params.epsilon
    y = np.asarray(y, dtype=float)
    left = state.x - 0.5 * eps
    k = np.searchsorted(left, y, side="right")
    last = left[np.maximum(k - 1, 0)] if left.shape[0] else np.zeros_like(y)
    partial = np.where(k > 0, np.minimum(y - last, eps), 0.0)
    return np.maximum(k - 1, 0) * eps + partial


def density_window(state: SystemState, x1: float, x2: float) -> float:
    """Fraction of ``[x1, x2]`` covered by rods; shifted by ``c t`` for the barrier model."""
    if not x1 < x2:
        raise ValueError(f"empty window [{x1}, {x2}]")
    _, shift = _frame(state)
    m = cumulative_mass(state, [x1 + shift, x2 + shift])
    return float(min(1.0, max(0.0, (m[1] - m[0]) / (x2 - x1))))


def density_profile(state: SystemState, bins) -> DensityProfile:
    """Per-bin mass fraction. ``bins`` is a sequence of edges."""
    edges = np.asarray(bins, dtype=float)
    frame, shift = _frame(state)
    m = cumulative_mass(state, edges + shift)
    vals = np.clip(np.diff(m) / np.diff(edges), 0.0, 1.0)
    return DensityProfile(edges, vals, frame)


def merge_profiles(profiles: Sequence[DensityProfile], weights: Optional[Sequence[float]] = None) -> DensityProfile:
    """Bin-wise weighted mean, reduced in the order given."""
    if not profiles:
        raise ValueError("nothing to merge")
    edges = profiles[0].bin_edges
    w = np.ones(len(profiles)) if weights is None else np.asarray(weights, dtype=float)
    acc = np.zeros_like(profiles[0].values)
    for p, wi in zip(profiles, w):
        if not np.array_equal(p.bin_edges, edges) or p.frame is not profiles[0].frame:
            raise ValueError("profiles on different bins")
        acc += wi * p.values
    return DensityProfile(edges, acc / w.sum(), profiles[0].frame)


class ProfileAccumulator:
    """Running sum of snapshot profiles on fixed bins."""

    def __init__(self, bins):
        self.edges = np.asarray(bins, dtype=float)
        self.total = np.zeros(self.edges.shape[0] - 1)
        self.count = 0
        self.frame = Frame.STATIC

    def add(self, state: SystemState) -> None:
        p = density_profile(state, self.edges)
        self.total += p.values
        self.frame = p.frame
        self.count += 1

    def profile(self) -> DensityProfile:
        if self.count == 0:
            raise ValueError("no snapshots accumulated")
        return DensityProfile(self.edges, self.total / self.count, self.frame)


def gap_samples(state: SystemState, x1: float, x2: float) -> np.ndarray:
    """Gaps ``left_{k+1} - right_k`` for consecutive pairs whose midpoint lies in ``[x1, x2]``."""
    _, shift = _frame(state)
    x = state.x
    if x.shape[0] < 2:
        return np.empty(0)
    mid = 0.5 * (x[1:] + x[:-1]) - shift
    sel = (mid >= x1) & (mid <= x2)
    return np.maximum(np.diff(x)[sel] - state.params.epsilon, 0.0)


def gap_stats(state: SystemState, x1: float, x2: float) -> Optional[float]:
    """Mean gap in the window, or ``None`` when no pair qualifies."""
    if not x1 < x2:
        raise ValueError(f"empty window [{x1}, {x2}]")
    g = gap_samples(state, x1, x2)
    return float(g.mean()) if g.shape[0] else None


def rod_labels(state: SystemState) -> np.ndarray:
    """Label of each entry of ``state.x``.

    Influx-killed rods are numbered by order of entry (the rightmost alive
    rod carries ``killed + 1``); the other models number rods 1..n from the left.
    """
    n = state.x.shape[0]
    if state.model is Model.INFLUX_KILLED:
        return state.injected - np.arange(n)
    return np.arange(1, n + 1)


@dataclass
class TaggedTrack:
    label: int
    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.times.shape != self.positions.shape or self.times.ndim != 1:
            raise ValueError("times and positions must be 1-d and of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0]) if self.times.shape[0] else 0.0


def _lag_steps(track: TaggedTrack, lag: float) -> int:
    dt = np.diff(track.times)
    if dt.shape[0] == 0:
        raise ValueError("track too short")
    step = dt.mean()
    if np.max(np.abs(dt - step)) > 1e-6 * step:
        raise ValueError("track must be sampled on a uniform grid")
    k = int(round(lag / step))
    if k < 1 or abs(k * step - lag) > 1e-6 * lag:
        raise ValueError(f"lag {lag} is not a multiple of the sampling step {step}")
    return k


def increment_variance(tracks, lag: float) -> float:
    """Variance of lag increments from overlapping windows, pooled over tracks.

    Per track with N unit steps and lag L there are K = N - L + 1 overlapping
    increments. The centred sum of squares is divided by K (1 - L/N) instead
    of K; this plug-in correction removes the bias from estimating the mean
    increment and makes the estimate unbiased for Brownian paths with drift.
    Sums and divisors are pooled across tracks.
    """
    if isinstance(tracks, TaggedTrack):
        tracks = [tracks]
    ss = 0.0
    denom = 0.0
    for tr in tracks:
        k = _lag_steps(tr, lag)
        n = tr.positions.shape[0] - 1
        if n < 10 * k:
            raise ValueError(f"track of {n} steps too short for lag {lag} (need 10x)")
        d = tr.positions[k:] - tr.positions[:-k]
        ss_i = float(np.sum((d - d.mean()) ** 2))
        # rounding residue of a deterministic track counts as zero
        ss += 0.0 if ss_i <= 1e-20 * float(np.sum(d * d)) else ss_i
        denom += d.shape[0] * (1.0 - k / n)
    if denom == 0:
        raise ValueError("no usable tracks")
    return ss / denom


def increment_scaling(tracks, lags: Sequence[float]) -> tuple[float, np.ndarray]:
    """OLS slope of log Var(X_{t+lag} - X_t) against log lag, and the variances.

    Brownian tracks give slope 1. Raises ``ValueError`` with fewer than three
    lags, a track shorter than ten times the largest lag, or a zero variance.
    """
    lags = np.asarray(lags, dtype=float)
    if lags.shape[0] < 3:
        raise ValueError("need at least three lags")
    var = np.array([increment_variance(tracks, lag) for lag in lags])
    if np.any(var <= 0.0):
        raise ValueError("zero increment variance: slope undefined")
    slope = np.polyfit(np.log(lags), np.log(var), 1)[0]
    return float(slope), var


def write_profile_csv(path, profile: DensityProfile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "density"])
        for lo, hi, v in zip(profile.bin_edges[:-1], profile.bin_edges[1:], profile.values):
            w.writerow([repr(float(lo)), repr(float(hi)), repr(float(v))])


def read_profile_csv(path, frame: Frame = Frame.STATIC) -> DensityProfile:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    edges = [float(rows[0]["bin_left"])] + [float(r["bin_right"]) for r in rows]
    return DensityProfile(edges, [float(r["density"]) for r in rows], frame)


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Enum):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")
