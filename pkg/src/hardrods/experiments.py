"""Replica scheduling and experiment outputs.

Replica ``r`` draws from ``RandomStream(base_seed, r)`` and owns its state,
so results do not depend on how replicas are scheduled. Merges run in
replica-index order. The only run-dependent value (the wall-clock
timestamp) goes to ``metadata.json``; every other file is a deterministic
function of the configuration.
"""
from __future__ import annotations

import datetime as _dt
import json
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .measurement import (
    DensityProfile,
    ProfileAccumulator,
    TaggedTrack,
    density_window,
    gap_samples,
    merge_profiles,
    rod_labels,
    write_profile_csv,
    write_summary_json,
)
from .particles import (
    Model,
    SystemState,
    advance_model_a,
    advance_model_a_direct,
    advance_model_c,
    advance_model_r,
    check_invariants,
    init_model_a_pseudostationary,
    init_model_c,
    init_model_r,
)
from .sde_kernel import RandomStream
from .statcheck import seed_digest
from .storage import write_checkpoint, write_snapshots

__all__ = ["ReplicaResult", "ExperimentResult", "run_replica", "run_experiment", "initial_state",
           "advance", "collect_tracks", "snapshot_times"]


def initial_state(cfg: ExperimentConfig, stream: RandomStream) -> SystemState:
    p = cfg.params()
    if cfg.model is Model.BARRIER_PUSHED:
        return init_model_a_pseudostationary(p, stream)
    if cfg.model is Model.INFLUX_KILLED:
        return init_model_c(p)
    return init_model_r(p, stream)


def advance(cfg: ExperimentConfig, state: SystemState, n_steps: int, stream: RandomStream) -> SystemState:
    if n_steps == 0:
        return state
    if cfg.model is Model.BARRIER_PUSHED:
        if cfg.engine != "order":
            collision = "project" if cfg.engine == "direct-project" else "mirror"
            return advance_model_a_direct(state, n_steps, cfg.h, stream, collision)
        return advance_model_a(state, n_steps, cfg.h, stream, cfg.scheme)
    if cfg.model is Model.INFLUX_KILLED:
        return advance_model_c(state, n_steps, cfg.h, stream, cfg.scheme)
    return advance_model_r(state, n_steps, cfg.h, stream, cfg.reinsert)


def snapshot_times(cfg: ExperimentConfig) -> list[int]:
    """Step indices of recorded snapshots: every interval from burn-in to t_end, or t_end alone."""
    end = cfg.n_steps(cfg.t_end)
    if cfg.snapshot_interval <= 0:
        return [end]
    start, every = cfg.n_steps(cfg.burn_in), cfg.n_steps(cfg.snapshot_interval)
    return list(range(start, end + 1, every))


@dataclass
class ReplicaResult:
    index: int
    profile: DensityProfile
    snapshots: int
    window_density: np.ndarray          # (snapshots, windows)
    gap_sum: np.ndarray                 # per window
    gap_count: np.ndarray
    alive: np.ndarray                   # per snapshot
    jumps: np.ndarray                   # cumulative jump count per snapshot
    final: SystemState
    stream: RandomStream
    states: list = field(default_factory=list)


def run_replica(cfg: ExperimentConfig, index: int, keep_states: bool = False) -> ReplicaResult:
    stream = RandomStream(cfg.base_seed, index)
    state = initial_state(cfg, stream)
    acc = ProfileAccumulator(cfg.bin_edges())
    nw = len(cfg.windows)
    dens, alive, jumps, states = [], [], [], []
    gap_sum, gap_count = np.zeros(nw), np.zeros(nw, dtype=np.int64)
    done = 0
    for target in snapshot_times(cfg):
        state = advance(cfg, state, target - done, stream)
        done = target
        check_invariants(state)
        acc.add(state)
        dens.append([density_window(state, lo, hi) for lo, hi in cfg.windows])
        for j, (lo, hi) in enumerate(cfg.windows):
            g = gap_samples(state, lo, hi)
            gap_sum[j] += g.sum()
            gap_count[j] += g.shape[0]
        alive.append(state.alive)
        jumps.append(state.jumps)
        if keep_states:
            states.append(state.copy())
    return ReplicaResult(index=index, profile=acc.profile(), snapshots=acc.count,
                         window_density=np.array(dens, dtype=float).reshape(len(dens), nw),
                         gap_sum=gap_sum, gap_count=gap_count, alive=np.array(alive), jumps=np.array(jumps),
                         final=state, stream=stream, states=states)


def run_replicas(cfg: ExperimentConfig, keep_states: bool = False) -> list[ReplicaResult]:
    cfg.validate()
    indices = range(cfg.replicas)
    if cfg.workers == 1:
        return [run_replica(cfg, r, keep_states) for r in indices]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(run_replica, cfg, r, keep_states) for r in indices]
        results = [f.result() for f in futures]
    return sorted(results, key=lambda r: r.index)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    profile: DensityProfile
    summary: dict
    replicas: list
    paths: dict = field(default_factory=dict)


def _summarize(cfg: ExperimentConfig, reps: list[ReplicaResult]) -> dict:
    p = cfg.params()
    windows = []
    for j, (lo, hi) in enumerate(cfg.windows):
        per_rep = [float(r.window_density[:, j].mean()) for r in reps]
        gs = sum(float(r.gap_sum[j]) for r in reps)
        gc = sum(int(r.gap_count[j]) for r in reps)
        windows.append({"window": [lo, hi], "mean_density": float(np.mean(per_rep)),
                        "replica_density": per_rep, "mean_gap": gs / gc if gc else None, "gap_pairs": gc})
    finals = [r.final for r in reps]
    return {
        "config": cfg.to_dict(),
        "params": {"a": p.a, "sigma2": p.sigma2, "epsilon": p.epsilon, "n": p.n, "b": p.b},
        "seeds": {"base_seed": cfg.base_seed, "stream_ids": list(range(cfg.replicas)),
                  "digest": seed_digest([cfg.base_seed, *range(cfg.replicas)])},
        "burn_in": cfg.burn_in,
        "snapshots_per_replica": reps[0].snapshots,
        "snapshot_count": sum(r.snapshots for r in reps),
        "windows": windows,
        "mean_alive": float(np.mean([r.alive.mean() for r in reps])),
        "killed": [s.killed for s in finals],
        "injected": [s.injected for s in finals],
        "jumps": [s.jumps for s in finals],
        "kill_overshoot_max": float(max(s.kill_stats[0] for s in finals)),
        "kills_over_tolerance": int(sum(s.kill_stats[1] for s in finals)),
        "final_time": finals[0].t,
    }


def run_experiment(cfg: ExperimentConfig, out: Optional[str] = None, write: bool = True) -> ExperimentResult:
    """Run all replicas, merge them and (optionally) write the artifacts.

    Files: ``profile.csv``, ``summary.json``, ``snapshots.csv`` (replica 0),
    ``checkpoints/replica_NNNN.bin`` (final state and stream, resumable),
    ``config.txt`` and ``metadata.json``.
    """
    cfg.validate()
    reps = run_replicas(cfg, keep_states=write)
    profile = merge_profiles([r.profile for r in reps])
    summary = _summarize(cfg, reps)
    result = ExperimentResult(cfg, profile, summary, reps)
    if not write:
        return result
    root = Path(out or cfg.out)
    (root / "checkpoints").mkdir(parents=True, exist_ok=True)
    paths = {
        "profile": root / "profile.csv",
        "summary": root / "summary.json",
        "snapshots": root / "snapshots.csv",
        "config": root / "config.txt",
        "metadata": root / "metadata.json",
    }
    write_profile_csv(paths["profile"], profile)
    write_summary_json(paths["summary"], summary)
    write_snapshots(paths["snapshots"], reps[0].states)
    paths["config"].write_text(cfg.serialize())
    for r in reps:
        write_checkpoint(root / "checkpoints" / f"replica_{r.index:04d}.bin", r.final, r.stream)
    write_metadata(paths["metadata"], cfg)
    result.paths = {k: str(v) for k, v in paths.items()}
    return result


def write_metadata(path, cfg: ExperimentConfig) -> None:
    meta = {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.to_dict(),
    }
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def collect_tracks(cfg: ExperimentConfig, replica: int, sample_every: int, window: tuple[float, float],
                   t_start: float, t_stop: float) -> list[TaggedTrack]:
    """Tracks of every rod while its centre stays inside ``window``.

    Positions are sampled every ``sample_every`` steps between ``t_start``
    and ``t_stop``; a rod's track ends the first time it leaves the window.
    """
    cfg.validate()
    stream = RandomStream(cfg.base_seed, replica)
    state = advance(cfg, initial_state(cfg, stream), cfg.n_steps(t_start), stream)
    n_samples = cfg.n_steps(t_stop - t_start) // sample_every
    open_tracks: dict[int, tuple[list, list]] = {}
    closed: list[TaggedTrack] = []
    lo, hi = window

    def close(label):
        ts, xs = open_tracks.pop(label)
        if len(ts) > 1:
            closed.append(TaggedTrack(label, ts, xs))

    for _ in range(n_samples + 1):
        inside = (state.x >= lo) & (state.x <= hi)
        labels = rod_labels(state)
        present = set()
        for lab, x in zip(labels[inside], state.x[inside]):
            lab = int(lab)
            present.add(lab)
            open_tracks.setdefault(lab, ([], []))
            open_tracks[lab][0].append(state.t)
            open_tracks[lab][1].append(float(x))
        for lab in [k for k in open_tracks if k not in present]:
            close(lab)
        state = advance(cfg, state, sample_every, stream)
    for lab in list(open_tracks):
        close(lab)
    return closed
