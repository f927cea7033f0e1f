"""Acceptance criteria as runnable checks.

Each ``criterion_k`` returns a list of :class:`StatReport`. Thresholds are
fixed here; seeds are fixed per criterion so every run is reproducible.
Suites: ``unit`` (1, 2, 5), ``theorems`` (3, 4, 6), ``exploratory`` (7, 8, 9).
Exploratory reports never gate, except the free-particle control of the
increment-scaling estimator.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .analytics import (
    DiffusionParams,
    drift_for_mass,
    green_function,
    predicted_density_model_c,
    predicted_gap,
)
from .config import ExperimentConfig
from .experiments import collect_tracks, run_experiment
from .measurement import TaggedTrack, density_window, increment_scaling
from .particles import (
    Model,
    ReinsertRule,
    advance_model_a,
    check_invariants,
    init_model_a_pseudostationary,
    project_chain,
)
from .sde_kernel import RandomStream, StepScheme, advance_reflected, killed_occupation_density
from .statcheck import StatReport, fraction_ci, ks_statistic, profile_deviation, seed_digest

__all__ = ["SUITES", "CRITERIA", "brute_force_projection", "run_criteria", "verify"]

SUITES = {"unit": (1, 2, 5), "theorems": (3, 4, 6), "exploratory": (7, 8, 9)}
SUITES["all"] = SUITES["unit"] + SUITES["theorems"] + SUITES["exploratory"]


class _Cache(dict):
    """Shares the influx-killed profile run between criteria 4 and 8."""


# ---------------------------------------------------------------- criterion 1

def criterion_1(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Single reflected coordinate: endpoints at t=50 against Exp(2a/sigma2)."""
    seed, chains = 101, 10_000
    p = DiffusionParams(a=1.0, sigma2=1.0)
    z = advance_reflected(np.zeros(chains), 50_000, 1e-3, p.a, p.sigma2, RandomStream(seed),
                          StepScheme.BRIDGE_EXACT)
    d = ks_statistic(z, lambda v: -np.expm1(-p.rate * np.asarray(v)))
    return [StatReport("1 single-particle stationarity (KS vs Exp(2))", d, 0.02, replicas=chains,
                       seeds=seed_digest([seed, 0]))]


# ---------------------------------------------------------------- criterion 2

def criterion_2(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Occupation density of the coordinate killed at v1 against the Green function."""
    seed, paths, v1 = 202, 20_000, 0.5
    p = DiffusionParams(a=0.5, sigma2=1.0)
    edges, dens = killed_occupation_density(p, v1, 1e-4, paths, 50, RandomStream(seed))
    mid = 0.5 * (edges[1:] + edges[:-1])
    g = green_function(p, v1, mid)
    rel = float(np.sum(np.abs(dens - g)) / np.sum(g))
    return [StatReport("2 Green function (relative L1)", rel, 0.03, replicas=paths,
                       seeds=seed_digest([seed, 0]),
                       details={"mass_ratio": float(dens.sum() / g.sum())})]


# ---------------------------------------------------------------- criterion 3

def _barrier_gates(states) -> tuple[float, float, int, int]:
    hi_ok = sum(density_window(s, 0.1, 0.6) >= 0.9 for s in states)
    lo_ok = sum(density_window(s, 1.5, 2.0) <= 0.1 for s in states)
    n = len(states)
    return fraction_ci(hi_ok, n)[0], fraction_ci(lo_ok, n)[0], hi_ok, lo_ok


def criterion_3(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Sharp transition of the barrier-pushed system, at t=0 and after stepping to t=1."""
    seed = 303
    p = DiffusionParams.barrier(c=30.0, sigma2=1.0, n=1000, b=1.0)
    states = [init_model_a_pseudostationary(p, RandomStream(seed, r)) for r in range(200)]
    for s in states:
        check_invariants(s)
    lo_hi, lo_lo, k_hi, k_lo = _barrier_gates(states)
    out = [StatReport("3 sharp transition at t=0 (min Wilson lower bound)", min(lo_hi, lo_lo), 0.9,
                      orientation=">=", replicas=200, seeds=seed_digest([seed, *range(200)]),
                      details={"dense_window_hits": k_hi, "empty_window_hits": k_lo})]
    stepped = []
    for r in range(50):
        s = advance_model_a(states[r], 1000, 1e-3, RandomStream(seed + 1, r))
        check_invariants(s)
        stepped.append(s)
    lo_hi, lo_lo, k_hi, k_lo = _barrier_gates(stepped)
    out.append(StatReport("3 sharp transition at t=1 (min Wilson lower bound)", min(lo_hi, lo_lo), 0.9,
                          orientation=">=", replicas=50, seeds=seed_digest([seed + 1, *range(50)]),
                          details={"dense_window_hits": k_hi, "empty_window_hits": k_lo}))
    return out


# ---------------------------------------------------------------- criterion 4

def influx_profile_config(**overrides) -> ExperimentConfig:
    base = dict(model=Model.INFLUX_KILLED, drift=0.5, sigma2=1.0, epsilon=0.002, h=2e-4,
                t_end=40.0, burn_in=20.0, snapshot_interval=0.5, bins=9, bin_lo=0.05, bin_hi=0.95,
                windows=((0.15, 0.25), (0.45, 0.55), (0.75, 0.85)), replicas=20, base_seed=404)
    base.update(overrides)
    return ExperimentConfig(**base)


def _influx_run(cache):
    if cache is not None and "influx" in cache:
        return cache["influx"]
    res = run_experiment(influx_profile_config(), write=False)
    if cache is not None:
        cache["influx"] = res
    return res


def criterion_4(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Time-averaged influx-killed profile against (1-x)/(1-x+sigma2/2a)."""
    res = _influx_run(cache)
    p = res.config.params()
    sup, l1 = profile_deviation(res.profile, lambda x: predicted_density_model_c(x, p))
    s = res.summary
    kills = sum(s["killed"])
    return [
        StatReport("4 influx-killed profile (sup bin deviation)", sup, 0.07, replicas=res.config.replicas,
                   seeds=s["seeds"]["digest"],
                   details={"l1": l1, "profile": res.profile.values.tolist(), "mean_alive": s["mean_alive"],
                            "snapshots": s["snapshot_count"]}),
        StatReport("4 kills with right edge beyond 1 + 3 sigma sqrt(h) (fraction)",
                   s["kills_over_tolerance"] / max(kills, 1), 0.01, replicas=res.config.replicas,
                   seeds=s["seeds"]["digest"], details={"kills": kills, "max_overshoot": s["kill_overshoot_max"]}),
    ]


# ---------------------------------------------------------------- criterion 5

def brute_force_projection(u, eps: float, lo: float, hi: float) -> np.ndarray:
    """Nearest feasible point by enumerating active constraint sets.

    Constraints ``A x >= c``: ``x_0 >= lo``, ``x_{i+1} - x_i >= eps`` and
    ``-x_{n-1} >= -hi``. For each subset the equality-constrained minimiser
    is ``u + A_S^T lam``; the closest candidate that is feasible is optimal.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    rows, rhs = [], []
    if np.isfinite(lo):
        r = np.zeros(n); r[0] = 1.0
        rows.append(r); rhs.append(lo)
    for i in range(n - 1):
        r = np.zeros(n); r[i], r[i + 1] = -1.0, 1.0
        rows.append(r); rhs.append(eps)
    if np.isfinite(hi):
        r = np.zeros(n); r[-1] = -1.0
        rows.append(r); rhs.append(-hi)
    A, c = np.array(rows).reshape(-1, n), np.array(rhs)
    best, best_d = None, np.inf
    for k in range(0, min(n, A.shape[0]) + 1):
        for S in itertools.combinations(range(A.shape[0]), k):
            S = list(S)
            if S:
                As = A[S]
                M = As @ As.T
                if abs(np.linalg.det(M)) < 1e-12:
                    continue
                lam = np.linalg.solve(M, c[S] - As @ u)
                x = u + As.T @ lam
            else:
                x = u.copy()
            if A.shape[0] and np.any(A @ x < c - 1e-10):
                continue
            d = float(np.sum((x - u) ** 2))
            if d < best_d - 1e-15:
                best, best_d = x, d
    if best is None:
        raise ValueError("no feasible point")
    return best


def criterion_5(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Chain projection against the active-set enumeration oracle."""
    seed = 505
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        eps = float(rng.uniform(0.0, 0.4))
        lo = float(rng.uniform(-1.0, 0.5))
        hi = lo + (n - 1) * eps + float(rng.uniform(0.0, 1.5))
        u = rng.normal(0.5, 1.0, n)
        worst = max(worst, float(np.max(np.abs(project_chain(u, eps, lo, hi) - brute_force_projection(u, eps, lo, hi)))))
    return [StatReport("5 projection vs active-set oracle (max abs diff)", worst, 1e-8, replicas=1000,
                       seeds=seed_digest([seed]))]


# ---------------------------------------------------------------- criterion 6

def criterion_6(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Barrier model: order-statistics engine against the projection engine."""
    common = dict(model=Model.BARRIER_PUSHED, drift=1.0, sigma2=1.0, epsilon=0.01, n=50, h=1e-4,
                  t_end=1.0, burn_in=0.0, snapshot_interval=0.0, bins=20, bin_lo=0.0, bin_hi=1.5,
                  replicas=500)
    a = run_experiment(ExperimentConfig(engine="order", base_seed=606, **common), write=False)
    b = run_experiment(ExperimentConfig(engine="direct", base_seed=607, **common), write=False)
    plain = run_experiment(ExperimentConfig(engine="direct-project", base_seed=607, **common), write=False)

    def l1(p, q):
        return float(np.sum(np.abs(p.values - q.values) * p.widths) / np.sum(p.widths))

    return [
        StatReport("6 two-engine profile distance, mirrored collisions (L1)", l1(a.profile, b.profile), 0.05,
                   replicas=500, seeds=seed_digest([606, 607, 500]),
                   details={"order": a.profile.values.tolist(), "direct": b.profile.values.tolist()}),
        StatReport("6 two-engine profile distance, plain projection (L1)", l1(a.profile, plain.profile), 0.05,
                   replicas=500, seeds=seed_digest([606, 607, 500]), gating=False,
                   details={"direct_project": plain.profile.values.tolist()}),
    ]


# ---------------------------------------------------------------- criterion 7

def criterion_7(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Jump-reset system: fit an effective drift from the jump rate, compare profiles."""
    out = []
    n, b, sigma2 = 150, 0.3, 1.0
    eps = b / n
    for rule in ReinsertRule:
        cfg = ExperimentConfig(model=Model.JUMP_RESET, drift=1.0, sigma2=sigma2, epsilon=eps, n=n, h=1e-4,
                               t_end=15.0, burn_in=5.0, snapshot_interval=0.5, bins=9, bin_lo=0.05, bin_hi=0.95,
                               replicas=4, base_seed=707, reinsert=rule)
        res = run_experiment(cfg, write=False)
        window = cfg.t_end - cfg.burn_in
        rate = float(np.mean([(r.jumps[-1] - r.jumps[0]) / window for r in res.replicas]))
        a_eff = rate * eps
        p_eff = DiffusionParams(a=a_eff, sigma2=sigma2)
        sup, l1 = profile_deviation(res.profile, lambda x: predicted_density_model_c(x, p_eff))
        out.append(StatReport(f"7 jump-reset profile vs fitted law, rule={rule.name.lower()} (sup)", sup, 0.07,
                              replicas=cfg.replicas, seeds=res.summary["seeds"]["digest"], gating=False,
                              details={"a_eff": a_eff, "a_from_mass": drift_for_mass(b, sigma2), "l1": l1,
                                       "jump_rate": rate, "profile": res.profile.values.tolist()}))
    return out


# ---------------------------------------------------------------- criterion 8

def criterion_8(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Mean gap in windows around x = 0.2, 0.5, 0.8 against eps sigma2 / (2a(1-x))."""
    res = _influx_run(cache)
    p = res.config.params()
    rel = {}
    for w in res.summary["windows"]:
        x = 0.5 * (w["window"][0] + w["window"][1])
        pred = float(predicted_gap(x, p))
        rel[round(x, 6)] = abs(w["mean_gap"] - pred) / pred
    return [StatReport("8 gap law (max relative error)", max(rel.values()), 0.2, replicas=res.config.replicas,
                       seeds=res.summary["seeds"]["digest"], gating=False,
                       details={str(k): v for k, v in rel.items()})]


# ---------------------------------------------------------------- criterion 9

TAGGED_LAGS = (1e-3, 2e-3, 4e-3, 8e-3)


def criterion_9(cache: Optional[_Cache] = None) -> list[StatReport]:
    """Increment scaling of bulk rods (reported) and of a free Brownian path (gating control)."""
    cfg = influx_profile_config(replicas=1, base_seed=909, windows=())
    min_len = 10 * max(TAGGED_LAGS)
    tracks = []
    for r in range(4):
        tracks += [t for t in collect_tracks(cfg, r, 5, (0.3, 0.7), 20.0, 30.0) if t.duration >= min_len]
    slope, var = increment_scaling(tracks, TAGGED_LAGS)
    dt = 1e-3
    g = RandomStream(910).normals(100_000)
    free = TaggedTrack(0, dt * np.arange(100_001), np.r_[0.0, np.cumsum(math.sqrt(dt) * g)])
    free_slope, _ = increment_scaling(free, TAGGED_LAGS)
    return [
        StatReport("9 tagged bulk rod |slope - 0.5|", abs(slope - 0.5), 0.2, replicas=4,
                   seeds=seed_digest([909, 0, 1, 2, 3]), gating=False,
                   details={"slope": slope, "lags": list(TAGGED_LAGS), "variance": var.tolist(),
                            "tracks": len(tracks)}),
        StatReport("9 free-particle control |slope - 1|", abs(free_slope - 1.0), 0.05, replicas=1,
                   seeds=seed_digest([910]), details={"slope": free_slope}),
    ]


CRITERIA: dict[int, Callable] = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
                                 6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}
_EXPLORATORY = set(SUITES["exploratory"])


def run_criteria(ids, echo: Optional[Callable[[str], None]] = None) -> list[StatReport]:
    cache = _Cache()
    reports = []
    for k in ids:
        t0 = time.perf_counter()
        for rep in CRITERIA[k](cache):
            rep.details["seconds"] = round(time.perf_counter() - t0, 3)
            reports.append(rep)
            if echo:
                echo(rep.line())
    return reports


def verify(suite: str = "all", out: Optional[str] = None, echo: Optional[Callable[[str], None]] = print):
    """Run a suite; returns ``(exit_status, reports)`` and writes ``verify_<suite>.json`` under ``out``."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    reports = run_criteria(SUITES[suite], echo)
    status = 0 if all(r.passed for r in reports if r.gating) else 1
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        payload = {"suite": suite, "status": status, "reports": [r.to_dict() for r in reports]}
        (Path(out) / f"verify_{suite}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return status, reports
