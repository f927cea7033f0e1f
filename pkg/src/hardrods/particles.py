"""Interacting hard-rod engines.

Barrier-pushed model (``Model.BARRIER_PUSHED``)
    n rods pushed from the left by a wall moving at speed c. Built from n
    independent reflected free coordinates: sort them into Y and place
    ``X_k = Y_k + (k-1) eps + eps/2 + c t`` (k = 1..n).

Influx-killed model (``Model.INFLUX_KILLED``)
    A rod enters at 0 every ``eps/a`` time units; rods are removed when their
    right edge reaches 1. With ``killed`` removals so far, the alive free
    coordinates sorted in decreasing order give
    ``X_j = Y_j - j eps + eps/2 + a t`` for labels ``j = killed+1, ...``.

Jump-reset model (``Model.JUMP_RESET``)
    n rods in [0, 1] with no drift; a rod whose centre reaches 1 restarts
    at the left end. Stepped by Gaussian proposals and chain projection.

The barrier model can also be stepped directly (proposal + projection),
which serves as an independent cross-check of the order-statistics engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import _kernels
from .analytics import DiffusionParams
from .sde_kernel import RandomStream, StepScheme, advance_reflected, sample_exponential

__all__ = [
    "Model",
    "SystemState",
    "InvariantError",
    "ReinsertRule",
    "init_model_a_pseudostationary",
    "model_a_state",
    "step_model_a",
    "advance_model_a",
    "step_model_a_direct",
    "advance_model_a_direct",
    "init_model_c",
    "step_model_c",
    "advance_model_c",
    "model_c_positions",
    "init_model_r",
    "step_model_r",
    "advance_model_r",
    "project_chain",
    "reconstruct_intervals",
    "check_invariants",
    "steps_per_injection",
]


class Model(Enum):
    BARRIER_PUSHED = 0
    INFLUX_KILLED = 1
    JUMP_RESET = 2


class ReinsertRule(Enum):
    """What a jump-reset rod does when it reaches 1.

    PUSH: restart at 0 and push the chain right if the origin is occupied.
    SUPPRESS: jump only when the slot at 0 is free; otherwise stay and reflect.
    """

    PUSH = _kernels.REINSERT_PUSH
    SUPPRESS = _kernels.REINSERT_SUPPRESS


class InvariantError(RuntimeError):
    pass


@dataclass
class SystemState:
    """Snapshot of a rod system.

    ``x`` holds alive rod centres in ascending order. ``z`` holds the free
    coordinates of the order-statistics engines (unsorted, one per alive
    rod); the direct barrier engine stores the equivalent sorted Y values.
    """

    t: float
    model: Model
    z: np.ndarray
    x: np.ndarray
    params: DiffusionParams
    killed: int = 0
    injected: int = 0
    jumps: int = 0
    kill_stats: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def alive(self) -> int:
        return self.x.shape[0]

    def copy(self) -> "SystemState":
        return replace(self, z=self.z.copy(), x=self.x.copy(), kill_stats=self.kill_stats.copy())


def _check_h(h):
    if not h > 0:
        raise ValueError(f"time step must be > 0, got {h}")


# ---------------------------------------------------------------- barrier model

def _require_barrier(params: DiffusionParams):
    if params.n is None:
        raise ValueError("barrier-pushed model needs a rod count n")


def _model_a_positions(z, eps, c, t):
    y = np.sort(z)
    return y + eps * np.arange(y.shape[0]) + 0.5 * eps + c * t


def model_a_state(params: DiffusionParams, z, t: float = 0.0) -> SystemState:
    """Barrier-model state with the given free coordinates."""
    _require_barrier(params)
    z = np.array(z, dtype=float)
    if z.shape != (params.n,):
        raise ValueError(f"expected {params.n} free coordinates, got shape {z.shape}")
    if np.any(z < 0):
        raise ValueError("free coordinates must be >= 0")
    x = _model_a_positions(z, params.epsilon, params.speed, t)
    return SystemState(t=t, model=Model.BARRIER_PUSHED, z=z, x=x, params=params)


def init_model_a_pseudostationary(params: DiffusionParams, stream: RandomStream) -> SystemState:
    """n iid free coordinates from the stationary law Exp(2c/sigma2), at t = 0."""
    _require_barrier(params)
    z = sample_exponential(stream, params.rate, params.n)
    return model_a_state(params, z, 0.0)


def advance_model_a(state: SystemState, n_steps: int, h: float, stream: RandomStream,
                    scheme=StepScheme.BRIDGE_EXACT) -> SystemState:
    """``n_steps`` order-statistics steps; same draws and result as repeated :func:`step_model_a`."""
    _check_h(h)
    if state.model is not Model.BARRIER_PUSHED:
        raise ValueError("advance_model_a needs a barrier-pushed state")
    p = state.params
    z = state.z.copy()
    advance_reflected(z, n_steps, h, p.speed, p.sigma2, stream, scheme)
    t = state.t
    for _ in range(n_steps):
        t += h
    x = _model_a_positions(z, p.epsilon, p.speed, t)
    return replace(state, t=t, z=z, x=x)


def step_model_a(state: SystemState, h: float, stream: RandomStream,
                 scheme=StepScheme.BRIDGE_EXACT) -> SystemState:
    return advance_model_a(state, 1, h, stream, scheme)


def advance_model_a_direct(state: SystemState, n_steps: int, h: float, stream: RandomStream,
                           collision: str = "mirror", block: int = 1 << 20) -> SystemState:
    """Direct engine: Gaussian proposals projected behind the moving barrier.

    ``collision="project"`` stops proposals on the constraint set (discrete
    Skorohod map, O(sqrt(h)) over-packing). ``"mirror"`` pushes the chain to
    the new barrier first and then reflects the noisy proposal across the
    constraints it crossed before projecting.
    """
    _check_h(h)
    if state.model is not Model.BARRIER_PUSHED:
        raise ValueError("advance_model_a_direct needs a barrier-pushed state")
    if collision not in ("mirror", "project"):
        raise ValueError(f"unknown collision rule {collision!r}")
    p = state.params
    x = state.x.copy()
    n = x.shape[0]
    sd = math.sqrt(p.sigma2 * h)
    t = state.t
    per_block = max(1, block // max(n, 1))
    left = n_steps
    while left > 0:
        k = min(per_block, left)
        t = _kernels.model_a_direct_steps(x, t, k, h, p.speed, p.epsilon, sd, stream.normals(k * n),
                                          collision == "mirror")
        left -= k
    eps = p.epsilon
    z = x - eps * np.arange(n) - 0.5 * eps - p.speed * t
    return replace(state, t=t, x=x, z=np.maximum(z, 0.0))


def step_model_a_direct(state: SystemState, h: float, stream: RandomStream,
                        collision: str = "mirror") -> SystemState:
    return advance_model_a_direct(state, 1, h, stream, collision)


# ----------------------------------------------------------- influx-killed model

def steps_per_injection(params: DiffusionParams, h: float) -> int:
    """Integer number of steps between injections; rejects step sizes that do not divide eps/a."""
    _check_h(h)
    if not params.epsilon > 0:
        raise ValueError("influx-killed model needs epsilon > 0")
    ratio = params.epsilon / (params.a * h)
    m = round(ratio)
    if m < 1 or abs(ratio - m) > 1e-9 * ratio:
        raise ValueError(f"step size must divide eps/a: eps/(a*h) = {ratio:g} is not an integer")
    return int(m)


def model_c_positions(z_alive, killed: int, eps: float, a: float, t: float) -> np.ndarray:
    """Ascending rod centres from alive free coordinates."""
    y = np.sort(np.asarray(z_alive, dtype=float))[::-1]
    labels = killed + 1 + np.arange(y.shape[0])
    x = y - labels * eps + 0.5 * eps + a * t
    return x[::-1].copy()


def init_model_c(params: DiffusionParams) -> SystemState:
    if not params.epsilon > 0:
        raise ValueError("influx-killed model needs epsilon > 0")
    return SystemState(t=0.0, model=Model.INFLUX_KILLED, z=np.empty(0), x=np.empty(0), params=params)


def advance_model_c(state: SystemState, n_steps: int, h: float, stream: RandomStream,
                    scheme=StepScheme.BRIDGE_EXACT, block: int = 1 << 18) -> SystemState:
    """``n_steps`` steps of the influx-killed system.

    Each step advances every alive free coordinate, injects a coordinate at 0
    on each injection time reached, and then kills maximal coordinates until
    none exceeds the current threshold. Unused draws go back to the stream,
    so one call with k steps equals k calls with one step.
    """
    if state.model is not Model.INFLUX_KILLED:
        raise ValueError("advance_model_c needs an influx-killed state")
    p = state.params
    m = steps_per_injection(p, h)
    scheme = StepScheme.parse(scheme)
    bridge = scheme is StepScheme.BRIDGE_EXACT
    if state.z.shape[0] != state.injected - state.killed:
        raise InvariantError(
            f"bookkeeping broken: {state.z.shape[0]} alive but injected-killed = "
            f"{state.injected - state.killed}")
    sd, drift_h, two_var = math.sqrt(p.sigma2 * h), p.a * h, 2.0 * p.sigma2 * h
    n_alive, killed, injected, t = state.z.shape[0], state.killed, state.injected, state.t
    z = np.empty(max(16, 2 * n_alive))
    z[:n_alive] = state.z
    kill_stats = state.kill_stats.copy()
    tol = 3.0 * sd
    left = n_steps
    while left > 0:
        # alive count grows by at most one per m steps, which bounds the draws
        k = min(left, max(1, block // (n_alive + 2)))
        while k > 1 and k * (n_alive + k // m + 2) > block:
            k //= 2
        cap = n_alive + k // m + 2
        if z.shape[0] < cap:
            grown = np.empty(2 * cap)
            grown[:n_alive] = z[:n_alive]
            z = grown
        need = k * cap
        g = stream.normals(need)
        u = stream.uniforms(need) if bridge else g[:0]
        n_alive, killed, injected, t, done, pos = _kernels.model_c_steps(
            z, n_alive, killed, injected, t, k, h, p.a, p.epsilon, sd, drift_h, two_var,
            scheme.code, g, u, 1e-6 * h, kill_stats, tol)
        stream.put_back(normals=g[pos:], uniforms=u[pos:] if bridge else None)
        left -= done
    z = z[:n_alive].copy()
    x = model_c_positions(z, killed, p.epsilon, p.a, t)
    return replace(state, t=t, z=z, x=x, killed=killed, injected=injected, kill_stats=kill_stats)


def step_model_c(state: SystemState, h: float, stream: RandomStream,
                 scheme=StepScheme.BRIDGE_EXACT) -> SystemState:
    return advance_model_c(state, 1, h, stream, scheme)


# --------------------------------------------------------------- jump-reset model

def _require_jump_reset(params: DiffusionParams):
    if params.n is None:
        raise ValueError("jump-reset model needs a rod count n")
    if (params.n - 1) * params.epsilon > 1.0:
        raise ValueError(
            f"{params.n} rods of width {params.epsilon} do not fit in [0, 1] (n*eps > 1 + eps)")


def init_model_r(params: DiffusionParams, stream: RandomStream | None = None, x=None) -> SystemState:
    """Jump-reset state, by default uniform over the feasible configurations."""
    _require_jump_reset(params)
    n, eps = params.n, params.epsilon
    if x is None:
        if stream is None:
            raise ValueError("need a stream or explicit centres")
        slack = 1.0 - (n - 1) * eps
        x = np.sort(stream.uniforms(n) * slack) + eps * np.arange(n)
    x = np.array(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected {n} centres")
    return SystemState(t=0.0, model=Model.JUMP_RESET, z=np.empty(0), x=x, params=params)


def advance_model_r(state: SystemState, n_steps: int, h: float, stream: RandomStream,
                    rule=ReinsertRule.PUSH, block: int = 1 << 20) -> SystemState:
    _check_h(h)
    if state.model is not Model.JUMP_RESET:
        raise ValueError("advance_model_r needs a jump-reset state")
    rule = rule if isinstance(rule, ReinsertRule) else ReinsertRule[str(rule).upper()]
    p = state.params
    x = state.x.copy()
    n = x.shape[0]
    sd = math.sqrt(p.sigma2 * h)
    t, jumps = state.t, state.jumps
    per_block = max(1, block // n)
    left = n_steps
    while left > 0:
        k = min(per_block, left)
        t, j = _kernels.model_r_steps(x, t, k, h, p.epsilon, sd, stream.normals(k * n),
                                      rule.value, 1e-12)
        jumps += j
        left -= k
    return replace(state, t=t, x=x, jumps=jumps)


def step_model_r(state: SystemState, h: float, stream: RandomStream,
                 rule=ReinsertRule.PUSH) -> SystemState:
    return advance_model_r(state, 1, h, stream, rule)


# ------------------------------------------------------------------- geometry

def project_chain(proposal, epsilon: float, lo: float = -np.inf, hi: float = np.inf) -> np.ndarray:
    """Nearest configuration with ``lo <= x_0``, gaps ``>= epsilon`` and ``x_{n-1} <= hi``."""
    x = np.array(proposal, dtype=float)
    n = x.shape[0]
    if n and hi - lo < (n - 1) * epsilon:
        raise ValueError(
            f"empty feasible set: {n} centres with spacing {epsilon} do not fit in [{lo}, {hi}]")
    _kernels.project_chain_inplace(x, float(epsilon), float(lo), float(hi), np.empty(n), np.empty(n))
    return x


def reconstruct_intervals(state: SystemState, tol: float = 1e-9) -> np.ndarray:
    """Rod intervals as an (n, 2) array of (left, right) rows."""
    eps = state.params.epsilon
    x = state.x
    if x.shape[0] > 1 and np.min(np.diff(x)) < eps - tol:
        raise InvariantError(f"rods overlap: min gap {np.min(np.diff(x))} < eps={eps}")
    return np.column_stack([x - 0.5 * eps, x + 0.5 * eps])


def check_invariants(state: SystemState, tol: float = 1e-9) -> None:
    """Raise :class:`InvariantError` if the state violates its model's constraints."""
    p = state.params
    eps = p.epsilon
    x = state.x
    if x.shape[0] > 1:
        gap = np.min(np.diff(x))
        if gap < eps - tol:
            raise InvariantError(f"spacing violated: min gap {gap} < {eps}")
    if state.model is Model.BARRIER_PUSHED:
        if x.shape[0] != p.n:
            raise InvariantError(f"rod count {x.shape[0]} != n={p.n}")
        if x[0] < p.speed * state.t + 0.5 * eps - tol:
            raise InvariantError("leftmost rod behind the barrier")
    elif state.model is Model.INFLUX_KILLED:
        if x.shape[0] != state.injected - state.killed:
            raise InvariantError("alive count != injected - killed")
        expected = math.floor(state.t * p.a / eps + 1e-6)
        if state.injected != expected:
            raise InvariantError(f"injected {state.injected} != floor(t a/eps) = {expected}")
        if x.shape[0] and (x[0] < -0.5 * eps - tol or x[-1] >= 1.0 - 0.5 * eps + tol):
            raise InvariantError("rod centre outside [-eps/2, 1 - eps/2)")
    elif state.model is Model.JUMP_RESET:
        if x.shape[0] != p.n:
            raise InvariantError(f"rod count {x.shape[0]} != n={p.n}")
        if x.shape[0] and (x[0] < -tol or x[-1] > 1.0 + tol):
            raise InvariantError("rod centre outside [0, 1]")
