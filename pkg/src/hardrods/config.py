"""Experiment configuration: a flat ``key = value`` text format plus CLI overrides."""
from __future__ import annotations

import argparse
import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .analytics import DiffusionParams
from .particles import Model, ReinsertRule, steps_per_injection
from .sde_kernel import StepScheme

__all__ = ["ExperimentConfig", "ConfigError", "MODEL_NAMES", "parse_model", "add_config_arguments",
           "config_from_args"]

MODEL_NAMES = {Model.BARRIER_PUSHED: "barrier", Model.INFLUX_KILLED: "influx", Model.JUMP_RESET: "jump"}
_MODEL_ALIASES = {"a": Model.BARRIER_PUSHED, "barrier": Model.BARRIER_PUSHED, "barrierpushed": Model.BARRIER_PUSHED,
                  "c": Model.INFLUX_KILLED, "influx": Model.INFLUX_KILLED, "influxkilled": Model.INFLUX_KILLED,
                  "r": Model.JUMP_RESET, "jump": Model.JUMP_RESET, "jumpreset": Model.JUMP_RESET}


# "order": order-statistics construction; "direct": projection integrator with
# mirrored collisions; "direct-project": projection integrator, plain Skorohod step
ENGINES = ("order", "direct", "direct-project")


class ConfigError(ValueError):
    pass


def parse_model(value) -> Model:
    if isinstance(value, Model):
        return value
    try:
        return _MODEL_ALIASES[str(value).strip().lower().replace("_", "").replace("-", "")]
    except KeyError:
        raise ConfigError(f"unknown model {value!r} (expected barrier, influx or jump)") from None


def _parse_windows(text: str):
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(","):
        lo, hi = part.split(":")
        out.append((float(lo), float(hi)))
    return tuple(out)


def _format_windows(windows) -> str:
    return ",".join(f"{lo!r}:{hi!r}" for lo, hi in windows)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a simulation run.

    ``drift`` is ``a``; for the barrier model it is also the barrier speed.
    ``b`` defaults to ``n * epsilon`` when ``n`` is set.
    """

    model: Model = Model.INFLUX_KILLED
    drift: float = 0.5
    sigma2: float = 1.0
    epsilon: float = 0.002
    n: Optional[int] = None
    b: Optional[float] = None
    scheme: StepScheme = StepScheme.BRIDGE_EXACT
    reinsert: ReinsertRule = ReinsertRule.PUSH
    engine: str = "order"
    h: float = 2e-4
    t_end: float = 40.0
    burn_in: float = 20.0
    snapshot_interval: float = 0.5
    bins: int = 9
    bin_lo: float = 0.05
    bin_hi: float = 0.95
    windows: tuple = ()
    replicas: int = 1
    base_seed: int = 0
    workers: int = 1
    out: str = "hardrods-out"

    def __post_init__(self):
        object.__setattr__(self, "model", parse_model(self.model))
        object.__setattr__(self, "scheme", StepScheme.parse(self.scheme))
        if not isinstance(self.reinsert, ReinsertRule):
            try:
                object.__setattr__(self, "reinsert", ReinsertRule[str(self.reinsert).upper()])
            except KeyError:
                raise ConfigError(f"unknown reinsertion rule {self.reinsert!r}") from None
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r} (expected one of {ENGINES})")
        object.__setattr__(self, "windows", tuple((float(lo), float(hi)) for lo, hi in self.windows))

    # -- derived ---------------------------------------------------------
    def params(self) -> DiffusionParams:
        try:
            if self.model is Model.BARRIER_PUSHED:
                if self.n is None:
                    raise ConfigError("barrier model needs n")
                b = self.b if self.b is not None else self.n * self.epsilon
                return DiffusionParams.barrier(c=self.drift, sigma2=self.sigma2, n=self.n, b=b)
            return DiffusionParams(a=self.drift, sigma2=self.sigma2, epsilon=self.epsilon, n=self.n, b=self.b)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def bin_edges(self) -> np.ndarray:
        return np.linspace(self.bin_lo, self.bin_hi, self.bins + 1)

    def n_steps(self, duration: float) -> int:
        k = round(duration / self.h)
        if abs(k * self.h - duration) > 1e-9 * max(1.0, duration):
            raise ConfigError(f"duration {duration} is not a multiple of h={self.h}")
        return int(k)

    def validate(self) -> "ExperimentConfig":
        """Reject infeasible settings before any simulation starts."""
        if not self.h > 0:
            raise ConfigError(f"h must be > 0, got {self.h}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.bins < 1 or not self.bin_lo < self.bin_hi:
            raise ConfigError("need at least one bin on a non-empty range")
        if self.t_end < 0 or self.burn_in < 0:
            raise ConfigError("times must be >= 0")
        if self.burn_in > 0 and not self.t_end > self.burn_in:
            raise ConfigError(f"t_end={self.t_end} must exceed burn_in={self.burn_in}")
        if self.snapshot_interval < 0:
            raise ConfigError("snapshot_interval must be >= 0")
        for lo, hi in self.windows:
            if not lo < hi:
                raise ConfigError(f"empty window {lo}:{hi}")
        p = self.params()
        if self.model is Model.INFLUX_KILLED:
            try:
                steps_per_injection(p, self.h)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.engine != "order" and self.model is not Model.BARRIER_PUSHED:
            raise ConfigError("the direct engine exists for the barrier model only")
        if self.model is Model.JUMP_RESET:
            if p.n is None:
                raise ConfigError("jump-reset model needs n")
            if (p.n - 1) * p.epsilon > 1.0:
                raise ConfigError(f"n*eps = {p.n * p.epsilon} exceeds the domain capacity 1 + eps")
        self.n_steps(self.burn_in)
        self.n_steps(self.t_end)
        if self.snapshot_interval > 0:
            self.n_steps(self.snapshot_interval)
        return self

    # -- text format -----------------------------------------------------
    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "model":
                v = MODEL_NAMES[v]
            elif f.name == "scheme":
                v = v.value
            elif f.name == "reinsert":
                v = v.name.lower()
            elif f.name == "windows":
                v = [list(w) for w in v]
            out[f.name] = v
        return out

    def serialize(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "model":
                text = MODEL_NAMES[v]
            elif f.name == "scheme":
                text = v.value
            elif f.name == "reinsert":
                text = v.name.lower()
            elif f.name == "windows":
                text = _format_windows(v)
            elif v is None:
                text = ""
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        kinds = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in kinds:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = _coerce(key, val)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.parse(Path(path).read_text())

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


_INTS = {"n", "bins", "replicas", "base_seed", "workers"}
_OPTIONAL = {"n", "b"}


def _coerce(key, val: str):
    if key in _OPTIONAL and val == "":
        return None
    if key == "windows":
        return _parse_windows(val)
    if key in ("model", "scheme", "reinsert", "engine", "out"):
        return val
    try:
        if key in _INTS:
            return int(val)
        x = float(val)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {val!r}") from None
    if math.isnan(x):
        raise ConfigError(f"{key} is NaN")
    return x


# -- command-line integration ---------------------------------------------

_FLAGS = [
    ("--model", "model", str, "barrier, influx or jump"),
    ("--epsilon", "epsilon", float, "rod width"),
    ("--sigma2", "sigma2", float, "noise variance per unit time"),
    ("--drift", "drift", float, "drift a of the free coordinates"),
    ("--barrier-speed", "barrier_speed", float, "barrier speed c (sets the drift for the barrier model)"),
    ("--n", "n", int, "rod count"),
    ("--b", "b", float, "total rod mass n*epsilon"),
    ("--h", "h", float, "time step"),
    ("--t-end", "t_end", float, "final time"),
    ("--burn-in", "burn_in", float, "time before snapshots are recorded"),
    ("--snapshot-interval", "snapshot_interval", float, "spacing of recorded snapshots"),
    ("--bins", "bins", int, "number of profile bins"),
    ("--bin-range", "bin_range", str, "profile range lo:hi"),
    ("--windows", "windows", str, "density windows lo:hi,lo:hi"),
    ("--replicas", "replicas", int, "independent replicas"),
    ("--seed", "base_seed", int, "base seed"),
    ("--scheme", "scheme", str, "grid or bridge"),
    ("--reinsert", "reinsert", str, "push or suppress (jump model)"),
    ("--engine", "engine", str, "order, direct or direct-project (barrier model)"),
    ("--workers", "workers", int, "replica worker threads"),
    ("--out", "out", str, "output directory"),
]


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    for flag, dest, typ, helptext in _FLAGS:
        parser.add_argument(flag, dest=dest, type=typ, default=None, help=helptext)


def config_from_args(args, base: Optional[ExperimentConfig] = None, default_out: Optional[str] = None) -> ExperimentConfig:
    """File values first, then flags; flags win."""
    cfg = base or ExperimentConfig()
    if getattr(args, "config", None):
        cfg = ExperimentConfig.load(args.config)
    elif default_out is not None:
        cfg = dataclasses.replace(cfg, out=default_out)
    changes = {}
    for _, dest, _, _ in _FLAGS:
        v = getattr(args, dest, None)
        if v is None:
            continue
        if dest == "barrier_speed":
            changes["drift"] = v
            changes.setdefault("model", Model.BARRIER_PUSHED)
        elif dest == "bin_range":
            lo, hi = v.split(":")
            changes["bin_lo"], changes["bin_hi"] = float(lo), float(hi)
        elif dest == "windows":
            changes["windows"] = _parse_windows(v)
        else:
            changes[dest] = v
    try:
        return cfg.with_overrides(**changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
