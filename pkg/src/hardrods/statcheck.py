"""Statistics used by the acceptance suite."""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "StatReport",
    "ks_statistic",
    "profile_deviation",
    "fraction_ci",
    "seed_digest",
    "Z_QUANTILES",
]

# two-sided standard normal quantiles
Z_QUANTILES = {0.90: 1.644854, 0.95: 1.959964, 0.99: 2.575829}


@dataclass
class StatReport:
    """Outcome of one acceptance check.

    ``orientation`` is ``"<="`` when small statistics pass and ``">="``
    otherwise. Non-gating reports never affect the exit status.
    """

    name: str
    statistic: float
    threshold: float
    orientation: str = "<="
    replicas: int = 1
    seeds: str = ""
    gating: bool = True
    details: dict = field(default_factory=dict)
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.orientation not in ("<=", ">="):
            raise ValueError(f"bad orientation {self.orientation!r}")
        if self.orientation == "<=":
            self.passed = bool(self.statistic <= self.threshold)
        else:
            self.passed = bool(self.statistic >= self.threshold)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if not self.gating:
            tag += " (non-gating)"
        return f"[{tag}] {self.name}: {self.statistic:.6g} {self.orientation} {self.threshold:.6g}"

    def to_dict(self) -> dict:
        return asdict(self)


def seed_digest(seeds: Sequence[int]) -> str:
    """Short digest identifying the set of (base_seed, stream_id) pairs used."""
    text = ",".join(str(int(s)) for s in seeds)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def ks_statistic(sample, cdf: Callable) -> float:
    """One-sample Kolmogorov-Smirnov distance ``sup |F_n - F|``.

    The sample is sorted here, so callers may pass it in any order.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.shape[0]
    if n == 0:
        raise ValueError("KS statistic of an empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(min(1.0, max(d_plus, d_minus, 0.0)))


def profile_deviation(empirical, predicted: Callable) -> tuple[float, float]:
    """Sup and width-weighted L1 deviation of a binned profile from a curve.

    ``empirical`` is a :class:`~hardrods.measurement.DensityProfile` (or any
    object with ``bin_edges`` and ``values``); ``predicted`` is evaluated at
    bin midpoints.
    """
    edges = np.asarray(empirical.bin_edges, dtype=float)
    values = np.asarray(empirical.values, dtype=float)
    mid = 0.5 * (edges[1:] + edges[:-1])
    width = np.diff(edges)
    dev = np.abs(values - np.asarray(predicted(mid), dtype=float))
    return float(dev.max()), float(np.sum(dev * width) / np.sum(width))


def fraction_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"invalid counts {successes}/{trials}")
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    z = Z_QUANTILES.get(round(level, 6))
    if z is None:
        from scipy.stats import norm
        z = float(norm.ppf(0.5 + level / 2))
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lower = 0.0 if successes == 0 else max(0.0, centre - half)
    upper = 1.0 if successes == trials else min(1.0, centre + half)
    return lower, upper
