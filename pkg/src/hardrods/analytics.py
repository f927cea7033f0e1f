"""Closed-form quantities for reflected Brownian rods.

Everything here is a pure function of its arguments. The single-particle
process is Brownian motion with diffusion coefficient ``sigma2`` and drift
``-a``, reflected at 0. Its stationary law is exponential with rate
``2a/sigma2``; with unit noise this is the familiar "rate equals twice the
drift".

For the barrier-pushed model the barrier speed and the drift of the free
coordinates are the same parameter, so ``c`` (when given) must equal ``a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DiffusionParams",
    "ProfileKind",
    "AnalyticProfile",
    "stationary_rate",
    "stationary_density",
    "green_function",
    "solve_v0",
    "forward_y_model_a",
    "invert_y_model_a",
    "forward_y_model_c",
    "invert_y_model_c",
    "predicted_density_model_a",
    "predicted_density_model_c",
    "predicted_gap",
    "model_c_total_mass",
    "drift_for_mass",
]


@dataclass(frozen=True)
class DiffusionParams:
    """Parameters shared by every model.

    ``a`` is the drift magnitude, ``sigma2`` the diffusion coefficient and
    ``epsilon`` the rod width. ``c``, ``n`` and ``b`` only matter for the
    barrier-pushed model (barrier speed, rod count, mass budget ``n*epsilon``).
    Give any two of ``epsilon``, ``n``, ``b`` and the third is filled in.

    ``sigma2 = 0`` is accepted so zero-noise limits can be simulated; the
    analytic formulas below reject it.
    """

    a: float
    sigma2: float
    epsilon: float = 0.0
    c: Optional[float] = None
    n: Optional[int] = None
    b: Optional[float] = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"drift a must be > 0, got {self.a}")
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.c is not None:
            if not self.c > 0:
                raise ValueError(f"barrier speed c must be > 0, got {self.c}")
            if abs(self.c - self.a) > 1e-12 * max(1.0, abs(self.a)):
                raise ValueError("barrier speed c must equal the drift a")
        if self.n is not None:
            if int(self.n) != self.n or self.n < 1:
                raise ValueError(f"rod count n must be a positive integer, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
            if self.b is not None and self.epsilon == 0.0:
                object.__setattr__(self, "epsilon", self.b / self.n)
            elif self.b is None:
                object.__setattr__(self, "b", self.n * self.epsilon)
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.n is not None and abs(self.n * self.epsilon - self.b) > 1e-12:
            raise ValueError(
                f"inconsistent mass budget: n*epsilon={self.n * self.epsilon} but b={self.b}"
            )

    @classmethod
    def barrier(cls, c: float, sigma2: float, n: int, b: float) -> "DiffusionParams":
        """Parameters for the barrier-pushed model (drift = barrier speed)."""
        return cls(a=c, sigma2=sigma2, c=c, n=n, b=b, epsilon=b / n)

    @property
    def speed(self) -> float:
        return self.a if self.c is None else self.c

    @property
    def rate(self) -> float:
        return stationary_rate(self)

    @property
    def kappa(self) -> float:
        """sigma2 / (2a), the length scale in the influx-killed profile."""
        return self.sigma2 / (2.0 * self.a)


def _require_noise(params: DiffusionParams) -> None:
    if not params.sigma2 > 0:
        raise ValueError("this formula needs sigma2 > 0")


def stationary_rate(params: DiffusionParams) -> float:
    _require_noise(params)
    return 2.0 * params.a / params.sigma2


def stationary_density(params: DiffusionParams, z):
    """Stationary density ``lam * exp(-lam z)`` with ``lam = 2a/sigma2``."""
    lam = stationary_rate(params)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise ValueError("stationary density is defined for z >= 0")
    out = lam * np.exp(-lam * z_arr)
    return float(out) if out.ndim == 0 else out


def green_function(params: DiffusionParams, v1: float, v):
    """Occupation density of the reflected process started at 0, killed at ``v1``.

    G(v) = (exp(2a(v1 - v)/sigma2) - 1) / a on [0, v1].
    """
    _require_noise(params)
    if not v1 > 0:
        raise ValueError(f"killing level must be > 0, got {v1}")
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr < 0) or np.any(v_arr > v1):
        raise ValueError("green_function is defined for 0 <= v <= v1")
    a = params.a
    out = np.expm1(2.0 * a * (v1 - v_arr) / params.sigma2) / a
    return float(out) if out.ndim == 0 else out


def solve_v0(params: DiffusionParams) -> float:
    """Root of ``(sigma2/2a)(exp(2a v0/sigma2) - 1) = 1``."""
    _require_noise(params)
    k = params.kappa
    return k * math.log1p(1.0 / k)


def _bisect_newton(f: Callable[[float], float], df: Callable[[float], float],
                   lo: float, hi: float, width: float = 1e-6, tol: float = 1e-10) -> float:
    """Bracketed bisection down to ``width``, then Newton polish.

    ``f`` must be increasing with a sign change on [lo, hi]. Newton steps
    that leave the bracket fall back to bisection.
    """
    flo = f(lo)
    if abs(flo) <= tol:
        return lo
    fhi = f(hi)
    if abs(fhi) <= tol:
        return hi
    if flo > 0 or fhi < 0:
        raise ValueError("root is not bracketed")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    y = 0.5 * (lo + hi)
    for _ in range(50):
        r = f(y)
        if abs(r) <= tol:
            break
        if r < 0:
            lo = y
        else:
            hi = y
        step = y - r / df(y)
        y = step if lo <= step <= hi else 0.5 * (lo + hi)
    return y


def forward_y_model_a(y: float, b: float, lambda_rate: float) -> float:
    """x = b(1 - exp(-lam y)) + y: comoving position of the rod with free coordinate y."""
    return b * -math.expm1(-lambda_rate * y) + y


def invert_y_model_a(x: float, b: float, lambda_rate: float) -> float:
    """Solve ``x = b(1 - exp(-lam y)) + y`` for y >= 0."""
    if not x >= 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x == 0:
        return 0.0
    f = lambda y: forward_y_model_a(y, b, lambda_rate) - x
    df = lambda y: b * lambda_rate * math.exp(-lambda_rate * y) + 1.0
    # f(x - b) <= 0 <= f(x) since 0 <= b(1 - e^{-lam y}) <= b
    return _bisect_newton(f, df, max(0.0, x - b), x, tol=1e-10 * max(1.0, x))


def forward_y_model_c(y: float, params: DiffusionParams) -> float:
    """x = (sigma2/2a)(exp(2a v0/sigma2) - exp(2a(v0 - y)/sigma2))."""
    _require_noise(params)
    k = params.kappa
    v0 = solve_v0(params)
    return k * (math.exp(v0 / k) - math.exp((v0 - y) / k))


def invert_y_model_c(x: float, params: DiffusionParams) -> float:
    """Inverse of :func:`forward_y_model_c` on [0, v0]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    v0 = solve_v0(params)
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return v0
    k = params.kappa
    f = lambda y: forward_y_model_c(y, params) - x
    df = lambda y: math.exp((v0 - y) / k)
    return _bisect_newton(f, df, 0.0, v0)


def predicted_density_model_a(x, b: float, lambda_rate: float):
    """Pseudo-stationary mass density in the barrier frame.

    At comoving position x with free coordinate y the rods cover a fraction
    ``b phi(y) / (1 + b phi(y))`` of space.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x_arr)
    for i, xi in enumerate(x_arr):
        y = invert_y_model_a(xi, b, lambda_rate)
        bphi = b * lambda_rate * math.exp(-lambda_rate * y)
        out[i] = bphi / (1.0 + bphi)
    return float(out[0]) if np.ndim(x) == 0 else out


def predicted_density_model_c(x, params: DiffusionParams):
    """Hydrodynamic mass density (1 - x) / (1 - x + sigma2/(2a))."""
    _require_noise(params)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > 1):
        raise ValueError("x must lie in [0, 1]")
    out = (1.0 - x_arr) / (1.0 - x_arr + params.kappa)
    return float(out) if out.ndim == 0 else out


def predicted_gap(x, params: DiffusionParams):
    """Typical gap between neighbouring rods: epsilon sigma2 / (2a(1 - x))."""
    _require_noise(params)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr >= 1) or np.any(x_arr < 0):
        raise ValueError("x must lie in [0, 1)")
    out = params.epsilon * params.kappa / (1.0 - x_arr)
    return float(out) if out.ndim == 0 else out


def model_c_total_mass(kappa: float) -> float:
    """Integral over [0, 1] of (1 - x)/(1 - x + kappa) = 1 - kappa log(1 + 1/kappa)."""
    return 1.0 - kappa * math.log1p(1.0 / kappa)


def drift_for_mass(b: float, sigma2: float) -> float:
    """Drift a for which the influx-killed profile carries total mass b."""
    if not 0 < b < 1:
        raise ValueError("mass must lie in (0, 1)")
    # total mass decreases in kappa from 1 (kappa -> 0) to 0 (kappa -> inf)
    lo, hi = 1e-12, 1.0
    while model_c_total_mass(hi) > b:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if model_c_total_mass(mid) > b:
            lo = mid
        else:
            hi = mid
    kappa = 0.5 * (lo + hi)
    return sigma2 / (2.0 * kappa)


class ProfileKind(Enum):
    MODEL_A_PSEUDO_STATIONARY = "model_a_pseudo_stationary"
    MODEL_C_PREDICTED = "model_c_predicted"


@dataclass(frozen=True)
class AnalyticProfile:
    kind: ProfileKind
    params: DiffusionParams

    def __call__(self, x):
        if self.kind is ProfileKind.MODEL_C_PREDICTED:
            return predicted_density_model_c(x, self.params)
        if self.params.b is None:
            raise ValueError("pseudo-stationary profile needs the mass budget b")
        return predicted_density_model_a(x, self.params.b, self.params.rate)
