"""Compiled inner loops.

All randomness arrives as pre-drawn buffers so the kernels stay
deterministic functions of their inputs. Every kernel releases the GIL.
"""
import math

import numpy as np
from numba import njit

GRID = 0
BRIDGE = 1

REINSERT_PUSH = 0
REINSERT_SUPPRESS = 1


@njit(cache=True, inline="always")
def reflect_one(z, g, u, sd, drift_h, two_var, scheme):
    """One step of drifted Brownian motion reflected at 0.

    ``sd = sqrt(sigma2 h)``, ``drift_h = a h``, ``two_var = 2 sigma2 h``.
    The bridge scheme subtracts the (negative part of the) sampled in-step
    minimum of the free path, which is the Skorohod map over the step.
    """
    w = sd * g - drift_h
    end = z + w
    if scheme == GRID:
        return end if end > 0.0 else 0.0
    m = 0.5 * (z + end - math.sqrt(w * w - two_var * math.log(u)))
    if m < 0.0:
        end -= m
    return end if end > 0.0 else 0.0


@njit(cache=True, nogil=True)
def reflect_array(z, normals, uniforms, sd, drift_h, two_var, scheme):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        u = uniforms[i] if scheme == BRIDGE else 1.0
        out[i] = reflect_one(z[i], normals[i], u, sd, drift_h, two_var, scheme)
    return out


@njit(cache=True, nogil=True)
def reflect_steps(z, n_steps, normals, uniforms, sd, drift_h, two_var, scheme):
    """Advance independent particles ``n_steps`` times in place.

    Draws are consumed step-major: step s uses entries ``s*n .. s*n+n-1``.
    """
    n = z.shape[0]
    for s in range(n_steps):
        base = s * n
        for i in range(n):
            u = uniforms[base + i] if scheme == BRIDGE else 1.0
            z[i] = reflect_one(z[i], normals[base + i], u, sd, drift_h, two_var, scheme)


@njit(cache=True, nogil=True)
def killed_occupation(z, path, n_paths, normals, uniforms, kill_uniforms, hist, v1, h,
                      sd, drift_h, two_var, scheme, bridge_kill):
    """Occupation histogram of reflected paths started at 0 and killed at ``v1``.

    Each step adds ``h`` to the bin holding the pre-step position (left-point
    rule). A path dies at a step boundary at or above ``v1``; with
    ``bridge_kill`` it also dies inside a step with the Brownian-bridge
    probability of having crossed ``v1``,
    ``exp(-2 (v1 - z)(v1 - z') / (sigma2 h))``.
    Returns ``(z, path, used)`` so the caller can refill buffers and resume.
    """
    nbins = hist.shape[0]
    used = 0
    n_avail = normals.shape[0]
    while path < n_paths:
        if used >= n_avail:
            break
        k = int(z / v1 * nbins)
        if k >= nbins:
            k = nbins - 1
        hist[k] += h
        u = uniforms[used] if scheme == BRIDGE else 1.0
        z_new = reflect_one(z, normals[used], u, sd, drift_h, two_var, scheme)
        dead = z_new >= v1
        if not dead and bridge_kill and two_var > 0.0:
            p_cross = math.exp(-4.0 * (v1 - z) * (v1 - z_new) / two_var)
            dead = kill_uniforms[used] < p_cross
        used += 1
        if dead:
            path += 1
            z = 0.0
        else:
            z = z_new
    return z, path, used


@njit(cache=True, nogil=True)
def model_c_steps(z, n_alive, killed, injected, t, n_steps, h, a, eps,
                  sd, drift_h, two_var, scheme, normals, uniforms, inj_tol,
                  kill_stats, overshoot_tol):
    """Influx-killed system on its free coordinates.

    Per step: advance alive coordinates, inject a fresh coordinate at 0 on
    every multiple of ``eps/a`` reached, then kill the maximal coordinate as
    long as it sits at or above ``1 - a t + killed*eps``. Stops early when
    the buffers cannot cover a whole step.

    ``kill_stats`` accumulates [max overshoot, kills with overshoot above
    ``overshoot_tol``, total overshoot]; the overshoot equals how far the
    killed rod's right edge lies beyond 1.
    """
    period = eps / a
    pos = 0
    done = 0
    n_avail = normals.shape[0]
    while done < n_steps:
        if pos + n_alive > n_avail:
            break
        for i in range(n_alive):
            u = uniforms[pos + i] if scheme == BRIDGE else 1.0
            z[i] = reflect_one(z[i], normals[pos + i], u, sd, drift_h, two_var, scheme)
        pos += n_alive
        t += h
        while (injected + 1) * period <= t + inj_tol:
            z[n_alive] = 0.0
            n_alive += 1
            injected += 1
        thr = 1.0 - a * t + killed * eps
        while n_alive > 0:
            imax = 0
            zmax = z[0]
            for i in range(1, n_alive):
                if z[i] > zmax:
                    zmax = z[i]
                    imax = i
            if zmax < thr:
                break
            over = zmax - thr
            if over > kill_stats[0]:
                kill_stats[0] = over
            if over > overshoot_tol:
                kill_stats[1] += 1.0
            kill_stats[2] += over
            z[imax] = z[n_alive - 1]
            n_alive -= 1
            killed += 1
            thr += eps
        done += 1
    return n_alive, killed, injected, t, done, pos


@njit(cache=True, nogil=True)
def project_chain_inplace(x, eps, lo, hi, mean, weight):
    """Euclidean projection onto {lo <= x_0, x_{i+1} - x_i >= eps, x_{n-1} <= hi}.

    Shifting u_i = x_i - i*eps turns the spacing constraints into
    monotonicity; pool-adjacent-violators gives the isotonic fit and
    clipping that fit to [lo, hi - (n-1) eps] is the exact projection onto
    the bounded cone. ``mean`` and ``weight`` are scratch arrays of length n.
    """
    n = x.shape[0]
    if n == 0:
        return
    nb = 0
    for i in range(n):
        mean[nb] = x[i] - i * eps
        weight[nb] = 1.0
        nb += 1
        while nb > 1 and mean[nb - 2] > mean[nb - 1]:
            w = weight[nb - 2] + weight[nb - 1]
            mean[nb - 2] = (mean[nb - 2] * weight[nb - 2] + mean[nb - 1] * weight[nb - 1]) / w
            weight[nb - 2] = w
            nb -= 1
    top = hi - (n - 1) * eps
    i = 0
    for b in range(nb):
        v = mean[b]
        if v < lo:
            v = lo
        if v > top:
            v = top
        for _ in range(int(weight[b])):
            x[i] = v + i * eps
            i += 1


@njit(cache=True, nogil=True)
def model_a_direct_steps(x, t, n_steps, h, c, eps, sd, normals, mirror):
    """Barrier-pushed rods by proposal and projection.

    Plain mode: x <- P(x + noise). Mirror mode first pushes the chain to the
    new barrier position, then maps the noisy proposal u to P(2 P(u) - u):
    a proposal that crosses a constraint is reflected back across it instead
    of being stopped on it. Stopping on the constraint is the discrete
    Skorohod map, which loses the in-step excursion and packs rods by
    O(sqrt(h)); the reflection removes that bias for driftless noise.
    """
    n = x.shape[0]
    mean = np.empty(n)
    weight = np.empty(n)
    p = np.empty(n)
    for s in range(n_steps):
        base = s * n
        t += h
        lo = c * t + 0.5 * eps
        if mirror:
            project_chain_inplace(x, eps, lo, np.inf, mean, weight)
            for i in range(n):
                x[i] += sd * normals[base + i]
                p[i] = x[i]
            project_chain_inplace(p, eps, lo, np.inf, mean, weight)
            for i in range(n):
                x[i] = 2.0 * p[i] - x[i]
        else:
            for i in range(n):
                x[i] += sd * normals[base + i]
        project_chain_inplace(x, eps, lo, np.inf, mean, weight)
    return t


@njit(cache=True, nogil=True)
def model_r_steps(x, t, n_steps, h, eps, sd, normals, rule, jump_tol):
    """Jump-reset system: Gaussian proposals, projection onto [0, 1], and a
    rod whose centre reaches 1 restarts from 0 at the left end of the chain.
    """
    n = x.shape[0]
    mean = np.empty(n)
    weight = np.empty(n)
    jumps = 0
    for s in range(n_steps):
        base = s * n
        for i in range(n):
            x[i] += sd * normals[base + i]
        t += h
        project_chain_inplace(x, eps, 0.0, 1.0, mean, weight)
        count = 0
        while count < n and x[n - 1] >= 1.0 - jump_tol:
            if rule == REINSERT_SUPPRESS and x[0] < eps:
                break
            for i in range(n - 1, 0, -1):
                x[i] = x[i - 1]
            x[0] = 0.0
            project_chain_inplace(x, eps, 0.0, 1.0, mean, weight)
            jumps += 1
            count += 1
    return t, jumps
