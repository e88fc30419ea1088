"""Compiled kernels, loop-for-loop equivalents of :mod:`._numpy`."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._numpy import NU_SERIES


@njit(cache=True)
def _fraction(p, nu, n):
    x = p / n
    if nu < NU_SERIES:
        return x * (1.0 + 0.5 * nu * (1.0 - x))
    return math.expm1(-nu * x) / math.expm1(-nu)


@njit(cache=True)
def _position(f, nu, n):
    if f < 0.0:
        f = 0.0
    elif f > 1.0:
        f = 1.0
    if nu < NU_SERIES:
        return n * f * (1.0 - 0.5 * nu * (1.0 - f))
    return -(n / nu) * math.log1p(f * math.expm1(-nu))


@njit(cache=True)
def _conductance(p, d, g_min, g_max, nu_p, nu_d, n):
    if d > 0:
        return g_min + (g_max - g_min) * _fraction(p, nu_p, n)
    return g_max - (g_max - g_min) * _fraction(p, nu_d, n)


@njit(cache=True)
def _locate(level, d, g_min, g_max, nu_p, nu_d, n):
    span = g_max - g_min
    if d > 0:
        return _position((level - g_min) / span, nu_p, n)
    return _position((g_max - level) / span, nu_d, n)


@njit(cache=True)
def _clamp(v, lo, hi):
    return min(max(v, lo), hi)


@njit(cache=True)
def _write_cell(i, d, m, g, level, ramp_dir, ramp_p0, ramp_l0, ramp_gain,
                pulse_index, g_min, g_max, nu_p, nu_d, n, noise_scale, c2c,
                zg, zn):
    gmn = g_min[i]
    gmx = g_max[i]
    if ramp_dir[i] != d:
        p0 = _locate(level[i], d, gmn, gmx, nu_p[i], nu_d[i], n)
        l0 = level[i]
        gain = 1.0 + c2c * zg
        k_prev = 0.0
    else:
        p0 = ramp_p0[i]
        l0 = ramp_l0[i]
        gain = ramp_gain[i]
        k_prev = abs(pulse_index[i])
    k_new = k_prev + m
    g0 = _conductance(p0, d, gmn, gmx, nu_p[i], nu_d[i], n)
    g_prev = _conductance(min(p0 + k_prev, n), d, gmn, gmx, nu_p[i], nu_d[i], n)
    g_new = _conductance(min(p0 + k_new, n), d, gmn, gmx, nu_p[i], nu_d[i], n)
    new_level = _clamp(l0 + gain * (g_new - g0), gmn, gmx)
    sigma = noise_scale * abs(g_new - g_prev)
    g[i] = _clamp(new_level + sigma * zn, gmn, gmx)
    level[i] = new_level
    ramp_dir[i] = d
    ramp_p0[i] = p0
    ramp_l0[i] = l0
    ramp_gain[i] = gain
    pulse_index[i] = d * k_new


@njit(cache=True)
def apply_writes(g, level, ramp_dir, ramp_p0, ramp_l0, ramp_gain, pulse_index,
                 g_min, g_max, nu_p, nu_d, n, noise_scale, c2c,
                 direction, amount, z_gain, z_noise):
    for i in range(g.shape[0]):
        d = direction[i]
        m = amount[i]
        if d == 0 or m <= 0.0:
            continue
        _write_cell(i, d, m, g, level, ramp_dir, ramp_p0, ramp_l0, ramp_gain,
                    pulse_index, g_min, g_max, nu_p, nu_d, n, noise_scale, c2c,
                    z_gain[i], z_noise[i])


@njit(cache=True)
def verify_iteration(g, level, ramp_dir, ramp_p0, ramp_l0, ramp_gain, pulse_index,
                     g_min, g_max, nu_p, nu_d, n, noise_scale, c2c,
                     target, tol, used, max_pulses, active, converged,
                     read_cv, adaptive, z_read, z_gain, z_noise):
    remaining = 0
    for i in range(g.shape[0]):
        if not active[i]:
            continue
        err = target[i] - g[i] * (1.0 + read_cv * z_read[i])
        if abs(err) <= tol[i]:
            converged[i] = True
            active[i] = False
            continue
        if used[i] >= max_pulses[i]:
            active[i] = False
            continue
        d = np.int8(1) if err > 0 else np.int8(-1)
        if ramp_dir[i] == d:
            p_now = min(ramp_p0[i] + abs(pulse_index[i]), n)
        else:
            p_now = _locate(level[i], d, g_min[i], g_max[i], nu_p[i], nu_d[i], n)
        step = abs(
            _conductance(min(p_now + 1.0, n), d, g_min[i], g_max[i], nu_p[i], nu_d[i], n)
            - _conductance(p_now, d, g_min[i], g_max[i], nu_p[i], nu_d[i], n)
        )
        if step <= 0.0:
            active[i] = False
            continue
        count = 1.0
        if adaptive:
            count = max(1.0, np.rint(abs(err) / step))
        count = min(count, max_pulses[i] - used[i])
        _write_cell(i, d, count, g, level, ramp_dir, ramp_p0, ramp_l0, ramp_gain,
                    pulse_index, g_min, g_max, nu_p, nu_d, n, noise_scale, c2c,
                    z_gain[i], z_noise[i])
        used[i] += count
        remaining += 1
    return remaining


@njit(cache=True)
def receptor_chain(u, x0, a_on, a_off):
    steps, nodes = u.shape
    out = np.empty_like(u)
    x = x0.copy()
    for t in range(steps):
        for j in range(nodes):
            ut = u[t, j]
            a = a_on[j] if ut > x[j] else a_off[j]
            x[j] = x[j] + (ut - x[j]) * a
            out[t, j] = x[j]
    return out
