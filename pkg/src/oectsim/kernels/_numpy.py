"""Vectorized numpy reference kernels.

Every function here mirrors one in :mod:`oectsim.kernels._numba`. Arrays are
1-D, float64 unless noted, and state arrays are updated in place.
"""

from __future__ import annotations

import numpy as np

# below this nonlinearity the closed form loses precision (and underflows for
# denormals); a second-order series in nu is exact to ~NU_SERIES**2 instead
NU_SERIES = 1e-12


def curve_fraction(p, nu, n):
    """Fraction of the conductance range covered after ``p`` of ``n`` pulses."""
    p = np.asarray(p, dtype=float)
    nu = np.asarray(nu, dtype=float)
    x = p / n
    small = nu < NU_SERIES
    safe = np.where(small, 1.0, nu)
    curved = np.expm1(-safe * x) / np.expm1(-safe)
    return np.where(small, x * (1.0 + 0.5 * nu * (1.0 - x)), curved)


def curve_position(f, nu, n):
    """Inverse of :func:`curve_fraction`; ``f`` is clipped to [0, 1]."""
    f = np.clip(np.asarray(f, dtype=float), 0.0, 1.0)
    nu = np.asarray(nu, dtype=float)
    small = nu < NU_SERIES
    safe = np.where(small, 1.0, nu)
    curved = -(n / safe) * np.log1p(f * np.expm1(-safe))
    return np.where(small, n * f * (1.0 - 0.5 * nu * (1.0 - f)), curved)


def _branch_conductance(p, d, g_min, g_max, nu_p, nu_d, n):
    span = g_max - g_min
    pot = g_min + span * curve_fraction(p, nu_p, n)
    dep = g_max - span * curve_fraction(p, nu_d, n)
    return np.where(d > 0, pot, dep)


def _branch_position(level, d, g_min, g_max, nu_p, nu_d, n):
    span = g_max - g_min
    pot = curve_position((level - g_min) / span, nu_p, n)
    dep = curve_position((g_max - level) / span, nu_d, n)
    return np.where(d > 0, pot, dep)


def apply_writes(g, level, ramp_dir, ramp_p0, ramp_l0, ramp_gain, pulse_index,
                 g_min, g_max, nu_p, nu_d, n, noise_scale, c2c,
                 direction, amount, z_gain, z_noise):
    """Apply one write event of ``amount`` pulses per cell (0 means skip).

    ``noise_scale`` is ``1/sqrt(2*snr)``; the pinned write noise of a cell is
    ``noise_scale`` times the ideal step of its latest event.
    """
    act = (direction != 0) & (amount > 0)
    if not act.any():
        return
    idx = np.flatnonzero(act)
    d = direction[idx].astype(np.int8)
    gmn, gmx = g_min[idx], g_max[idx]
    nup, nud = nu_p[idx], nu_d[idx]
    lev = level[idx]

    fresh = ramp_dir[idx] != d
    p0 = np.where(fresh, _branch_position(lev, d, gmn, gmx, nup, nud, n), ramp_p0[idx])
    l0 = np.where(fresh, lev, ramp_l0[idx])
    gain = np.where(fresh, 1.0 + c2c * z_gain[idx], ramp_gain[idx])
    k_prev = np.where(fresh, 0.0, np.abs(pulse_index[idx]))
    k_new = k_prev + amount[idx]

    g0 = _branch_conductance(p0, d, gmn, gmx, nup, nud, n)
    g_prev = _branch_conductance(np.minimum(p0 + k_prev, n), d, gmn, gmx, nup, nud, n)
    g_new = _branch_conductance(np.minimum(p0 + k_new, n), d, gmn, gmx, nup, nud, n)

    new_level = np.clip(l0 + gain * (g_new - g0), gmn, gmx)
    sigma = noise_scale * np.abs(g_new - g_prev)
    g[idx] = np.clip(new_level + sigma * z_noise[idx], gmn, gmx)
    level[idx] = new_level
    ramp_dir[idx] = d
    ramp_p0[idx] = p0
    ramp_l0[idx] = l0
    ramp_gain[idx] = gain
    pulse_index[idx] = d * k_new


def verify_iteration(g, level, ramp_dir, ramp_p0, ramp_l0, ramp_gain, pulse_index,
                     g_min, g_max, nu_p, nu_d, n, noise_scale, c2c,
                     target, tol, used, max_pulses, active, converged,
                     read_cv, adaptive, z_read, z_gain, z_noise):
    """One read-compare-write round of closed-loop programming.

    Returns the number of cells still active afterwards.
    """
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return 0
    r = g[idx] * (1.0 + read_cv * z_read[idx])
    err = target[idx] - r
    hit = np.abs(err) <= tol[idx]
    converged[idx[hit]] = True
    spent = used[idx] >= max_pulses[idx]
    stop = hit | spent

    d = np.where(err > 0, 1, -1).astype(np.int8)
    gmn, gmx = g_min[idx], g_max[idx]
    nup, nud = nu_p[idx], nu_d[idx]
    cont = ramp_dir[idx] == d
    p_now = np.where(
        cont,
        np.minimum(ramp_p0[idx] + np.abs(pulse_index[idx]), n),
        _branch_position(level[idx], d, gmn, gmx, nup, nud, n),
    )
    step = np.abs(
        _branch_conductance(np.minimum(p_now + 1.0, n), d, gmn, gmx, nup, nud, n)
        - _branch_conductance(p_now, d, gmn, gmx, nup, nud, n)
    )
    stuck = step <= 0.0
    stop |= stuck
    if adaptive:
        ratio = np.abs(err) / np.where(stuck, 1.0, step)
        count = np.maximum(1.0, np.rint(ratio))
    else:
        count = np.ones_like(err)
    count = np.minimum(count, max_pulses[idx] - used[idx])
    count = np.where(stop, 0.0, count)
    active[idx[stop]] = False

    direction = np.zeros(g.shape[0], dtype=np.int8)
    amount = np.zeros(g.shape[0])
    direction[idx] = np.where(stop, 0, d)
    amount[idx] = count
    apply_writes(g, level, ramp_dir, ramp_p0, ramp_l0, ramp_gain, pulse_index,
                 g_min, g_max, nu_p, nu_d, n, noise_scale, c2c,
                 direction, amount, z_gain, z_noise)
    used[idx] += count
    return int(active.sum())


def receptor_chain(u, x0, a_on, a_off):
    """Run the asymmetric first-order relaxation over the rows of ``u``.

    ``u`` has shape (steps, nodes); ``a_on``/``a_off`` are per-node
    ``1 - exp(-dt/tau)``. Returns the state after every step.
    """
    steps = u.shape[0]
    out = np.empty_like(u)
    x = np.array(x0, dtype=float, copy=True)
    for t in range(steps):
        ut = u[t]
        a = np.where(ut > x, a_on, a_off)
        x = x + (ut - x) * a
        out[t] = x
    return out
