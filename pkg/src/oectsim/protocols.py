"""Measurement protocols: simulated counterparts of device characterization.

Each function runs one protocol on the models and returns plain arrays or
small dataclasses. The experiment runner and the test-suite share them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import curve_fit

from . import kernels
from .crossbar import Crossbar, CrossbarConfig, SpikeEvent, program_parallel, reflex_step, \
    stdp_program_mechanistic
from .devices import (ReceptorParams, ReceptorState, SynapseParams, SynapseState,
                      apply_drift, channel_conductance, direction_sign, ideal_ltp_curve,
                      normalized_response, receptor_step, sense_offset, write_pulse)


# --------------------------------------------------------------------------
# synapse statistics
# --------------------------------------------------------------------------

def ltp_ramp(params: SynapseParams, direction="potentiate") -> np.ndarray:
    """Ideal conductance after 0..N pulses of a full ramp (N = n_states - 1)."""
    n = params.n_pulses
    return ideal_ltp_curve(np.arange(n + 1), n, params, direction)


def simulated_ramp(params: SynapseParams, rng, direction="potentiate", pulses=None,
                   start: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Observed and noiseless conductance along one simulated ramp.

    Both arrays start with the initial state, so they have ``pulses + 1`` entries.
    """
    sign = direction_sign(direction)
    pulses = params.n_pulses if pulses is None else int(pulses)
    g0 = (params.g_min if sign > 0 else params.g_max) if start is None else start
    state = SynapseState(g=g0)
    g = [state.g]
    level = [state.level]
    for _ in range(pulses):
        state = write_pulse(state, sign, params, rng)
        g.append(state.g)
        level.append(state.level)
    return np.array(g), np.array(level)


def measure_write_snr(params: SynapseParams, rng, ramps: int = 50, pulses: int = 50) -> float:
    """Empirical ``(mean dG / std dG)**2`` of potentiation steps.

    Ramps start at ``g_min``. For each pulse index the step mean and variance
    are taken across ramps; the estimate is ``1 / mean(var / mean**2)`` over
    pulse indices. Indices at which any ramp touched a rail are skipped.
    """
    steps = np.empty((ramps, pulses))
    at_rail = np.zeros(pulses, dtype=bool)
    for r in range(ramps):
        g, level = simulated_ramp(params, rng, "potentiate", pulses)
        steps[r] = np.diff(g)
        at_rail |= level[1:] >= params.g_max
    use = ~at_rail
    if not use.any():
        raise ValueError("every pulse index reached the rail; use shorter ramps")
    mean = steps[:, use].mean(axis=0)
    var = steps[:, use].var(axis=0, ddof=1)
    return float(1.0 / np.mean(var / mean ** 2))


@dataclass
class CycleStats:
    c2c: float
    slopes: np.ndarray
    slope_se: np.ndarray


def measure_c2c(params: SynapseParams, rng, cycles: int = 50, pulses: int = 20) -> CycleStats:
    """Cycle-to-cycle variation from repeated potentiation/depression cycles.

    Each ramp of a cycle is regressed (with intercept) on the ideal
    trajectory expected from its observed starting point; the slope is the
    ramp's gain. The spread of gains, corrected for the regression error
    ``mean(SE**2)``, estimates the cycle-to-cycle coefficient of variation.
    Points where the noiseless level sits on a rail are excluded.
    """
    n = float(params.n_pulses)
    state = SynapseState(g=params.g_min)
    slopes, se = [], []
    k = np.arange(1, pulses + 1)
    for _ in range(cycles):
        for sign in (1, -1):
            g0 = state.g
            g = np.empty(pulses)
            level = np.empty(pulses)
            for i in range(pulses):
                state = write_pulse(state, sign, params, rng)
                g[i], level[i] = state.g, state.level
            nu = params.nu_p if sign > 0 else params.nu_d
            f0 = (g0 - params.g_min) / params.span if sign > 0 else (params.g_max - g0) / params.span
            p0 = kernels.curve_position(f0, nu, n)
            ideal = sign * params.span * (kernels.curve_fraction(np.minimum(p0 + k, n), nu, n)
                                          - kernels.curve_fraction(p0, nu, n))
            ok = (level > params.g_min) & (level < params.g_max)
            if ok.sum() < 4:
                continue
            X = np.column_stack([np.ones(ok.sum()), ideal[ok]])
            coef, *_ = np.linalg.lstsq(X, g[ok], rcond=None)
            resid = g[ok] - X @ coef
            s2 = resid @ resid / (ok.sum() - 2)
            cov = s2 * np.linalg.inv(X.T @ X)
            slopes.append(coef[1])
            se.append(np.sqrt(cov[1, 1]))
    slopes = np.array(slopes)
    se = np.array(se)
    excess = slopes.var(ddof=1) - np.mean(se ** 2)
    return CycleStats(float(np.sqrt(max(excess, 0.0))), slopes, se)


@dataclass
class RetentionResult:
    times: np.ndarray
    g: np.ndarray          # (times, states)
    read_sigma: np.ndarray  # read-noise std per state at the last time
    min_gap_sigma: float    # smallest adjacent gap at any time, in units of read sigma
    ordered: bool


def retention(params: SynapseParams, config: CrossbarConfig, rng, n_states: int = 8,
              t_end: float = 20000.0, n_times: int = 41) -> RetentionResult:
    """Program ``n_states`` evenly spaced levels, then let them drift to ``t_end``.

    Times are 0 plus log-spaced points from 1 s. Gaps are compared with the
    read-noise standard deviation ``read_cv * g`` of the larger neighbour.
    """
    xbar = Crossbar(1, n_states, replace(params, d2d_sigma=0.0), config=config)
    targets = params.g_min + (np.arange(n_states) + 0.5) / n_states * params.span
    program_parallel(xbar, targets[None, :], 4 * params.n_states, rng)
    times = np.concatenate([[0.0], np.logspace(0, np.log10(t_end), n_times - 1)])
    states = [xbar.cell(0, j)[1] for j in range(n_states)]
    trace = np.empty((len(times), n_states))
    for ti, t in enumerate(times):
        states = [apply_drift(s, t, params) for s in states]
        trace[ti] = [s.g for s in states]
    sigma = config.read_cv * trace[:, 1:]
    gaps = np.diff(trace, axis=1)
    ratio = np.where(sigma > 0, gaps / np.where(sigma > 0, sigma, 1.0), np.inf)
    return RetentionResult(times, trace, sigma[-1], float(ratio.min()), bool(np.all(gaps > 0)))


# --------------------------------------------------------------------------
# STDP
# --------------------------------------------------------------------------

@dataclass
class StdpSweep:
    delta_t: np.ndarray
    delta_g: np.ndarray
    amplitude: float
    tau: float
    r2: float
    max_deviation: float  # max |fit - data| / peak


def exp_fit(t, y) -> tuple[float, float, float]:
    """Least-squares ``a * exp(-t / tau)``; returns (a, tau, R^2)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = y > 0
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(t[pos], np.log(y[pos]), 1)
        guess = (np.exp(icpt), -1.0 / slope if slope < 0 else t.ptp() or 1.0)
    else:
        guess = (y.max() or 1.0, t.ptp() or 1.0)
    f = lambda x, a, tau: a * np.exp(-x / tau)
    (a, tau), _ = curve_fit(f, t, y, p0=guess, maxfev=10000)
    ss_res = np.sum((y - f(t, a, tau)) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(a), float(tau), float(1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def stdp_sweep(params: SynapseParams, receptor: ReceptorParams, config: CrossbarConfig, rng,
               delta_t=None, pre_amplitude=-0.8, pre_width=0.1, post_amplitude=-2.0,
               post_width=0.002, start_fraction=0.3) -> StdpSweep:
    """Conductance change of a fresh 1T1R cell versus pre-to-post delay.

    ``delta_t`` is measured from the end of the pre-spike to the onset of the
    post-spike. The cell starts at ``start_fraction`` of the range each time.
    """
    dts = np.arange(0.0, 0.2001, 0.02) if delta_t is None else np.asarray(delta_t, dtype=float)
    nominal = replace(params, d2d_sigma=0.0)
    g_start = params.g_min + start_fraction * params.span
    dg = np.empty(len(dts))
    for i, dt in enumerate(dts):
        xbar = Crossbar(1, 1, nominal, receptor, config, g_init=g_start)
        pre = SpikeEvent(0, pre_amplitude, pre_width, 0.0)
        post = SpikeEvent(0, post_amplitude, post_width, pre_width + dt)
        stdp_program_mechanistic(xbar, pre, post, rng)
        dg[i] = xbar.g[0] - g_start
    a, tau, r2 = exp_fit(dts, dg)
    peak = np.abs(dg).max()
    dev = float(np.abs(a * np.exp(-dts / tau) - dg).max() / peak) if peak > 0 else 0.0
    return StdpSweep(dts, dg, a, tau, r2, dev)


# --------------------------------------------------------------------------
# receptor
# --------------------------------------------------------------------------

def step_response(params: ReceptorParams, rising: bool, dt: float = 1e-4,
                  duration: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    x = ReceptorState(0.0 if rising else 1.0)
    u = 1.0 if rising else 0.0
    t = np.arange(1, int(round(duration / dt)) + 1) * dt
    out = np.empty(len(t))
    for i in range(len(t)):
        x = receptor_step(x, u, dt, params)
        out[i] = x.x
    return t, out


def receptor_figures(params: ReceptorParams) -> dict[str, float]:
    """Recover the receptor figures of merit from simulated measurements."""
    a_th = -params.v_th
    v1, v2 = -(a_th - 0.3), -(a_th - 0.2)
    g1 = channel_conductance(v1, params) - params.g_off
    g2 = channel_conductance(v2, params) - params.g_off
    ss = abs(v1 - v2) / np.log10(g2 / g1)
    sweep = np.linspace(1.0, params.v_full, 1801)
    g = channel_conductance(sweep, params)
    on_off = float(channel_conductance(params.v_th, params)) / g.min()
    gm = np.max(-np.gradient(g, sweep))
    t, rise = step_response(params, True)
    _, fall = step_response(params, False)
    tau_on = -1.0 / np.polyfit(t, np.log(1.0 - rise), 1)[0]
    tau_off = -1.0 / np.polyfit(t, np.log(fall), 1)[0]
    nr_ion = normalized_response(sense_offset(params, activity=params.a_ref * 10), params)
    nr_temp = normalized_response(sense_offset(params, temperature=params.t_ref + 1.0), params)
    return {"ss": float(ss), "on_off_ratio": float(on_off), "g_m_norm": float(gm),
            "tau_on": float(tau_on), "tau_off": float(tau_off),
            "nr_ion": float(nr_ion), "nr_temp": float(nr_temp)}


# --------------------------------------------------------------------------
# conditioned reflex
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReflexProtocol:
    """Timing of the conditioning protocol (seconds, volts)."""

    bell: float = 0.4
    food: float = -0.8
    vdd: float = -0.8
    dt: float = 0.01
    pairing_duration: float = 0.1
    rest: float = 0.5
    bell_steps: int = 100
    pairings: int = 100
    sweep_pairings: int = 20
    activity_min: float = 1e-3
    activity_max: float = 1.0
    n_activities: int = 7
    activity: float = 0.1


def _new_reflex_cell(params, receptor, config, rng):
    return Crossbar(1, 1, params, receptor, config, rng=rng)


def reflex_pairing(xbar, protocol: ReflexProtocol, activity: float, rng, bell=True,
                   food=True) -> float:
    steps = max(1, int(round(protocol.pairing_duration / protocol.dt)))
    g = float(xbar.g[0])
    for _ in range(steps):
        g = reflex_step(xbar, (0, 0), protocol.bell if bell else 0.0,
                        protocol.food if food else 0.0, activity, protocol.dt, rng,
                        protocol.vdd)
    if protocol.rest > 0:
        g = reflex_step(xbar, (0, 0), 0.0, 0.0, activity, protocol.rest, rng, protocol.vdd)
    return g


@dataclass
class ReflexResult:
    bell_only_change: float       # |dG| after the bell-only phase (S)
    pairing_trace: np.ndarray     # memory after each pairing (S)
    activities: np.ndarray
    memory: np.ndarray            # memory after sweep_pairings pairings per activity
    slope: float
    intercept: float
    r2: float

    def converged(self, gap: float, last: int = 10) -> bool:
        """True if each of the final ``last`` pairings moved memory by under ``gap``."""
        steps = np.abs(np.diff(self.pairing_trace[-(last + 1):]))
        return len(steps) == last and bool(np.all(steps < gap))


def reflex_experiment(params: SynapseParams, receptor: ReceptorParams, config: CrossbarConfig,
                      rng, protocol: ReflexProtocol | None = None) -> ReflexResult:
    p = protocol or ReflexProtocol()
    cell = _new_reflex_cell(params, receptor, config, rng)
    g0 = float(cell.g[0])
    for _ in range(p.bell_steps):
        g = reflex_step(cell, (0, 0), p.bell, 0.0, p.activity, p.dt, rng, p.vdd)
    bell_change = abs(g - g0)

    cell = _new_reflex_cell(params, receptor, config, rng)
    trace = np.array([reflex_pairing(cell, p, p.activity, rng) for _ in range(p.pairings)])

    # one device, reset to its initial state before each activity
    acts = np.logspace(np.log10(p.activity_min), np.log10(p.activity_max), p.n_activities)
    memory = np.empty(len(acts))
    template = _new_reflex_cell(params, receptor, config, rng)
    for i, a in enumerate(acts):
        cell = template.copy()
        for _ in range(p.sweep_pairings):
            memory[i] = reflex_pairing(cell, p, a, rng)
    x = np.log10(acts)
    slope, icpt = np.polyfit(x, memory, 1)
    resid = memory - (slope * x + icpt)
    r2 = 1.0 - resid @ resid / np.sum((memory - memory.mean()) ** 2)
    return ReflexResult(bell_change, trace, acts, memory, float(slope), float(icpt), float(r2))
