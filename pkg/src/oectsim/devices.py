"""Behavioral models of a dual-mode OECT.

The same transistor works as a volatile *receptor* (gate drive below the
switching threshold, fast first-order relaxation) or as a non-volatile
*synapse* (gate pulses above threshold move the conductance along a
saturating-exponential ramp). This module holds both models and the
phenomenological STDP kernel.

Synapse write model
-------------------
A ramp is a run of consecutive writes in one direction. At the first write of
a ramp the state is located on the ideal curve for that direction, and a
per-ramp gain ``1 + c2c_cv * z`` is drawn. The noiseless *level* then follows

    level = L0 + gain * (G(p0 + k) - G(p0))

after ``k`` pulses. The observable conductance is ``level + eta`` where the
programming error ``eta`` is redrawn at every write with standard deviation
``|dG| / sqrt(2 * snr_write)``, ``dG`` being the ideal step of that write. The
error does not accumulate along a ramp, so consecutive observed steps have
mean ``dG`` and standard deviation ``|dG| / sqrt(snr_write)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Union

import numpy as np

from . import kernels

Direction = Union[Literal["potentiate", "depress"], int]
LN10 = math.log(10.0)


def direction_sign(direction: Direction) -> int:
    """Map ``"potentiate"``/``"depress"`` (or +1/-1) to +1/-1."""
    if isinstance(direction, str):
        key = direction.lower()
        if key in ("potentiate", "pot", "p", "set"):
            return 1
        if key in ("depress", "dep", "d", "reset"):
            return -1
    elif direction in (1, -1):
        return int(direction)
    raise ValueError(f"direction must be 'potentiate' or 'depress', got {direction!r}")


# --------------------------------------------------------------------------
# Synapse
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SynapseParams:
    """Calibration of the non-volatile synapse.

    Attributes
    ----------
    g_min, g_max : float
        Conductance rails in siemens.
    n_states : int
        Number of distinct levels on a full ramp (``n_states - 1`` pulses).
    nu_p, nu_d : float
        Nonlinearity of the potentiation and depression ramps (0 is linear).
    snr_write : float
        ``(dG / sigma)**2`` of single write steps; ``inf`` disables write noise.
    c2c_cv : float
        Relative spread of the per-ramp gain.
    drift_gamma, drift_t0 : float
        Power-law retention exponent and time offset in seconds.
    d2d_sigma : float
        Relative device-to-device spread used when building arrays.
    discrete : bool
        If true the device only takes whole pulses: fractional pulse amounts
        from the 1T1R coupling are rounded stochastically (switching
        probability equal to the fraction).
    """

    g_min: float = 1e-7
    g_max: float = 1e-5
    n_states: int = 1024
    nu_p: float = 0.20
    nu_d: float = 1.63
    snr_write: float = 179.0
    c2c_cv: float = 0.0049
    drift_gamma: float = 0.008
    drift_t0: float = 1.0
    d2d_sigma: float = 0.05
    discrete: bool = False

    def __post_init__(self):
        if not (self.g_max > self.g_min > 0):
            raise ValueError("need g_max > g_min > 0")
        if int(self.n_states) != self.n_states or self.n_states < 2:
            raise ValueError("n_states must be an integer >= 2")
        if self.nu_p < 0 or self.nu_d < 0:
            raise ValueError("nonlinearities must be >= 0")
        if not self.snr_write > 0:
            raise ValueError("snr_write must be > 0")
        if self.drift_gamma < 0 or self.drift_t0 <= 0:
            raise ValueError("need drift_gamma >= 0 and drift_t0 > 0")
        if self.c2c_cv < 0 or self.d2d_sigma < 0:
            raise ValueError("variability coefficients must be >= 0")

    @property
    def n_pulses(self) -> int:
        """Pulses needed to sweep a full ramp."""
        return int(self.n_states) - 1

    @property
    def span(self) -> float:
        return self.g_max - self.g_min

    @property
    def state_gap(self) -> float:
        """Nominal level spacing ``(g_max - g_min) / n_states``."""
        return self.span / self.n_states

    @property
    def noise_scale(self) -> float:
        """Pinned write-noise std as a fraction of the ideal step."""
        return 0.0 if math.isinf(self.snr_write) else 1.0 / math.sqrt(2.0 * self.snr_write)


@dataclass(frozen=True)
class SynapseState:
    """Conductance state of one synapse.

    ``g`` is the observable conductance and ``level`` the noiseless ramp
    position it scatters around. ``pulse_index`` counts pulses in the current
    ramp, signed by direction. The ``ramp_*`` fields pin the ramp origin.
    ``g_written``/``level_written`` hold the values at ``last_write_time``;
    drift is always evaluated from them.
    """

    g: float
    pulse_index: float = 0.0
    last_write_time: float = 0.0
    level: float | None = None
    drift_time: float | None = None
    ramp_dir: int = 0
    ramp_p0: float = 0.0
    ramp_l0: float = 0.0
    ramp_gain: float = 1.0
    g_written: float | None = None
    level_written: float | None = None

    def __post_init__(self):
        if self.level is None:
            object.__setattr__(self, "level", float(self.g))
        if self.drift_time is None:
            object.__setattr__(self, "drift_time", float(self.last_write_time))
        if self.g_written is None:
            object.__setattr__(self, "g_written", float(self.g))
        if self.level_written is None:
            object.__setattr__(self, "level_written", float(self.level))

    def check(self, params: SynapseParams) -> None:
        if not params.g_min <= self.g <= params.g_max:
            raise ValueError(f"g={self.g!r} outside [{params.g_min}, {params.g_max}]")


def ideal_ltp_curve(n, N: int, params: SynapseParams, direction: Direction = "potentiate"):
    """Noiseless conductance after ``n`` of ``N`` pulses.

    Potentiation rises from ``g_min`` as
    ``g_min + span * (1 - exp(-nu*n/N)) / (1 - exp(-nu))``; depression mirrors
    it downward from ``g_max`` with ``nu_d``. ``nu = 0`` is the linear limit.

    Parameters
    ----------
    n : int, float or array_like
        Pulse index, ``0 <= n <= N``.
    N : int
        Pulses in a full ramp.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 0) or np.any(n_arr > N):
        raise ValueError(f"pulse index must lie in [0, {N}]")
    sign = direction_sign(direction)
    nu = params.nu_p if sign > 0 else params.nu_d
    frac = kernels.curve_fraction(n_arr, nu, float(N))
    if sign > 0:
        out = params.g_min + params.span * frac
        out = np.where(n_arr == N, params.g_max, out)
    else:
        out = params.g_max - params.span * frac
        out = np.where(n_arr == N, params.g_min, out)
    return float(out) if out.ndim == 0 else out


def _as_arrays(state: SynapseState, params: SynapseParams):
    f = lambda v: np.array([v], dtype=float)
    return dict(
        g=f(state.g), level=f(state.level),
        ramp_dir=np.array([state.ramp_dir], dtype=np.int8),
        ramp_p0=f(state.ramp_p0), ramp_l0=f(state.ramp_l0),
        ramp_gain=f(state.ramp_gain), pulse_index=f(state.pulse_index),
        g_min=f(params.g_min), g_max=f(params.g_max),
        nu_p=f(params.nu_p), nu_d=f(params.nu_d),
    )


def write_pulse(state: SynapseState, direction: Direction, params: SynapseParams,
                rng: np.random.Generator, *, count: float = 1.0,
                now: float | None = None) -> SynapseState:
    """Apply ``count`` write pulses in one direction and return the new state.

    Two standard normals are drawn per call (ramp gain, programming error)
    whether or not they are used, so the stream position only depends on the
    number of calls. Saturation at a rail is silent.
    """
    sign = direction_sign(direction)
    t = state.drift_time if now is None else float(now)
    if t < state.drift_time:
        raise ValueError("write time precedes the state's last update")
    z = rng.standard_normal(2)
    a = _as_arrays(state, params)
    kernels.apply_writes(
        a["g"], a["level"], a["ramp_dir"], a["ramp_p0"], a["ramp_l0"], a["ramp_gain"],
        a["pulse_index"], a["g_min"], a["g_max"], a["nu_p"], a["nu_d"],
        float(params.n_pulses), params.noise_scale, params.c2c_cv,
        np.array([sign], dtype=np.int8), np.array([float(count)]), z[:1], z[1:],
    )
    return SynapseState(
        g=float(a["g"][0]), pulse_index=float(a["pulse_index"][0]),
        last_write_time=t, level=float(a["level"][0]), drift_time=t,
        ramp_dir=int(a["ramp_dir"][0]), ramp_p0=float(a["ramp_p0"][0]),
        ramp_l0=float(a["ramp_l0"][0]), ramp_gain=float(a["ramp_gain"][0]),
    )


def drift_factor(now, last_write_time, params: SynapseParams):
    """Power-law retention factor ``((now - t_w + t0) / t0) ** -gamma``."""
    elapsed = np.asarray(now, dtype=float) - last_write_time
    if np.any(elapsed < 0):
        raise ValueError("negative elapsed time")
    if params.drift_gamma == 0:
        return np.ones_like(elapsed) if elapsed.ndim else 1.0
    out = ((elapsed + params.drift_t0) / params.drift_t0) ** (-params.drift_gamma)
    return out if out.ndim else float(out)


def apply_drift(state: SynapseState, now: float, params: SynapseParams) -> SynapseState:
    """Relax the conductance from its last update time to ``now``.

    The conductance is recomputed from its value at the last write, so
    drifting to ``t1`` and then to ``t2`` gives bit-for-bit the same state as
    drifting straight to ``t2``. Any open ramp is closed: the next write
    re-locates the state on the ideal curve.
    """
    if now < state.last_write_time or now < state.drift_time:
        raise ValueError("negative elapsed time")
    factor = drift_factor(now, state.last_write_time, params)
    return replace(
        state,
        g=max(state.g_written * factor, params.g_min),
        level=max(state.level_written * factor, params.g_min),
        drift_time=float(now), ramp_dir=0, pulse_index=0.0,
    )


def read_conductance(state, read_cv: float, rng: np.random.Generator | None = None):
    """Noisy read ``g * (1 + eps)`` with ``eps ~ N(0, read_cv)``.

    ``state`` may be a :class:`SynapseState` or a conductance (array).
    """
    if read_cv < 0:
        raise ValueError("read_cv must be >= 0")
    g = state.g if isinstance(state, SynapseState) else np.asarray(state, dtype=float)
    if read_cv == 0 or rng is None:
        return g if np.ndim(g) else float(g)
    eps = rng.standard_normal(np.shape(g))
    out = g * (1.0 + read_cv * eps)
    return out if np.ndim(out) else float(out)


# --------------------------------------------------------------------------
# Receptor
# --------------------------------------------------------------------------

def _threshold_for(ss, nr_ion, nernst_slope, v_op):
    # Put v_th so that one Nernst decade at v_op yields nr_ion relative change.
    # Above threshold d(ln G)/da = 1 / (ss/ln10 + a - a_th), off-floor neglected.
    a_th = -v_op + ss / LN10 - nernst_slope / nr_ion
    return -a_th


@dataclass(frozen=True)
class ReceptorParams:
    """Calibration of the volatile receptor (p-type, accumulation at negative gate).

    ``v_th`` marks where the exponential subthreshold branch hands over to
    the linear above-threshold branch. When left as ``None`` it is placed so
    that a Nernstian shift of one decade at the operating point ``v_op``
    changes the current by ``nr_ion``. ``v_full`` is the gate level that
    defines full activation.
    """

    tau_on: float = 6.67e-3
    tau_off: float = 3.20e-3
    ss: float = 0.065
    g_m_norm: float = 0.027
    on_off_ratio: float = 5e5
    v_th: float | None = None
    nr_ion: float = 0.19
    nr_temp: float = 0.032
    nernst_slope: float = 0.0592
    v_op: float = -0.4
    v_full: float = -0.8
    a_ref: float = 0.1
    t_ref: float = 25.0

    def __post_init__(self):
        if self.tau_on <= 0 or self.tau_off <= 0:
            raise ValueError("time constants must be > 0")
        if self.ss <= 0:
            raise ValueError("ss must be > 0")
        if self.on_off_ratio <= 1:
            raise ValueError("on_off_ratio must be > 1")
        if self.a_ref <= 0:
            raise ValueError("a_ref must be > 0")
        if self.v_th is None:
            v_th = _threshold_for(self.ss, self.nr_ion, self.nernst_slope, self.v_op)
            object.__setattr__(self, "v_th", v_th)

    @property
    def g_on(self) -> float:
        """Conductance at threshold, fixed by the peak transconductance."""
        return self.g_m_norm * self.ss / LN10

    @property
    def g_off(self) -> float:
        return self.g_on / self.on_off_ratio

    @property
    def g_full(self) -> float:
        return float(channel_conductance(self.v_full, self))

    @property
    def op_gain(self) -> float:
        """Relative conductance change per volt of accumulation drive at ``v_op``."""
        a = -self.v_op
        return float(_dg_da(a, self) / _g_of_drive(a, self))


@dataclass(frozen=True)
class ReceptorState:
    """Normalized activation ``x`` in [0, 1] of a receptor."""

    x: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise ValueError("x must lie in [0, 1]")


def _activation(a, p: ReceptorParams):
    a_th = -p.v_th
    z = (np.asarray(a, dtype=float) - a_th) / p.ss
    sub = 10.0 ** np.minimum(z, 0.0)
    return np.where(z <= 0.0, sub, 1.0 + LN10 * np.maximum(z, 0.0))


def _g_of_drive(a, p: ReceptorParams):
    return p.g_off + p.g_on * _activation(a, p)


def _dg_da(a, p: ReceptorParams):
    a_th = -p.v_th
    z = (np.asarray(a, dtype=float) - a_th) / p.ss
    return p.g_on * LN10 / p.ss * np.where(z <= 0.0, 10.0 ** np.minimum(z, 0.0), 1.0)


def channel_conductance(v_gs, params: ReceptorParams, offset=0.0):
    """Static channel conductance at gate voltage ``v_gs``.

    ``offset`` is an extra accumulation drive in volts (see :func:`sense_offset`).
    Below threshold the off-floor-subtracted conductance changes tenfold per
    ``ss``; above it the conductance grows linearly with slope ``g_m_norm``.
    """
    a = -np.asarray(v_gs, dtype=float) + offset
    out = _g_of_drive(a, params)
    return out if out.ndim else float(out)


def transfer_current(v_gs, v_ds, params: ReceptorParams, offset=0.0):
    """Drain current ``v_ds * G_ch(v_gs)`` (carries the sign of ``v_ds``)."""
    return np.asarray(v_ds, dtype=float) * channel_conductance(v_gs, params, offset)


def gate_drive(v_gs, params: ReceptorParams, offset=0.0):
    """Normalized drive ``u`` in [0, 1]: steady-state activation for ``v_gs``."""
    g = channel_conductance(v_gs, params, offset)
    u = (g - params.g_off) / (params.g_full - params.g_off)
    out = np.clip(u, 0.0, 1.0)
    return out if np.ndim(out) else float(out)


def state_conductance(x, params: ReceptorParams):
    """Channel conductance of a receptor with activation ``x``."""
    return params.g_off + (params.g_full - params.g_off) * np.asarray(x, dtype=float)


def relax(x, u, dt, tau_on, tau_off):
    """Exact first-order relaxation toward ``u`` (vectorized)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    tau = np.where(u > x, tau_on, tau_off)
    # convex combination of non-negative terms: no cancellation either way
    r = np.asarray(dt, dtype=float) / tau
    return np.where(u == x, x, u * -np.expm1(-r) + x * np.exp(-r))


def receptor_step(state: ReceptorState, u: float, dt: float,
                  params: ReceptorParams) -> ReceptorState:
    """Advance the activation by ``dt`` with drive ``u`` held constant.

    Rising uses ``tau_on``, falling ``tau_off``. The update is the exact
    solution of the linear ODE, so splitting ``dt`` gives the same result.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    x = float(relax(state.x, u, dt, params.tau_on, params.tau_off))
    return ReceptorState(min(max(x, 0.0), 1.0))


def sense_offset(params: ReceptorParams, *, activity: float | None = None,
                 temperature: float | None = None) -> float:
    """Accumulation-drive shift (V) caused by ion activity or temperature.

    Exactly one of ``activity`` (mol/L) or ``temperature`` (deg C) is given.
    The ion branch is the Nernst shift ``nernst_slope * log10(activity / a_ref)``;
    with the default threshold placement it changes the current at ``v_op``
    by ``nr_ion`` per decade. The temperature branch is linear in
    ``temperature - t_ref`` and scaled to ``nr_temp`` per kelvin at ``v_op``.
    """
    if (activity is None) == (temperature is None):
        raise ValueError("give exactly one of activity or temperature")
    if activity is not None:
        if not activity > 0:
            raise ValueError("ion activity must be > 0")
        return params.nernst_slope * math.log10(activity / params.a_ref)
    return params.nr_temp / params.op_gain * (temperature - params.t_ref)


def normalized_response(offset: float, params: ReceptorParams, v_gs: float | None = None) -> float:
    """Relative current change ``dI / I`` caused by ``offset`` at ``v_gs``."""
    v = params.v_op if v_gs is None else v_gs
    base = channel_conductance(v, params)
    return channel_conductance(v, params, offset) / base - 1.0


# --------------------------------------------------------------------------
# STDP kernel
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StdpParams:
    """Exponential STDP window. ``a_minus`` defaults to ``a_plus``."""

    a_plus: float = 1.2e-7
    tau_stdp: float = 0.06
    a_minus: float | None = None

    def __post_init__(self):
        if not self.tau_stdp > 0:
            raise ValueError("tau_stdp must be > 0")
        if self.a_minus is None:
            object.__setattr__(self, "a_minus", self.a_plus)


def stdp_kernel(delta_t, params: StdpParams):
    """Conductance change for a pre-to-post delay ``delta_t`` (seconds)."""
    dt = np.asarray(delta_t, dtype=float)
    out = np.where(dt >= 0,
                   params.a_plus * np.exp(-np.abs(dt) / params.tau_stdp),
                   params.a_minus * np.exp(-np.abs(dt) / params.tau_stdp))
    return out if out.ndim else float(out)
