"""1T1R crossbar built from one receptor ("T") and one synapse ("R") per cell.

In every cell the source of T feeds the gate of R. A drive on T's drain
reaches R's gate through the divider formed by T's channel and the series
conductance ``G_s``:

    V_GD = (V_drive - V_read) * g_T / (g_T + G_s)

When ``|V_GD|`` exceeds the switching threshold, R is programmed; a negative
``V_GD`` potentiates and a positive one depresses. The amount of programming
is the overdrive current ``(g_T + G_s) * (|V_GD| - V_sw)`` relative to the
current through a fully-on T, times the drive duration, counted in unit
pulses of ``pulse_volt_seconds``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .devices import (ReceptorParams, ReceptorState, SynapseParams, SynapseState,
                      gate_drive, relax, sense_offset, state_conductance)


@dataclass(frozen=True)
class CrossbarConfig:
    """Circuit-level settings shared by all cells.

    Attributes
    ----------
    read_cv : float
        Relative read noise of a conductance read.
    v_read : float
        Read voltage on R's drain (V).
    series_conductance : float
        Divider load between T's channel and R's gate (S).
    t_tau_off : float
        Relaxation time of T when loaded by R's gate (s).
    switch_threshold : float
        Gate-drain magnitude above which R is programmed (V).
    pulse_volt_seconds : float
        Overdrive-time product equivalent to one unit write pulse (V s).
    """

    read_cv: float = 2e-4
    v_read: float = 0.1
    series_conductance: float = 1.9e-4
    t_tau_off: float = 0.060
    switch_threshold: float = 0.8
    pulse_volt_seconds: float = 2e-4

    def __post_init__(self):
        if self.read_cv < 0:
            raise ValueError("read_cv must be >= 0")
        if self.series_conductance <= 0 or self.t_tau_off <= 0:
            raise ValueError("series_conductance and t_tau_off must be > 0")
        if self.switch_threshold <= 0 or self.pulse_volt_seconds <= 0:
            raise ValueError("switch_threshold and pulse_volt_seconds must be > 0")


@dataclass(frozen=True)
class SpikeEvent:
    """Rectangular voltage pulse on one row or column line."""

    line: int
    amplitude: float
    width: float
    onset: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("spike width must be > 0")

    @property
    def end(self) -> float:
        return self.onset + self.width


@dataclass
class ProgramReport:
    """Per-cell outcome of :func:`program_parallel`."""

    residual: np.ndarray
    pulses: np.ndarray
    converged: np.ndarray
    unreachable: np.ndarray
    iterations: int

    @property
    def total_pulses(self) -> float:
        return float(self.pulses.sum())


class Crossbar:
    """A rows x cols array of 1T1R cells.

    Synapse state lives in flat float64 arrays (row-major) so it can be handed
    to the kernels directly; :meth:`cell` and :meth:`set_cell` expose single
    cells as value objects. Device-to-device spread is drawn once at
    construction from ``rng`` when ``synapse.d2d_sigma > 0``.
    """

    def __init__(self, rows: int, cols: int, synapse: SynapseParams | None = None,
                 receptor: ReceptorParams | None = None,
                 config: CrossbarConfig | None = None,
                 rng: np.random.Generator | None = None, g_init=None):
        if rows < 1 or cols < 1:
            raise ValueError("crossbar needs rows, cols >= 1")
        self.rows, self.cols = int(rows), int(cols)
        self.synapse = synapse or SynapseParams()
        self.receptor = receptor or ReceptorParams()
        self.config = config or CrossbarConfig()
        size = self.rows * self.cols
        sp = self.synapse

        sigma = sp.d2d_sigma
        if sigma > 0 and rng is not None:
            z = rng.standard_normal((4, size))
            self.g_min = sp.g_min * np.exp(sigma * z[0])
            self.g_max = sp.g_max * np.exp(sigma * z[1])
            self.nu_p = np.maximum(sp.nu_p * (1.0 + sigma * z[2]), 0.0)
            self.nu_d = np.maximum(sp.nu_d * (1.0 + sigma * z[3]), 0.0)
            if np.any(self.g_max <= self.g_min):
                raise ValueError("device spread too wide: some cells have g_max <= g_min")
        else:
            self.g_min = np.full(size, sp.g_min)
            self.g_max = np.full(size, sp.g_max)
            self.nu_p = np.full(size, float(sp.nu_p))
            self.nu_d = np.full(size, float(sp.nu_d))

        g0 = self.g_min.copy() if g_init is None else np.broadcast_to(
            np.asarray(g_init, dtype=float), (self.rows, self.cols)).ravel()
        self.g = np.clip(g0, self.g_min, self.g_max).astype(float)
        self.level = self.g.copy()
        self.ramp_dir = np.zeros(size, dtype=np.int8)
        self.ramp_p0 = np.zeros(size)
        self.ramp_l0 = self.g.copy()
        self.ramp_gain = np.ones(size)
        self.pulse_index = np.zeros(size)
        self.x = np.full((self.rows, self.cols), self.t_baseline)

    # -- views ---------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def conductances(self) -> np.ndarray:
        """True synapse conductances, shape (rows, cols); a view."""
        return self.g.reshape(self.rows, self.cols)

    @property
    def t_params(self) -> ReceptorParams:
        """Receptor parameters of T as loaded inside the cell."""
        return replace(self.receptor, tau_off=self.config.t_tau_off)

    @property
    def t_baseline(self) -> float:
        """Resting activation of T with a grounded gate."""
        return float(gate_drive(0.0, self.receptor))

    @property
    def state_gap(self) -> float:
        return self.synapse.state_gap

    @property
    def tolerance(self) -> np.ndarray:
        """Per-cell half state-gap used by write-verify."""
        return (self.g_max - self.g_min) / (2.0 * self.synapse.n_states)

    def copy(self) -> "Crossbar":
        new = object.__new__(Crossbar)
        new.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v)
                             for k, v in self.__dict__.items()})
        return new

    def cell(self, i: int, j: int) -> tuple[ReceptorState, SynapseState]:
        k = self._flat(i, j)
        syn = SynapseState(
            g=float(self.g[k]), pulse_index=float(self.pulse_index[k]),
            level=float(self.level[k]), ramp_dir=int(self.ramp_dir[k]),
            ramp_p0=float(self.ramp_p0[k]), ramp_l0=float(self.ramp_l0[k]),
            ramp_gain=float(self.ramp_gain[k]))
        return ReceptorState(float(self.x[i, j])), syn

    def set_cell(self, i: int, j: int, receptor: ReceptorState, synapse: SynapseState) -> None:
        k = self._flat(i, j)
        if not self.g_min[k] <= synapse.g <= self.g_max[k]:
            raise ValueError("synapse conductance outside the cell's rails")
        self.x[i, j] = receptor.x
        self.g[k], self.level[k] = synapse.g, synapse.level
        self.ramp_dir[k], self.ramp_p0[k] = synapse.ramp_dir, synapse.ramp_p0
        self.ramp_l0[k], self.ramp_gain[k] = synapse.ramp_l0, synapse.ramp_gain
        self.pulse_index[k] = synapse.pulse_index

    def _flat(self, i: int, j: int) -> int:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"cell ({i}, {j}) outside {self.rows}x{self.cols}")
        return i * self.cols + j

    # -- device operations ---------------------------------------------------

    def read(self, rng: np.random.Generator | None = None, read_cv: float | None = None) -> np.ndarray:
        """Noisy conductance read of every cell, shape (rows, cols)."""
        cv = self.config.read_cv if read_cv is None else read_cv
        g = self.conductances
        if cv == 0 or rng is None:
            return g.copy()
        return g * (1.0 + cv * rng.standard_normal(g.shape))

    def write(self, direction, amount, rng: np.random.Generator) -> None:
        """Apply one write event per cell (direction 0 or amount 0 skips a cell).

        Two normals per cell (plus one uniform for discrete devices) are drawn
        on every call so the random stream does not depend on which cells
        were written.
        """
        d = np.ascontiguousarray(np.broadcast_to(direction, self.shape), dtype=np.int8).ravel()
        m = np.ascontiguousarray(np.broadcast_to(amount, self.shape), dtype=float).ravel()
        z = rng.standard_normal((2, d.size))
        if self.synapse.discrete:
            m = np.floor(m + rng.random(d.size))
        kernels.apply_writes(
            self.g, self.level, self.ramp_dir, self.ramp_p0, self.ramp_l0, self.ramp_gain,
            self.pulse_index, self.g_min, self.g_max, self.nu_p, self.nu_d,
            float(self.synapse.n_pulses), self.synapse.noise_scale, self.synapse.c2c_cv,
            d, m, z[0], z[1])

    def settle(self, duration: float) -> None:
        """Let every T relax toward its grounded-gate baseline for ``duration``."""
        if duration > 0:
            p = self.t_params
            self.x = relax(self.x, self.t_baseline, duration, p.tau_on, p.tau_off)

    # -- 1T1R coupling -------------------------------------------------------

    def coupled_pulses(self, g_t, v_drive, duration):
        """Equivalent unit pulses and direction delivered to R by a drain drive.

        Parameters
        ----------
        g_t : array_like
            Channel conductance of T during the drive.
        v_drive : float or array_like
            Voltage applied to T's drain.
        duration : float or array_like
            Drive duration in seconds.

        Returns
        -------
        direction : ndarray of int8
            +1 potentiate, -1 depress, 0 below threshold.
        amount : ndarray
            Equivalent pulse count (fractional).
        """
        cfg = self.config
        g_t = np.asarray(g_t, dtype=float)
        v = np.asarray(v_drive, dtype=float) - cfg.v_read
        gs = cfg.series_conductance
        v_gd = v * g_t / (g_t + gs)
        over = np.abs(v_gd) - cfg.switch_threshold
        g_full = self.receptor.g_full
        overdrive = (g_t + gs) * np.maximum(over, 0.0) / (g_full + gs)
        amount = overdrive * np.asarray(duration, dtype=float) / cfg.pulse_volt_seconds
        direction = np.where(over > 0, -np.sign(v_gd), 0).astype(np.int8)
        return direction, np.where(over > 0, amount, 0.0)


def mvm(xbar: Crossbar, inputs, rng: np.random.Generator | None = None,
        v_read: float | None = None) -> np.ndarray:
    """Analog matrix-vector product: column currents for row drives ``inputs``.

    ``inputs`` has shape (rows,) or (batch, rows). Each cell contributes
    ``inputs[i] * g[i, j] * (1 + eps) * v_read`` with independent read noise
    ``eps ~ N(0, read_cv)``. The sum of those Gaussian terms is drawn directly
    in output space, which is exact in distribution and avoids materializing
    one noise sample per cell and input.
    """
    x = np.asarray(inputs, dtype=float)
    if x.shape[-1] != xbar.rows:
        raise ValueError(f"inputs have {x.shape[-1]} entries, crossbar has {xbar.rows} rows")
    v = xbar.config.v_read if v_read is None else v_read
    g = xbar.conductances
    out = x @ g
    cv = xbar.config.read_cv
    if rng is not None and cv > 0:
        std = np.sqrt((x * x) @ (g * g)) * cv
        out = out + std * rng.standard_normal(out.shape)
    return out * v


def stdp_program_mechanistic(xbar: Crossbar, pre: SpikeEvent | list[SpikeEvent],
                             post: SpikeEvent | list[SpikeEvent],
                             rng: np.random.Generator) -> np.ndarray:
    """Program the array with pre-spikes on T gates (rows) and post-spikes on T drains (columns).

    Each T starts from its stored activation. A pre-spike drives it toward
    the activation of its gate voltage with ``tau_on``; afterwards it relaxes
    with the loaded ``t_tau_off``. At each post-spike onset the divider
    voltage on R's gate sets the write. The stored activations are left at
    the last post-spike onset. Returns the equivalent pulse counts applied,
    signed by direction, shape (rows, cols).
    """
    pres = [pre] if isinstance(pre, SpikeEvent) else list(pre)
    posts = [post] if isinstance(post, SpikeEvent) else list(post)
    if not posts:
        return np.zeros(xbar.shape)
    rows = np.array([e.line for e in pres], dtype=int)
    if np.any(rows < 0) or np.any(rows >= xbar.rows):
        raise IndexError("pre-spike line outside the array")
    if len(set(rows.tolist())) != len(pres):
        raise ValueError("at most one pre-spike per row")
    cols = np.array([e.line for e in posts], dtype=int)
    if np.any(cols < 0) or np.any(cols >= xbar.cols):
        raise IndexError("post-spike line outside the array")
    if len(set(cols.tolist())) != len(cols):
        raise ValueError("at most one post-spike per column")

    # rows without a pre-spike see an empty drive window at t = 0
    on = np.zeros(xbar.rows)
    width = np.zeros(xbar.rows)
    amp = np.zeros(xbar.rows)
    on[rows] = [e.onset for e in pres]
    width[rows] = [e.width for e in pres]
    amp[rows] = [e.amplitude for e in pres]
    t0 = min(on.min(), min(e.onset for e in posts))
    return stdp_program_arrays(
        xbar, on - t0, width, amp, cols,
        np.array([e.amplitude for e in posts]),
        np.array([e.onset for e in posts]) - t0,
        np.array([e.width for e in posts]), rng)


def stdp_program_arrays(xbar: Crossbar, pre_onset, pre_width, pre_amplitude,
                        post_cols, post_amplitude, post_onset, post_width,
                        rng: np.random.Generator) -> np.ndarray:
    """Array form of :func:`stdp_program_mechanistic`.

    ``pre_*`` have one entry per row (width 0 means no spike); ``post_*``
    have one entry per spiking column. Times are relative to the moment the
    stored T activations refer to.
    """
    p = xbar.t_params
    base = xbar.t_baseline
    active = np.asarray(pre_width) > 0
    on = np.asarray(pre_onset, dtype=float)[:, None]
    off = on + np.asarray(pre_width, dtype=float)[:, None]
    u = np.where(active, gate_drive(np.asarray(pre_amplitude, dtype=float), xbar.receptor),
                 base)[:, None]
    post_cols = np.asarray(post_cols, dtype=int)
    post_onset = np.asarray(post_onset, dtype=float)

    direction = np.zeros(xbar.shape, dtype=np.int8)
    amount = np.zeros(xbar.shape)
    x_start = xbar.x
    for j, v, t, w in zip(post_cols, post_amplitude, post_onset, post_width):
        x = _x_at(x_start[:, j:j + 1], base, u, on, off, t, p)[:, 0]
        direction[:, j], amount[:, j] = xbar.coupled_pulses(
            state_conductance(x, xbar.receptor), v, w)
    t_last = float(post_onset.max()) if post_onset.size else 0.0
    xbar.x = _x_at(x_start, base, u, on, off, t_last, p)
    xbar.write(direction, amount, rng)
    return direction * amount


def _x_at(x0, base, u, on, off, t, p: ReceptorParams):
    """Activation at time ``t`` of a T resting at ``base`` and driven toward ``u`` on [on, off)."""
    x = relax(x0, base, np.minimum(on, t), p.tau_on, p.tau_off)
    x = relax(x, u, np.clip(t - on, 0.0, off - on), p.tau_on, p.tau_off)
    return relax(x, base, np.maximum(t - off, 0.0), p.tau_on, p.tau_off)


def program_parallel(xbar: Crossbar, target, max_pulses, rng: np.random.Generator,
                     mask=None, adaptive: bool = True) -> ProgramReport:
    """Closed-loop write-verify of all selected cells at once.

    Each round reads every still-active cell, stops those within half a
    state-gap of their target, and issues pulses toward the target for the
    rest. With ``adaptive`` the pulse count per round is the remaining error
    over the local ideal step (at least one); otherwise one pulse per round.
    Targets outside a cell's rails are clipped and flagged as unreachable.
    """
    tgt = np.asarray(target, dtype=float)
    if tgt.shape != xbar.shape:
        raise ValueError(f"target shape {tgt.shape} does not match {xbar.shape}")
    tgt = tgt.ravel()
    unreachable = (tgt < xbar.g_min) | (tgt > xbar.g_max)
    tgt = np.clip(tgt, xbar.g_min, xbar.g_max)
    size = tgt.size
    active = np.ones(size, dtype=bool) if mask is None else np.asarray(
        np.broadcast_to(mask, xbar.shape), dtype=bool).ravel().copy()
    budget = np.ascontiguousarray(np.broadcast_to(
        np.asarray(max_pulses, dtype=float), xbar.shape), dtype=float).ravel()
    used = np.zeros(size)
    converged = np.zeros(size, dtype=bool)
    tol = xbar.tolerance
    cv = xbar.config.read_cv
    sp = xbar.synapse
    rounds = 0
    while active.any():
        z = rng.standard_normal((3, size))
        kernels.verify_iteration(
            xbar.g, xbar.level, xbar.ramp_dir, xbar.ramp_p0, xbar.ramp_l0, xbar.ramp_gain,
            xbar.pulse_index, xbar.g_min, xbar.g_max, xbar.nu_p, xbar.nu_d,
            float(sp.n_pulses), sp.noise_scale, sp.c2c_cv,
            tgt, tol, used, budget, active, converged, cv, adaptive, z[0], z[1], z[2])
        rounds += 1
    residual = (xbar.g - tgt).reshape(xbar.shape)
    return ProgramReport(residual=residual, pulses=used.reshape(xbar.shape),
                         converged=converged.reshape(xbar.shape),
                         unreachable=unreachable.reshape(xbar.shape), iterations=rounds)


def reflex_step(xbar: Crossbar, cell: tuple[int, int], bell: float, food: float,
                activity: float, dt: float, rng: np.random.Generator,
                vdd: float = -0.8) -> float:
    """Advance the conditioned-reflex cell by ``dt`` and return R's conductance.

    T's gate sees the superposition ``bell + food``; the ion activity of the
    solution shifts its drive by the Nernst offset. The drain of T sits at
    ``vdd``. T's activation relaxes toward the drive over ``dt`` and its
    time-averaged conductance sets the write on R.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    i, j = cell
    xbar._flat(i, j)
    p = xbar.t_params
    offset = sense_offset(xbar.receptor, activity=activity)
    u = float(gate_drive(bell + food, xbar.receptor, offset))
    x0 = float(xbar.x[i, j])
    tau = p.tau_on if u > x0 else p.tau_off
    decay = np.exp(-dt / tau)
    x_mean = u + (x0 - u) * tau / dt * (1.0 - decay)
    xbar.x[i, j] = u + (x0 - u) * decay
    g_t = float(state_conductance(x_mean, xbar.receptor))
    d, m = xbar.coupled_pulses(g_t, vdd, dt)
    direction = np.zeros(xbar.shape, dtype=np.int8)
    amount = np.zeros(xbar.shape)
    direction[i, j], amount[i, j] = d, m
    xbar.write(direction, amount, rng)
    return float(xbar.conductances[i, j])


def save_snapshot(xbar: Crossbar, path) -> None:
    """Write synapse conductances as a row-major text matrix (siemens)."""
    np.savetxt(path, xbar.conductances, fmt="%.17e",
               header=f"crossbar {xbar.rows}x{xbar.cols} conductance (S)")


def load_snapshot(path, xbar: Crossbar) -> Crossbar:
    """Load conductances written by :func:`save_snapshot` into ``xbar``."""
    g = np.loadtxt(Path(path), ndmin=2)
    if g.shape != xbar.shape:
        raise ValueError(f"snapshot shape {g.shape} does not match {xbar.shape}")
    flat = g.ravel()
    if np.any(flat < xbar.g_min) or np.any(flat > xbar.g_max):
        raise ValueError("snapshot conductance outside the cell rails")
    xbar.g[:] = flat
    xbar.level[:] = flat
    xbar.ramp_dir[:] = 0
    xbar.pulse_index[:] = 0.0
    return xbar
