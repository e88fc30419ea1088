"""Parametric 12-lead ECG generator and CSV ingestion.

Each beat is a sum of Gaussian bumps (P, Q, R, S, T and, for one class, an
ST plateau) centred relative to the R peak. Lead ``l`` scales every wave by
the gain of its group (P, QRS or T) from :data:`LEAD_GAINS`. The record starts
with an R peak at ``R_OFFSET`` seconds, as if the window were triggered on
a detected beat.

Classes
-------
===  ============  =====  =====================================================
id   name          bpm    morphology change
===  ============  =====  =====================================================
0    normal        72     reference beat
1    tachycardia   130    reference beat at a fast rate
2    bradycardia   45     reference beat at a slow rate
3    wide-qrs      72     QRS widths x2.5, R x0.8, discordant (inverted) T wave
4    st-elevation  72     broad +0.2 mV plateau between QRS and T
===  ============  =====  =====================================================

The T-wave offset follows Bazett scaling ``0.25 s * sqrt(RR)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_LEADS = 12
N_CLASSES = 5
LEAD_NAMES = ("I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6")
CLASS_NAMES = ("normal", "tachycardia", "bradycardia", "wide-qrs", "st-elevation")
R_OFFSET = 0.25  # s, first R peak in the window

# (amplitude mV, centre relative to R in s, width s, group)
BASE_WAVES = {
    "P": (0.15, -0.16, 0.025, 0),
    "Q": (-0.10, -0.025, 0.010, 1),
    "R": (1.00, 0.0, 0.010, 1),
    "S": (-0.25, 0.025, 0.010, 1),
    "T": (0.30, None, 0.040, 2),
}

# per-lead gain of the P, QRS and T groups
LEAD_GAINS = np.array([
    [0.6, 0.70, 0.6],
    [1.0, 1.00, 1.0],
    [0.4, 0.30, 0.4],
    [-0.8, -0.85, -0.8],
    [0.1, 0.20, 0.1],
    [0.7, 0.65, 0.7],
    [0.5, -0.60, -0.2],
    [0.6, -0.30, 0.6],
    [0.6, 0.40, 0.9],
    [0.6, 1.20, 1.0],
    [0.6, 1.10, 0.8],
    [0.6, 0.90, 0.6],
])

CLASS_TABLE = {
    0: dict(bpm=72.0),
    1: dict(bpm=130.0),
    2: dict(bpm=45.0),
    3: dict(bpm=72.0, qrs_width=2.5, r_scale=0.8, t_scale=-0.6),
    4: dict(bpm=72.0, st=(0.20, 0.12, 0.06)),
}


@dataclass(frozen=True)
class EcgRecord:
    """A 12-lead recording in volts, shape (12, samples)."""

    leads: np.ndarray
    sample_rate: float
    label: int = -1

    def __post_init__(self):
        leads = np.asarray(self.leads, dtype=float)
        if leads.ndim != 2 or leads.shape[0] != N_LEADS:
            raise ValueError(f"an ECG record needs exactly {N_LEADS} leads")
        if leads.shape[1] < 2:
            raise ValueError("record too short")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if self.label >= N_CLASSES:
            raise ValueError(f"label must be < {N_CLASSES}")
        object.__setattr__(self, "leads", leads)

    @property
    def duration(self) -> float:
        return self.leads.shape[1] / self.sample_rate


@dataclass(frozen=True)
class EcgNoise:
    """Per-record randomization. ``EcgNoise.off()`` gives clean, exact waveforms."""

    white_mv: float = 0.03
    wander_mv: float = 0.05
    rate_jitter: float = 0.03
    amp_jitter: float = 0.05
    phase_jitter: float = 0.01

    @classmethod
    def off(cls) -> "EcgNoise":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


def beat_waves(label: int, rr: float) -> list[tuple[float, float, float, int]]:
    """Wave list (amplitude mV, centre s, width s, group) for one beat of a class."""
    spec = CLASS_TABLE[label]
    waves = []
    for name, (amp, centre, width, group) in BASE_WAVES.items():
        if name == "T":
            centre = 0.25 * math.sqrt(rr)
            amp *= spec.get("t_scale", 1.0)
        if group == 1:
            width *= spec.get("qrs_width", 1.0)
            centre *= spec.get("qrs_width", 1.0)
        if name == "R":
            amp *= spec.get("r_scale", 1.0)
        waves.append((amp, centre, width, group))
    if "st" in spec:
        amp, centre, width = spec["st"]
        waves.append((amp, centre, width, 2))
    return waves


def generate_synthetic_ecg(label: int, seed: int | None = 0, sample_rate: float = 250.0,
                           duration: float = 2.0, noise: EcgNoise | None = None) -> EcgRecord:
    """Draw one synthetic record of class ``label``.

    With ``noise=EcgNoise.off()`` the output is strictly periodic at the
    class rate and independent of ``seed``.
    """
    if label not in CLASS_TABLE:
        raise ValueError(f"class must be in 0..{N_CLASSES - 1}")
    if not sample_rate > 0 or not duration > 0:
        raise ValueError("sample_rate and duration must be > 0")
    noise = EcgNoise() if noise is None else noise
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, 4)
    bpm = CLASS_TABLE[label]["bpm"] * (1.0 + noise.rate_jitter * u[0])
    rr = 60.0 / bpm
    gain = 1.0 + noise.amp_jitter * u[1]
    first = R_OFFSET + noise.phase_jitter * u[2]

    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    leads = np.zeros((N_LEADS, n))
    waves = beat_waves(label, rr)
    k_lo = -int(math.ceil((first + 1.0) / rr))
    k_hi = int(math.ceil((duration - first + 1.0) / rr))
    for k in range(k_lo, k_hi + 1):
        r_time = first + k * rr
        for amp, centre, width, group in waves:
            bump = amp * np.exp(-0.5 * ((t - r_time - centre) / width) ** 2)
            leads += np.outer(LEAD_GAINS[:, group], bump)
    leads *= gain
    if noise.wander_mv > 0:
        freq = rng.uniform(0.15, 0.35, N_LEADS)
        phase = rng.uniform(0, 2 * np.pi, N_LEADS)
        leads += noise.wander_mv * np.sin(2 * np.pi * freq[:, None] * t + phase[:, None])
    if noise.white_mv > 0:
        leads += noise.white_mv * rng.standard_normal(leads.shape)
    return EcgRecord(leads * 1e-3, sample_rate, label)


def synthetic_dataset(n_per_class: int, seed: int = 0, **kwargs) -> list[EcgRecord]:
    """Balanced list of records, classes interleaved, each with its own seed."""
    seeds = np.random.SeedSequence(seed).generate_state(n_per_class * N_CLASSES)
    return [generate_synthetic_ecg(i % N_CLASSES, int(s), **kwargs)
            for i, s in enumerate(seeds)]


def r_peaks(signal: np.ndarray, sample_rate: float, threshold: float | None = None) -> np.ndarray:
    """Sample indices of R peaks (local maxima above half the maximum)."""
    x = np.asarray(signal, dtype=float)
    thr = 0.5 * x.max() if threshold is None else threshold
    inner = (x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]) & (x[1:-1] > thr)
    return np.flatnonzero(inner) + 1


def write_ecg_csv(record: EcgRecord, path) -> None:
    """One column per lead (volts), header row, sample rate in a comment line."""
    with open(path, "w") as fh:
        fh.write(f"# sample_rate={record.sample_rate!r}\n")
        if record.label >= 0:
            fh.write(f"# label={record.label}\n")
        fh.write(",".join(LEAD_NAMES) + "\n")
        np.savetxt(fh, record.leads.T, delimiter=",", fmt="%.16e")


def read_ecg_csv(path, sample_rate: float | None = None) -> EcgRecord:
    """Read a record written by :func:`write_ecg_csv` or an external 12-column file."""
    meta = {}
    header = None
    skip = 0
    with open(Path(path)) as fh:
        for line in fh:
            s = line.strip()
            if s.startswith("#"):
                key, _, value = s[1:].partition("=")
                meta[key.strip()] = value.strip()
                skip += 1
                continue
            header = [h.strip() for h in s.split(",")]
            skip += 1
            break
    if header is None or len(header) != N_LEADS:
        raise ValueError(f"{path}: expected a header row with {N_LEADS} lead columns")
    rate = sample_rate if sample_rate is not None else meta.get("sample_rate")
    if rate is None:
        raise ValueError(f"{path}: no sample_rate comment and none given")
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    label = int(meta.get("label", -1))
    return EcgRecord(data.T, float(rate), label)
