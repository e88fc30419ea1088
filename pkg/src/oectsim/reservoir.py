"""Receptor-array reservoir for 12-lead ECG with a crossbar readout.

Every lead drives the gate of its own receptor. The receptor's asymmetric
relaxation acts as a nonlinear leaky integrator; its drain current is sampled
at ``n_virtual`` evenly spaced instants, giving ``12 * n_virtual`` features
(lead-major). A differential crossbar trained in the loop classifies them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .devices import ReceptorParams, gate_drive, state_conductance
from .ecg import N_CLASSES, N_LEADS, EcgRecord
from .learning import Network, ann_train_step, build_network, confusion_matrix, predict
from .presets import Preset


@dataclass(frozen=True)
class ReservoirConfig:
    """Reservoir settings.

    ``input_gain`` converts lead volts into gate volts (13 V/V maps +-1 mV to
    +-0.2 current decades at ss = 65 mV/dec). The drive is applied as
    ``v_gs = v_bias - input_gain * v_lead`` so positive deflections open the
    channel.
    """

    n_virtual: int = 13
    window: float = 2.0
    input_gain: float = 13.0
    v_bias: float = 0.0
    v_ds: float = -0.8

    def __post_init__(self):
        if self.n_virtual < 1:
            raise ValueError("n_virtual must be >= 1")
        if not self.window > 0:
            raise ValueError("window must be > 0")

    @property
    def n_features(self) -> int:
        return N_LEADS * self.n_virtual


@dataclass
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("feature vector must be 1-D")


@dataclass
class FeatureScaler:
    """Per-feature min-max scaling fitted on training data only."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, features) -> "FeatureScaler":
        f = np.asarray(features, dtype=float)
        if f.ndim != 2 or len(f) == 0:
            raise ValueError("fit needs a non-empty (samples, features) array")
        return cls(f.min(axis=0), f.max(axis=0))

    def transform(self, features) -> np.ndarray:
        f = np.asarray(features, dtype=float)
        span = self.hi - self.lo
        out = (f - self.lo) / np.where(span > 0, span, 1.0)
        return np.clip(out, 0.0, 1.0)


def sample_indices(config: ReservoirConfig, sample_rate: float) -> np.ndarray:
    """Sample index of virtual node ``k`` at ``t_k = (k + 1) * window / n_virtual``."""
    t = (np.arange(config.n_virtual) + 1) * config.window / config.n_virtual
    return np.maximum(np.rint(t * sample_rate).astype(int) - 1, 0)


def reservoir_states(record: EcgRecord, config: ReservoirConfig,
                     params: ReceptorParams) -> np.ndarray:
    """Receptor activation over the window, shape (samples, 12).

    Each receptor starts at the equilibrium of its first input sample.
    """
    n = int(round(config.window * record.sample_rate))
    if record.leads.shape[1] < n:
        raise ValueError(f"record of {record.duration:.3f} s is shorter than the "
                         f"{config.window} s window")
    v_gs = config.v_bias - config.input_gain * record.leads[:, :n].T
    u = np.ascontiguousarray(gate_drive(v_gs, params), dtype=float)
    dt = 1.0 / record.sample_rate
    a_on = np.full(N_LEADS, -np.expm1(-dt / params.tau_on))
    a_off = np.full(N_LEADS, -np.expm1(-dt / params.tau_off))
    x0 = u[0].copy()
    return kernels.receptor_chain(u, x0, a_on, a_off)


def reservoir_transform(record: EcgRecord, config: ReservoirConfig | None = None,
                        params: ReceptorParams | None = None,
                        scaler: FeatureScaler | None = None) -> FeatureVector:
    """Sampled drain currents of the 12 receptors, lead-major.

    Without a ``scaler`` the raw currents (A) are returned; with one they are
    min-max normalized to [0, 1].
    """
    config = config or ReservoirConfig()
    params = params or ReceptorParams()
    x = reservoir_states(record, config, params)[sample_indices(config, record.sample_rate)]
    current = config.v_ds * state_conductance(x, params)
    values = current.T.reshape(-1)
    if scaler is not None:
        values = scaler.transform(values)
    return FeatureVector(values)


def transform_many(records, config: ReservoirConfig | None = None,
                   params: ReceptorParams | None = None) -> np.ndarray:
    return np.array([reservoir_transform(r, config, params).values for r in records])


@dataclass
class Readout:
    """Trained readout: crossbar network plus the feature pipeline it expects."""

    net: Network
    scaler: FeatureScaler | None = None
    config: ReservoirConfig = field(default_factory=ReservoirConfig)
    params: ReceptorParams = field(default_factory=ReceptorParams)
    curve: list[float] = field(default_factory=list)
    first_perfect_epoch: int | None = None

    @property
    def trained(self) -> bool:
        return self.scaler is not None and bool(self.curve)


def build_readout(preset: Preset | str, rng: np.random.Generator,
                  config: ReservoirConfig | None = None, weight_range: float = 4.0) -> Readout:
    config = config or ReservoirConfig()
    if isinstance(preset, str):
        from .presets import load_preset
        preset = load_preset(preset)
    net = build_network(config.n_features, N_CLASSES, preset, rng, weight_range=weight_range)
    return Readout(net=net, config=config, params=preset.receptor)


def train_readout(readout: Readout, features, labels, epochs: int, rng: np.random.Generator,
                  test_features=None, test_labels=None, learn_rate: float = 0.5,
                  batch: int = 20, stop_at_perfect: bool = True,
                  shuffle_rng: np.random.Generator | None = None) -> Readout:
    """Device-in-the-loop softmax readout.

    ``features`` are raw reservoir outputs; the min-max scaler is fitted on
    them and stored in the readout. Held-out accuracy is recorded after every
    epoch (training accuracy if no held-out set is given) and training stops
    at the first epoch reaching 100 % when ``stop_at_perfect``. A separate
    ``shuffle_rng`` fixes the batch order independently of device noise, so
    runs on different devices can be compared pairwise.
    """
    f = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if f.ndim != 2 or f.shape[1] != readout.net.n_in:
        raise ValueError(f"features must have shape (samples, {readout.net.n_in})")
    missing = set(range(N_CLASSES)) - set(np.unique(y).tolist())
    if missing:
        raise ValueError(f"classes absent from the training set: {sorted(missing)}")
    readout.scaler = FeatureScaler.fit(f)
    x = readout.scaler.transform(f)
    if test_features is not None:
        xt = readout.scaler.transform(test_features)
        yt = np.asarray(test_labels, dtype=np.int64)
    else:
        xt, yt = x, y
    readout.curve = []
    readout.first_perfect_epoch = None
    for epoch in range(1, epochs + 1):
        order = (shuffle_rng or rng).permutation(len(y))
        for s in range(0, len(y), batch):
            idx = order[s:s + batch]
            ann_train_step(readout.net, x[idx], y[idx], rng, learn_rate)
        acc = float(np.mean(predict(readout.net, xt, "ann", rng) == yt))
        readout.curve.append(acc)
        if acc >= 1.0 and readout.first_perfect_epoch is None:
            readout.first_perfect_epoch = epoch
            if stop_at_perfect:
                break
    return readout


def classify(record: EcgRecord, readout: Readout, rng=None) -> tuple[int, np.ndarray]:
    """Class index and per-class differential scores of one record."""
    if not readout.trained:
        raise ValueError("readout has not been trained")
    fv = reservoir_transform(record, readout.config, readout.params, readout.scaler)
    scores = readout.net.logits(fv.values, rng)
    return int(np.argmax(scores)), scores


def readout_confusion(readout: Readout, features, labels, rng=None) -> tuple[float, np.ndarray]:
    x = readout.scaler.transform(features)
    pred = predict(readout.net, x, "ann", rng)
    conf = confusion_matrix(labels, pred, N_CLASSES)
    return float(np.trace(conf) / len(labels)), conf
