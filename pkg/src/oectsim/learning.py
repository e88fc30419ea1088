"""Single-layer classifiers trained on a 1T1R crossbar.

Both networks use differential pairs: logical output ``k`` reads columns
``k`` (positive) and ``k + n_out`` (negative) and its weight from input ``i``
is ``weight_range * (G+ - G-) / (g_max - g_min)``.

* ANN: inputs are read voltages, outputs go through a softmax. Weight
  updates are computed in software and written with parallel write-verify.
* SNN: inputs become pre-spikes whose width encodes intensity; each output
  leaky-integrates its column current over the spike window. A teacher rule
  decides which columns receive set/reset post-spikes, and the weight change
  itself comes from the 1T1R timing mechanism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .crossbar import Crossbar, mvm, program_parallel, stdp_program_arrays
from .presets import Preset, load_preset


@dataclass(frozen=True)
class TrainConfig:
    """Training schedule.

    ``learn_rate`` is the SGD step for the ANN; for the SNN it scales the
    post-spike width (1.0 means the nominal 2 ms). In epoch ``e`` (from 1)
    the rate is ``learn_rate / (1 + lr_decay * (e - 1))``.
    """

    mode: str = "ann"
    epochs: int = 5
    batch: int = 100
    learn_rate: float = 0.1
    teacher_margin: float = 0.1
    device_preset: str = "cv-OECT-200C"
    seed: int = 0
    lr_decay: float = 0.0

    def rate(self, epoch: int) -> float:
        return self.learn_rate / (1.0 + self.lr_decay * (epoch - 1))

    def __post_init__(self):
        if self.mode not in ("ann", "snn"):
            raise ValueError("mode must be 'ann' or 'snn'")
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be >= 1")
        if self.learn_rate < 0 or self.teacher_margin < 0 or self.lr_decay < 0:
            raise ValueError("learn_rate, teacher_margin and lr_decay must be >= 0")


@dataclass(frozen=True)
class EncodedSample:
    """Pulse widths (seconds) of one input pattern and its label."""

    widths: np.ndarray
    label: int = -1
    w_max: float = 0.1

    def __post_init__(self):
        w = np.asarray(self.widths, dtype=float)
        if np.any(w < 0) or np.any(w > self.w_max * (1 + 1e-12)):
            raise ValueError("pulse widths must lie in [0, w_max]")


def encode_pulse_width(pixels, w_max: float = 0.1, label: int = -1) -> EncodedSample:
    """Map intensities in [0, 1] to pre-spike widths ``intensity * w_max``."""
    x = np.asarray(pixels, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise ValueError("intensities must lie in [0, 1]")
    return EncodedSample(widths=x * w_max, label=int(label), w_max=w_max)


@dataclass
class Network:
    """Crossbar plus the wiring and encoding constants of a single-layer net."""

    xbar: Crossbar
    n_in: int
    n_out: int
    weight_range: float = 1.0
    window: float = 0.1          # spike window and maximum pulse width (s)
    tau_leak: float = 0.1        # output integrator leak (s)
    v_pre: float = -0.8
    v_set: float = -2.0
    v_reset: float = 2.0
    post_width: float = 0.002
    slack_pulses: int = 4

    def __post_init__(self):
        if self.xbar.shape != (self.n_in, 2 * self.n_out):
            raise ValueError("crossbar must be n_in x (2 * n_out)")

    @property
    def span(self) -> float:
        return self.xbar.synapse.span

    @property
    def pulse_gap(self) -> float:
        """Nominal conductance change of one write pulse."""
        return self.span / self.xbar.synapse.n_pulses

    def weights(self, g=None) -> np.ndarray:
        g = self.xbar.conductances if g is None else g
        return self.weight_range * (g[:, :self.n_out] - g[:, self.n_out:]) / self.span

    def logits(self, x, rng=None) -> np.ndarray:
        cur = mvm(self.xbar, x, rng)
        diff = cur[..., :self.n_out] - cur[..., self.n_out:]
        return self.weight_range * diff / (self.xbar.config.v_read * self.span)

    def integrated(self, widths, rng=None) -> np.ndarray:
        """Leaky-integrated differential output charge for pre-spike ``widths``."""
        return self.logits(leak_weights(widths, self.window, self.tau_leak), rng)


def build_network(n_in: int, n_out: int, preset: Preset | str = "cv-OECT-200C",
                  rng: np.random.Generator | None = None, **kwargs) -> Network:
    """Create a differential network with every synapse at mid-rail."""
    if isinstance(preset, str):
        preset = load_preset(preset)
    sp = preset.synapse
    xbar = Crossbar(n_in, 2 * n_out, sp, preset.receptor, preset.xbar, rng=rng)
    xbar.g[:] = 0.5 * (xbar.g_min + xbar.g_max)
    xbar.level[:] = xbar.g
    return Network(xbar=xbar, n_in=n_in, n_out=n_out, **kwargs)


def leak_weights(widths, window: float, tau_leak: float) -> np.ndarray:
    """Contribution at the window end of a unit current lasting ``widths`` from t = 0.

    ``tau * (exp(-(T - w) / tau) - exp(-T / tau))``, normalized by ``tau``.
    """
    w = np.asarray(widths, dtype=float)
    return np.exp(-(window - w) / tau_leak) - math.exp(-window / tau_leak)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], 1e-300))))


def _check_inputs(net: Network, x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[1] != net.n_in:
        raise ValueError(f"inputs must have shape (batch, {net.n_in})")
    if y.shape != (x.shape[0],):
        raise ValueError("one label per input row")
    if np.any(y < 0) or np.any(y >= net.n_out):
        raise ValueError("label out of range")
    return x, y


def ann_gradient(net: Network, x, y, rng=None):
    """Softmax cross-entropy loss and weight gradient from a (noisy) forward pass."""
    p = softmax(net.logits(x, rng))
    loss = cross_entropy(p, y)
    p[np.arange(len(y)), y] -= 1.0
    return loss, x.T @ p / len(y)


def weight_update_pulses(net: Network, delta_w, rng: np.random.Generator) -> np.ndarray:
    """Signed pulse counts per differential pair for a weight change.

    Half of the change goes to each device of the pair. The count is
    stochastically rounded so that its expectation is exact.
    """
    c = np.asarray(delta_w, dtype=float) * net.span / (2.0 * net.weight_range * net.pulse_gap)
    return np.floor(c + rng.random(c.shape))


def apply_pair_pulses(net: Network, n, rng: np.random.Generator):
    """Write ``n`` (n_in x n_out) signed pulses, +n on G+ and -n on G-, with write-verify."""
    n_both = np.concatenate([n, -n], axis=1)
    mask = n_both != 0
    if not mask.any():
        return None
    g_read = net.xbar.read(rng)
    target = g_read + n_both * net.pulse_gap
    return program_parallel(net.xbar, target, np.abs(n_both) + net.slack_pulses, rng, mask=mask)


def ann_train_step(net: Network, x, y, rng: np.random.Generator,
                   learn_rate: float = 0.1) -> tuple[float, float]:
    """One device-in-the-loop SGD step; returns (batch loss, pulses issued)."""
    x, y = _check_inputs(net, x, y)
    loss, grad = ann_gradient(net, np.asarray(x, dtype=float), y, rng)
    n = weight_update_pulses(net, -learn_rate * grad, rng)
    report = apply_pair_pulses(net, n, rng)
    return loss, (0.0 if report is None else report.total_pulses)


def snn_train_step(net: Network, sample: EncodedSample, teacher: int,
                   rng: np.random.Generator, margin: float = 0.1,
                   width_scale: float = 1.0, rule: str = "all") -> np.ndarray:
    """Present one sample and apply the supervised STDP rule.

    T activations are reset to their baseline, the sample is integrated, and
    :func:`teacher_spikes` picks the post-spikes: a set on the positive and a
    reset on the negative column of an under-firing teacher, the opposite
    pair on over-firing outputs. ``width_scale`` stretches the post-spikes
    and so acts as the pulse budget. Returns the signed equivalent pulses
    applied, shape (rows, cols).
    """
    widths = np.asarray(sample.widths, dtype=float)
    if widths.shape != (net.n_in,):
        raise ValueError(f"sample must have {net.n_in} widths")
    if not 0 <= teacher < net.n_out:
        raise ValueError("teacher out of range")
    xbar = net.xbar
    xbar.x[:] = xbar.t_baseline
    y = net.integrated(widths, rng)
    cols, amps = teacher_spikes(y, teacher, margin, net, rule)
    if not cols or not np.any(widths > 0):
        return np.zeros(xbar.shape)
    n = len(cols)
    return stdp_program_arrays(
        xbar, np.zeros(net.n_in), widths, np.full(net.n_in, net.v_pre),
        np.array(cols), np.array(amps), np.full(n, net.window),
        np.full(n, net.post_width * width_scale), rng)


def teacher_spikes(y: np.ndarray, teacher: int, margin: float, net: Network,
                   rule: str = "all"):
    """Columns and amplitudes of the post-spikes chosen by the teacher rule.

    An output fires when it exceeds ``theta = median + margin * spread``
    with ``spread = max - min``. The teacher counts as firing correctly only
    if it also leads every other output by ``margin * spread``. A non-teacher
    over-fires when it fires and comes within ``margin * spread`` of the
    teacher; with ``rule="top"`` only the strongest such output is reset.
    """
    spread = y.max() - y.min()
    theta = np.median(y) + margin * spread
    others = np.delete(y, teacher)
    cols, amps = [], []
    k = net.n_out
    if y[teacher] <= max(theta, others.max() + margin * spread):
        cols += [teacher, teacher + k]
        amps += [net.v_set, net.v_reset]
    over = [j for j in np.flatnonzero((y > theta) & (y >= y[teacher] - margin * spread))
            if j != teacher]
    if rule == "top" and over:
        over = [max(over, key=lambda j: y[j])]
    for j in over:
        cols += [int(j), int(j) + k]
        amps += [net.v_reset, net.v_set]
    return cols, amps


def predict(net: Network, x, mode: str = "ann", rng=None, batch: int = 2000) -> np.ndarray:
    """Argmax class per input; ties go to the lowest index."""
    x = np.asarray(x)
    out = np.empty(len(x), dtype=np.int64)
    for s in range(0, len(x), batch):
        xb = np.asarray(x[s:s + batch], dtype=float)
        scores = net.logits(xb, rng) if mode == "ann" else net.integrated(xb * net.window, rng)
        out[s:s + batch] = np.argmax(scores, axis=1)
    return out


def evaluate(net: Network, x, y, mode: str = "ann", rng=None) -> tuple[float, np.ndarray]:
    """Accuracy and confusion matrix (rows: true class, cols: predicted)."""
    x, y = _check_inputs(net, x, y)
    if len(y) == 0:
        raise ValueError("empty test set")
    pred = predict(net, x, mode, rng)
    conf = confusion_matrix(y, pred, net.n_out)
    return float(np.trace(conf) / len(y)), conf


def confusion_matrix(y, pred, n_classes: int) -> np.ndarray:
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (np.asarray(y), np.asarray(pred)), 1)
    return conf


@dataclass
class EpochLog:
    epoch: int
    loss: float
    train_acc: float
    test_acc: float


@dataclass
class TrainResult:
    history: list[EpochLog] = field(default_factory=list)
    confusion: np.ndarray | None = None

    @property
    def final_accuracy(self) -> float:
        return self.history[-1].test_acc if self.history else float("nan")


def train(net: Network, x_train, y_train, x_test, y_test, config: TrainConfig,
          rng: np.random.Generator,
          on_epoch: Callable[[EpochLog], None] | None = None) -> TrainResult:
    """Run the configured schedule, evaluating on the test set after every epoch.

    Training accuracy is measured on the fly from the forward passes that
    drive the updates. Samples are reshuffled every epoch.
    """
    x_train, y_train = _check_inputs(net, x_train, y_train)
    x_test, y_test = _check_inputs(net, x_test, y_test)
    result = TrainResult()
    n = len(y_train)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        rate = config.rate(epoch)
        losses, correct = [], 0
        if config.mode == "ann":
            for s in range(0, n, config.batch):
                idx = order[s:s + config.batch]
                xb = np.asarray(x_train[idx], dtype=float)
                loss, _ = ann_train_step(net, xb, y_train[idx], rng, rate)
                losses.append(loss * len(idx))
        else:
            for i in order:
                sample = encode_pulse_width(x_train[i], net.window)
                y_out = net.integrated(sample.widths)
                correct += int(np.argmax(y_out) == y_train[i])
                snn_train_step(net, sample, int(y_train[i]), rng, config.teacher_margin, rate)
        if config.mode == "ann":
            train_acc, _ = evaluate(net, x_train[order[:min(n, 10000)]],
                                    y_train[order[:min(n, 10000)]], "ann")
            loss = float(np.sum(losses) / n)
        else:
            train_acc, loss = correct / n, float("nan")
        test_acc, conf = evaluate(net, x_test, y_test, config.mode, rng)
        log = EpochLog(epoch, loss, train_acc, test_acc)
        result.history.append(log)
        result.confusion = conf
        if on_epoch:
            on_epoch(log)
    return result
