from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oectsim.learning import (EncodedSample, Network, TrainConfig, ann_train_step,
                              build_network, confusion_matrix, encode_pulse_width, evaluate,
                              leak_weights, predict, snn_train_step, softmax, teacher_spikes,
                              train, weight_update_pulses)
from oectsim.mnist import load_mnist
from oectsim.presets import load_preset


@pytest.fixture(scope="module")
def tiny_mnist():
    from pathlib import Path
    return load_mnist(Path(__file__).parent / "data" / "mnist")


def quiet_preset(n_states=1024):
    p = load_preset("ideal")
    return replace(p, synapse=replace(p.synapse, n_states=n_states))


# ---------------------------------------------------------------- encoding

def test_pulse_width_encoding():
    s = encode_pulse_width([1.0, 0.0, 0.5], label=3)
    np.testing.assert_allclose(s.widths, [0.1, 0.0, 0.05])
    assert s.label == 3


@pytest.mark.parametrize("bad", [[1.2], [-0.1], [np.nan]])
def test_encoding_rejects(bad):
    with pytest.raises(ValueError):
        encode_pulse_width(bad)
    with pytest.raises(ValueError):
        EncodedSample(widths=np.array([0.2]))


def test_train_config_validation():
    for kw in (dict(epochs=0), dict(batch=0), dict(mode="rnn"), dict(learn_rate=-1)):
        with pytest.raises(ValueError):
            TrainConfig(**kw)
    assert TrainConfig(learn_rate=1.0, lr_decay=1.0).rate(3) == pytest.approx(1 / 3)


def test_leak_weights():
    # full-width pulse integrates 1 - exp(-T/tau); zero width contributes nothing
    assert leak_weights(0.0, 0.1, 0.1) == 0.0
    assert leak_weights(0.1, 0.1, 0.1) == pytest.approx(1 - np.exp(-1.0))
    w = leak_weights(np.linspace(0, 0.1, 11), 0.1, 0.1)
    assert np.all(np.diff(w) > 0)


# ---------------------------------------------------------------- network

def test_network_shape_check(rng):
    net = build_network(4, 3, "cv-OECT-200C", rng)
    assert net.xbar.shape == (4, 6)
    with pytest.raises(ValueError):
        Network(xbar=net.xbar, n_in=4, n_out=2)


def test_weights_start_at_zero(rng):
    net = build_network(5, 2, quiet_preset(), rng)
    np.testing.assert_array_equal(net.weights(), 0.0)


@given(w=st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_weight_mapping_roundtrip(w):
    """Software weights map into the device range and back within half a gap."""
    rng = np.random.default_rng(0)
    net = build_network(3, 2, quiet_preset(), rng)
    target_w = np.array(w).reshape(3, 2)
    n = np.rint(target_w * net.span / (2 * net.weight_range * net.pulse_gap))
    from oectsim.learning import apply_pair_pulses
    apply_pair_pulses(net, n, rng)
    gap_w = 2 * net.weight_range * net.xbar.synapse.state_gap / net.span
    assert np.all(np.abs(net.weights() - target_w) <= gap_w)
    g = net.xbar.conductances
    assert np.all(g >= net.xbar.synapse.g_min) and np.all(g <= net.xbar.synapse.g_max)


def test_identity_toy_task(rng):
    net = build_network(4, 4, quiet_preset(), rng, weight_range=1.0)
    from oectsim.learning import apply_pair_pulses
    n = np.eye(4) * 200
    apply_pair_pulses(net, n, rng)
    acc, conf = evaluate(net, np.eye(4), np.arange(4))
    assert acc == 1.0
    np.testing.assert_array_equal(conf, np.eye(4, dtype=int))


# ---------------------------------------------------------------- ANN

def test_zero_update_zero_pulses(rng):
    net = build_network(6, 3, "cv-OECT-200C", rng)
    assert np.all(weight_update_pulses(net, np.zeros((6, 3)), rng) == 0)
    x = rng.random((4, 6))
    before = net.xbar.conductances.copy()
    _, pulses = ann_train_step(net, x, np.array([0, 1, 2, 0]), rng, learn_rate=0.0)
    assert pulses == 0
    np.testing.assert_array_equal(net.xbar.conductances, before)


def test_stochastic_rounding_unbiased(rng):
    net = build_network(1, 1, "cv-OECT-200C", rng)
    dw = np.full((1, 1), 0.3 * 2 * net.pulse_gap / net.span)  # 0.3 pulses
    n = np.array([weight_update_pulses(net, dw, rng)[0, 0] for _ in range(20000)])
    assert set(np.unique(n)) <= {0.0, 1.0}
    assert n.mean() == pytest.approx(0.3, abs=0.015)


def test_ann_matches_float_reference(tiny_mnist):
    """Ideal devices reproduce a floating-point softmax trained on the same batches."""
    train_set, test_set = tiny_mnist
    net = build_network(784, 10, "ideal", np.random.default_rng(0))
    w = np.zeros((784, 10))
    order_rng, rng = np.random.default_rng(1), np.random.default_rng(2)
    lr, batch = 0.5, 10
    for _ in range(5):
        order = order_rng.permutation(len(train_set))
        for s in range(0, len(order), batch):
            i = order[s:s + batch]
            x = train_set.images[i].astype(float)
            y = train_set.labels[i]
            ann_train_step(net, x, y, rng, lr)
            p = softmax(x @ w)
            p[np.arange(len(i)), y] -= 1
            w = np.clip(w - lr * x.T @ p / len(i), -1, 1)
        dev, _ = evaluate(net, test_set.images, test_set.labels)
        ref = float(np.mean(np.argmax(test_set.images @ w, 1) == test_set.labels))
        assert abs(dev - ref) <= 0.01
        assert np.abs(net.weights() - w).max() < 1e-4


def test_input_validation(rng):
    net = build_network(3, 2, "cv-OECT-200C", rng)
    with pytest.raises(ValueError):
        ann_train_step(net, np.ones((2, 4)), np.array([0, 1]), rng)
    with pytest.raises(ValueError):
        ann_train_step(net, np.ones((2, 3)), np.array([0, 2]), rng)
    with pytest.raises(ValueError):
        evaluate(net, np.ones((0, 3)), np.array([], dtype=int))


# ---------------------------------------------------------------- SNN

def test_zero_widths_change_nothing(rng):
    net = build_network(5, 3, "cv-OECT-200C", rng)
    before = net.xbar.conductances.copy()
    out = snn_train_step(net, encode_pulse_width(np.zeros(5)), 1, rng)
    assert np.all(out == 0)
    np.testing.assert_array_equal(net.xbar.conductances, before)


def test_hebbian_potentiation():
    """An input repeatedly paired with a teacher strengthens their synapse."""
    rng = np.random.default_rng(0)
    net = build_network(4, 3, quiet_preset(), rng)
    sample = encode_pulse_width([1.0, 0.0, 0.0, 0.0])
    g0 = net.xbar.conductances[0, 2]
    trace = [g0]
    for _ in range(10):
        snn_train_step(net, sample, 2, rng)
        trace.append(net.xbar.conductances[0, 2])
    assert trace[-1] > g0
    assert np.all(np.diff(trace) >= 0)
    # the inactive rows are untouched
    assert np.all(net.xbar.conductances[1:] == g0)


def test_teacher_fixed_point():
    """Once the teacher leads, presentations stop changing the weights."""
    rng = np.random.default_rng(0)
    net = build_network(3, 4, quiet_preset(), rng)
    sample = encode_pulse_width([0.8, 0.0, 0.0])
    gap = net.xbar.synapse.state_gap
    for _ in range(30):
        snn_train_step(net, sample, 1, rng)
    y = net.integrated(sample.widths)
    assert np.argmax(y) == 1
    before = net.xbar.conductances.copy()
    for _ in range(5):
        snn_train_step(net, sample, 1, rng)
    assert np.abs(net.xbar.conductances - before).max() < gap


@given(seed=st.integers(0, 2**31), teacher=st.integers(0, 2))
def test_teacher_spikes_move_the_right_way(seed, teacher):
    rng = np.random.default_rng(seed)
    net = build_network(6, 3, quiet_preset(), rng)
    g = net.xbar.synapse.g_min + rng.random(net.xbar.shape) * net.xbar.synapse.span
    net.xbar.g[:] = g.ravel()
    net.xbar.level[:] = net.xbar.g
    sample = encode_pulse_width(rng.random(6))
    y = net.integrated(sample.widths)
    cols, amps = teacher_spikes(y, teacher, 0.1, net)
    snn_train_step(net, sample, teacher, rng)
    dg = net.xbar.conductances - g
    for c, a in zip(cols, amps):
        if a < 0:   # set
            assert np.all(dg[:, c] >= 0)
        else:       # reset
            assert np.all(dg[:, c] <= 0)
    untouched = [c for c in range(6) if c not in cols]
    assert np.all(dg[:, untouched] == 0)


def test_snn_rejects_bad_arguments(rng):
    net = build_network(3, 2, "cv-OECT-200C", rng)
    with pytest.raises(ValueError):
        snn_train_step(net, encode_pulse_width([0.1, 0.2]), 0, rng)
    with pytest.raises(ValueError):
        snn_train_step(net, encode_pulse_width([0.1, 0.2, 0.3]), 2, rng)


# ---------------------------------------------------------------- loop

def test_confusion_matrix():
    conf = confusion_matrix([0, 1, 1, 2], [0, 1, 0, 2], 3)
    np.testing.assert_array_equal(conf, [[1, 0, 0], [1, 1, 0], [0, 0, 1]])


@pytest.mark.parametrize("mode", ["ann", "snn"])
def test_training_is_deterministic(tiny_mnist, mode):
    train_set, test_set = tiny_mnist
    cfg = TrainConfig(mode=mode, epochs=2, batch=20, learn_rate=0.2 if mode == "ann" else 0.5)
    results = []
    for _ in range(2):
        rng = np.random.default_rng(7)
        net = build_network(784, 10, "cv-OECT-200C", rng)
        r = train(net, train_set.images, train_set.labels, test_set.images, test_set.labels,
                  cfg, rng)
        results.append((net.xbar.conductances.copy(), r.final_accuracy))
    np.testing.assert_array_equal(results[0][0], results[1][0])
    assert results[0][1] == results[1][1]


def test_training_learns_something(tiny_mnist):
    train_set, test_set = tiny_mnist
    rng = np.random.default_rng(0)
    net = build_network(784, 10, "cv-OECT-200C", rng)
    logs = []
    r = train(net, train_set.images, train_set.labels, test_set.images, test_set.labels,
              TrainConfig(mode="ann", epochs=3, batch=10, learn_rate=0.5), rng, logs.append)
    assert len(logs) == 3 and r.final_accuracy > 0.5
    assert r.confusion.sum() == len(test_set)
    pred = predict(net, test_set.images)
    assert pred.shape == (100,)
