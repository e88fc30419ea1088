import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oectsim.devices import ReceptorParams, gate_drive, state_conductance
from oectsim.ecg import (CLASS_TABLE, N_CLASSES, N_LEADS, EcgNoise, EcgRecord,
                         generate_synthetic_ecg, r_peaks, read_ecg_csv, synthetic_dataset,
                         write_ecg_csv)
from oectsim.reservoir import (FeatureScaler, ReservoirConfig, build_readout, classify,
                               readout_confusion, reservoir_transform, sample_indices,
                               train_readout, transform_many)

P = ReceptorParams()
CFG = ReservoirConfig()
FS = 250.0
N = int(CFG.window * FS)


def baseline_feature():
    return CFG.v_ds * float(state_conductance(gate_drive(CFG.v_bias, P), P))


# ---------------------------------------------------------------- generator

def test_record_validation():
    with pytest.raises(ValueError):
        EcgRecord(np.zeros((11, 500)), FS)
    with pytest.raises(ValueError):
        EcgRecord(np.zeros((12, 500)), FS, label=5)
    with pytest.raises(ValueError):
        EcgRecord(np.zeros((12, 500)), 0.0)
    with pytest.raises(ValueError):
        generate_synthetic_ecg(7)


def test_same_seed_same_record():
    a = generate_synthetic_ecg(2, seed=9)
    b = generate_synthetic_ecg(2, seed=9)
    np.testing.assert_array_equal(a.leads, b.leads)
    assert not np.array_equal(a.leads, generate_synthetic_ecg(2, seed=10).leads)


def test_noise_free_record_is_periodic():
    rec = generate_synthetic_ecg(0, seed=1, sample_rate=360.0, duration=4.0,
                                 noise=EcgNoise.off())
    period = 300  # 60/72 s at 360 Hz
    diff = np.abs(rec.leads[:, period:] - rec.leads[:, :-period]).max()
    assert diff < 1e-12 * np.abs(rec.leads).max()
    peaks = r_peaks(rec.leads[1], 360.0)
    assert np.all(np.diff(peaks) == period)


def test_tachycardia_rr_ratio():
    def mean_rr(label):
        rec = generate_synthetic_ecg(label, 0, duration=8.0, noise=EcgNoise.off())
        return np.diff(r_peaks(rec.leads[1], FS)).mean() / FS
    ratio = mean_rr(0) / mean_rr(1)
    assert ratio == pytest.approx(CLASS_TABLE[1]["bpm"] / CLASS_TABLE[0]["bpm"], rel=0.01)
    assert mean_rr(2) > mean_rr(0)


def test_dataset_balanced_and_seeded():
    recs = synthetic_dataset(3, seed=4)
    assert [r.label for r in recs] == [0, 1, 2, 3, 4] * 3
    again = synthetic_dataset(3, seed=4)
    assert all(np.array_equal(a.leads, b.leads) for a, b in zip(recs, again))


def test_csv_roundtrip(tmp_path):
    rec = generate_synthetic_ecg(4, seed=3)
    write_ecg_csv(rec, tmp_path / "r.csv")
    back = read_ecg_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(back.leads, rec.leads)
    assert back.sample_rate == rec.sample_rate and back.label == 4


# ---------------------------------------------------------------- reservoir

def test_config_validation():
    with pytest.raises(ValueError):
        ReservoirConfig(n_virtual=0)
    with pytest.raises(ValueError):
        ReservoirConfig(window=0.0)


def test_sample_indices():
    idx = sample_indices(CFG, FS)
    assert len(idx) == 13 and idx[-1] == N - 1
    assert np.all(np.diff(idx) > 0)


def test_zero_signal_gives_baseline():
    f = reservoir_transform(EcgRecord(np.zeros((12, N)), FS)).values
    assert f.shape == (156,)
    np.testing.assert_allclose(f, baseline_feature(), rtol=1e-14)


@pytest.mark.parametrize("lead, volts", [(0, 1e-3), (7, -2e-3)])
def test_step_response_matches_closed_form(lead, volts):
    leads = np.zeros((12, N))
    leads[lead, 1:] = volts
    f = reservoir_transform(EcgRecord(leads, FS)).values.reshape(12, 13)
    u0 = float(gate_drive(CFG.v_bias, P))
    u1 = float(gate_drive(CFG.v_bias - CFG.input_gain * volts, P))
    tau = P.tau_on if u1 > u0 else P.tau_off
    steps = sample_indices(CFG, FS)            # samples since the step
    x = u1 + (u0 - u1) * np.exp(-steps / FS / tau)
    want = CFG.v_ds * state_conductance(x, P)
    np.testing.assert_allclose(f[lead], want, rtol=1e-12)
    others = np.delete(f, lead, axis=0)
    np.testing.assert_allclose(others, baseline_feature(), rtol=1e-14)


@given(seed=st.integers(0, 2**31))
def test_lead_permutation_permutes_blocks(seed):
    rng = np.random.default_rng(seed)
    rec = generate_synthetic_ecg(int(rng.integers(5)), seed=seed)
    perm = rng.permutation(12)
    f = reservoir_transform(rec).values.reshape(12, 13)
    g = reservoir_transform(EcgRecord(rec.leads[perm], FS)).values.reshape(12, 13)
    np.testing.assert_array_equal(g, f[perm])


def test_fading_memory_last_node():
    """Records sharing the final 5 max(tau) produce the same final samples."""
    a = generate_synthetic_ecg(0, 1)
    b = generate_synthetic_ecg(3, 2)
    tail = int(math.ceil(5 * max(P.tau_on, P.tau_off) * FS))
    mixed = b.leads.copy()
    mixed[:, N - tail - 1:] = a.leads[:, N - tail - 1:]
    fa = reservoir_transform(a).values.reshape(12, 13)[:, -1]
    fb = reservoir_transform(EcgRecord(mixed, FS)).values.reshape(12, 13)[:, -1]
    np.testing.assert_allclose(fb, fa, rtol=0.01)


def test_short_record_rejected():
    with pytest.raises(ValueError):
        reservoir_transform(EcgRecord(np.zeros((12, 100)), FS))


def test_scaler_range_and_leakage():
    rng = np.random.default_rng(0)
    train = rng.random((20, 5))
    s = FeatureScaler.fit(train)
    out = s.transform(train)
    assert out.min() == 0.0 and out.max() == 1.0
    assert np.all(s.transform(train * 3) <= 1.0)
    with pytest.raises(ValueError):
        FeatureScaler.fit(np.zeros((0, 5)))


# ---------------------------------------------------------------- readout

@pytest.fixture(scope="module")
def ecg_features():
    train = synthetic_dataset(40, seed=1)
    test = synthetic_dataset(20, seed=2)
    return (transform_many(train), np.array([r.label for r in train]),
            transform_many(test), np.array([r.label for r in test]), train)


def test_readout_shape(rng):
    r = build_readout("cv-OECT-200C", rng)
    assert r.net.xbar.shape == (156, 10)


def test_single_class_rejected(rng):
    r = build_readout("cv-OECT-200C", rng)
    with pytest.raises(ValueError):
        train_readout(r, np.ones((10, 156)), np.zeros(10, int), 5, rng)


def test_untrained_readout_refuses(rng):
    with pytest.raises(ValueError):
        classify(generate_synthetic_ecg(0), build_readout("cv-OECT-200C", rng), rng)


def test_separable_features_learned(rng):
    x = np.repeat(np.eye(5), 4, axis=0)
    x = np.hstack([x, np.zeros((20, 151))])
    y = np.repeat(np.arange(5), 4)
    r = build_readout("cv-OECT-200C", rng)
    train_readout(r, x, y, 700, rng)
    assert r.first_perfect_epoch is not None and r.first_perfect_epoch <= 700


def test_end_to_end(ecg_features):
    ftr, ytr, fte, yte, train_recs = ecg_features
    rng = np.random.default_rng(0)
    r = build_readout("cv-OECT-200C", rng)
    train_readout(r, ftr, ytr, 700, rng, fte, yte, learn_rate=0.2, batch=20)
    acc, conf = readout_confusion(r, fte, yte)
    assert acc >= 0.95
    for i in range(N_CLASSES):
        assert conf[i, i] > conf[i].sum() - conf[i, i]
    # the scaler comes from the training features only
    ref = FeatureScaler.fit(ftr)
    np.testing.assert_array_equal(r.scaler.lo, ref.lo)
    np.testing.assert_array_equal(r.scaler.hi, ref.hi)
    # memorization: training records come back with their own labels
    for rec in train_recs[:10]:
        assert classify(rec, r)[0] == rec.label
    zero = EcgRecord(np.zeros((12, N)), FS)
    assert np.array_equal(classify(zero, r)[1], classify(zero, r)[1])


def test_ideal_not_worse_than_device(ecg_features):
    """Paired over seeds, the ideal device never trails the real one significantly."""
    ftr, ytr, fte, yte, _ = ecg_features
    epochs = 40
    curves = {}
    for preset in ("ideal", "cv-OECT-200C"):
        runs = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            r = build_readout(preset, rng)
            train_readout(r, ftr, ytr, epochs, rng, fte, yte, learn_rate=0.2, batch=20,
                          stop_at_perfect=False, shuffle_rng=np.random.default_rng(100 + seed))
            runs.append(r.curve)
        curves[preset] = np.array(runs)
    diff = curves["ideal"] - curves["cv-OECT-200C"]
    se = diff.std(axis=0, ddof=1) / np.sqrt(diff.shape[0])
    assert np.all(diff.mean(axis=0) >= -2 * se - 1e-12)
