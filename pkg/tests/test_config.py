import math

import pytest

from oectsim.config import Config, ConfigError, env_overrides, parse_assignment, parse_kv
from oectsim.devices import SynapseParams
from oectsim.presets import (DEVICE_SECTIONS, available_presets, canonical_name, load_preset,
                             preset_text)


def test_parse_kv_comments_and_blank_lines():
    text = "# header\ndevice.nu_p = 0.3  # note\n\n  device.n_states=64\n"
    assert parse_kv(text) == {"device.nu_p": "0.3", "device.n_states": "64"}


@pytest.mark.parametrize("text", ["device.nu_p 0.3", " = 4"])
def test_parse_kv_malformed(text):
    with pytest.raises(ConfigError):
        parse_kv(text)


def test_parse_assignment():
    assert parse_assignment("a.b = 3") == ("a.b", "3")
    with pytest.raises(ConfigError):
        parse_assignment("a.b")


def test_env_overrides_mapping():
    env = {"OECTSIM_DEVICE__NU_P": "0.4", "OECTSIM_BACKEND": "numpy", "HOME": "/",
           "OECTSIM_MNIST_DIR": "/data", "OECTSIM_NOSECTION": "1"}
    assert env_overrides(env) == {"device.nu_p": "0.4"}


def test_config_types_and_unknown_keys():
    cfg = Config({"device": SynapseParams})
    cfg.update_raw({"device.n_states": "64", "device.snr_write": "inf",
                    "device.discrete": "true"})
    p = cfg.section("device")
    assert p.n_states == 64 and math.isinf(p.snr_write) and p.discrete is True
    for bad in ({"device.bogus": "1"}, {"nosuch.key": "1"}, {"device.n_states": "6.5"},
                {"device.nu_p": "nan"}, {"device.discrete": "maybe"}):
        with pytest.raises(ConfigError):
            Config({"device": SynapseParams}).update_raw(bad)


def test_invalid_section_values_reported():
    cfg = Config({"device": SynapseParams}).update_raw({"device.g_min": "-1"})
    with pytest.raises(ConfigError):
        cfg.section("device")


def test_text_roundtrip():
    cfg = Config(DEVICE_SECTIONS).update_raw({"device.nu_p": "0.123456789012345678"})
    again = Config(DEVICE_SECTIONS).update_raw(parse_kv(cfg.to_text()))
    assert again.values == cfg.values


def test_presets_available():
    names = available_presets()
    for n in ("cv-OECT-200C", "cv-OECT-current", "RRAM-6bit", "ideal"):
        assert n in names


def test_preset_aliases_and_errors():
    assert canonical_name("rram") == "RRAM-6bit"
    assert canonical_name("CV-OECT-200C") == "cv-OECT-200C"
    with pytest.raises(ConfigError):
        canonical_name("pcm")


def test_preset_contents():
    cv = load_preset("cv-OECT-200C")
    assert cv.synapse.n_states == 1024
    assert (cv.synapse.nu_p, cv.synapse.nu_d) == (0.20, 1.63)
    assert cv.synapse.snr_write == 179 and cv.synapse.drift_gamma == 0.008
    assert load_preset("cv-OECT-current").synapse.snr_write == 110
    rram = load_preset("RRAM-6bit")
    assert rram.synapse.n_states == 64 and rram.synapse.discrete
    ideal = load_preset("ideal")
    assert math.isinf(ideal.synapse.snr_write) and ideal.xbar.read_cv == 0


def test_preset_overrides():
    p = load_preset("cv-OECT-200C", {"device.nu_p": 0.5})
    assert p.synapse.nu_p == 0.5
    with pytest.raises(ConfigError):
        load_preset("cv-OECT-200C", {"device.nup": 0.5})


def test_preset_files_only_use_known_keys():
    for name in available_presets():
        Config(DEVICE_SECTIONS).update_raw(parse_kv(preset_text(name)))
