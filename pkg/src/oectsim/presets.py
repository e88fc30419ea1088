"""Named device calibrations shipped as ``presets/<name>.txt``.

Preset files use the flat ``namespace.field = value`` format of
:mod:`oectsim.config` with the namespaces

``device``    synapse (non-volatile mode), :class:`~oectsim.devices.SynapseParams`
``receptor``  receptor (volatile mode), :class:`~oectsim.devices.ReceptorParams`
``stdp``      phenomenological STDP window, :class:`~oectsim.devices.StdpParams`
``xbar``      1T1R circuit settings, :class:`~oectsim.crossbar.CrossbarConfig`
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .config import Config, ConfigError, parse_kv
from .crossbar import CrossbarConfig
from .devices import ReceptorParams, StdpParams, SynapseParams

DEVICE_SECTIONS = {
    "device": SynapseParams,
    "receptor": ReceptorParams,
    "stdp": StdpParams,
    "xbar": CrossbarConfig,
}

ALIASES = {"cv-oect": "cv-OECT-200C", "rram": "RRAM-6bit"}
DEFAULT_PRESET = "cv-OECT-200C"


@dataclass(frozen=True)
class Preset:
    name: str
    synapse: SynapseParams
    receptor: ReceptorParams
    stdp: StdpParams
    xbar: CrossbarConfig


def available_presets() -> list[str]:
    files = resources.files(__package__).joinpath("presets").iterdir()
    return sorted(f.name[:-4] for f in files if f.name.endswith(".txt"))


def canonical_name(name: str) -> str:
    name = ALIASES.get(name.lower(), name)
    for known in available_presets():
        if known.lower() == name.lower():
            return known
    raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available_presets())}")


def preset_text(name: str) -> str:
    path = resources.files(__package__).joinpath("presets", canonical_name(name) + ".txt")
    return path.read_text()


def apply_preset(config: Config, name: str) -> Config:
    """Layer the preset's values onto ``config`` (must contain the device namespaces)."""
    canon = canonical_name(name)
    return config.update_raw(parse_kv(preset_text(canon), source=f"preset {canon}"),
                             source=f"preset {canon}")


def preset_from_config(config: Config, name: str = "custom") -> Preset:
    return Preset(
        name=name,
        synapse=config.section("device"),
        receptor=config.section("receptor"),
        stdp=config.section("stdp"),
        xbar=config.section("xbar"),
    )


def load_preset(name: str = DEFAULT_PRESET, overrides: dict[str, str] | None = None) -> Preset:
    """Load a named preset, optionally overriding individual keys.

    >>> load_preset("RRAM-6bit").synapse.n_states
    64
    """
    cfg = apply_preset(Config(DEVICE_SECTIONS), name)
    if overrides:
        cfg.update_raw({k: str(v) for k, v in overrides.items()})
    return preset_from_config(cfg, canonical_name(name))
