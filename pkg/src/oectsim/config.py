"""Flat ``key = value`` configuration with dotted namespaces.

Each namespace maps onto a frozen dataclass; keys are that dataclass's
fields. Values are layered as

    dataclass defaults < preset file < environment < explicit overrides

Environment overrides use ``OECTSIM_<NAMESPACE>__<FIELD>`` (a double
underscore stands for the dot), e.g. ``OECTSIM_DEVICE__NU_P=0.3``. Unknown keys
are always an error.
"""

from __future__ import annotations

import dataclasses
import math
import os
import types
import typing
from typing import Any, Mapping

ENV_PREFIX = "OECTSIM_"
_RESERVED_ENV = {"OECTSIM_BACKEND", "OECTSIM_MNIST_DIR"}


class ConfigError(ValueError):
    """Malformed configuration text, unknown key or bad value."""


def parse_kv(text: str, source: str = "<text>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def parse_assignment(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    """Collect ``OECTSIM_NS__FIELD`` variables as dotted keys."""
    env = os.environ if environ is None else environ
    out = {}
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX) or name in _RESERVED_ENV:
            continue
        body = name[len(ENV_PREFIX):]
        if "__" not in body:
            continue
        out[body.lower().replace("__", ".")] = value
    return out


def _coerce(raw: str, hint: Any, key: str):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if raw.lower() in ("none", "null", ""):
            return None
        return _coerce(raw, args[0], key)
    try:
        if hint is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        if hint is float:
            value = float(raw)
            if math.isnan(value):
                raise ValueError(raw)
            return value
        if hint is str:
            return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} is not a valid {hint.__name__}") from None
    raise ConfigError(f"unsupported field type for {key}: {hint!r}")


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Config:
    """Resolved configuration: typed values for every registered key."""

    def __init__(self, sections: Mapping[str, type], values: Mapping[str, Any] | None = None):
        self.sections = dict(sections)
        self._hints = {ns: typing.get_type_hints(cls) for ns, cls in self.sections.items()}
        self.values: dict[str, Any] = {}
        for ns, cls in self.sections.items():
            for f in dataclasses.fields(cls):
                if f.default is not dataclasses.MISSING:
                    default = f.default
                elif f.default_factory is not dataclasses.MISSING:
                    default = f.default_factory()
                else:
                    default = None
                self.values[f"{ns}.{f.name}"] = default
        if values:
            self.update_raw({k: format_value(v) for k, v in values.items()})

    def _hint(self, key: str):
        ns, _, name = key.partition(".")
        if ns not in self.sections or name not in self._hints[ns]:
            raise ConfigError(f"unknown configuration key {key!r}")
        return self._hints[ns][name]

    def update_raw(self, items: Mapping[str, str], source: str = "override") -> "Config":
        for key, raw in items.items():
            hint = self._hint(key)
            self.values[key] = _coerce(raw, hint, f"{key} ({source})")
        return self

    def section(self, ns: str):
        """Instantiate the dataclass of namespace ``ns`` from the current values."""
        cls = self.sections[ns]
        kwargs = {f.name: self.values[f"{ns}.{f.name}"] for f in dataclasses.fields(cls)}
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [{ns}] settings: {exc}") from exc

    def __getitem__(self, key: str):
        self._hint(key)
        return self.values[key]

    def to_text(self) -> str:
        lines = [f"{k} = {format_value(v)}" for k, v in sorted(self.values.items())]
        return "\n".join(lines) + "\n"

    def to_strings(self) -> dict[str, str]:
        """Values rendered as text, suitable for JSON manifests."""
        return {k: format_value(v) for k, v in sorted(self.values.items())}
