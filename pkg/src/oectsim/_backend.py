"""Kernel backend selection.

Set ``OECTSIM_BACKEND=numpy`` to force the pure-numpy kernels, or
``OECTSIM_BACKEND=numba`` to require the compiled ones. When unset, numba is
used if it imports cleanly.
"""

from __future__ import annotations

import os

ENV_VAR = "OECTSIM_BACKEND"
_CHOICES = ("numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except Exception:  # pragma: no cover - depends on the environment
        return False
    return True


def resolve_backend(requested: str | None = None) -> str:
    """Return the backend name to use, validating the request."""
    name = requested if requested is not None else os.environ.get(ENV_VAR, "")
    name = name.strip().lower()
    if not name:
        return "numba" if _numba_available() else "numpy"
    if name not in _CHOICES:
        raise ValueError(f"{ENV_VAR} must be one of {_CHOICES}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise ImportError(f"{ENV_VAR}=numba requested but numba is not importable")
    return name
