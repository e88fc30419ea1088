"""Hot loops with a compiled and a pure-numpy implementation.

The active implementation is chosen once at import time from the
``OECTSIM_BACKEND`` environment variable (see :mod:`oectsim._backend`).
Both implementations take identical arguments and consume pre-drawn random
numbers, so results agree to floating-point rounding.
"""

from __future__ import annotations

from .. import _backend
from . import _numpy
from ._numpy import curve_fraction, curve_position

BACKEND = _backend.resolve_backend()

if BACKEND == "numba":
    from . import _numba as _impl
else:
    _impl = _numpy

apply_writes = _impl.apply_writes
verify_iteration = _impl.verify_iteration
receptor_chain = _impl.receptor_chain


def get(name: str, backend: str):
    """Fetch a kernel by name from a specific backend (used by tests and benchmarks)."""
    if backend == "numba":
        from . import _numba as mod
    elif backend == "numpy":
        mod = _numpy
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return getattr(mod, name)


__all__ = [
    "BACKEND", "apply_writes", "verify_iteration", "receptor_chain",
    "curve_fraction", "curve_position", "get",
]
