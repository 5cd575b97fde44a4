"""Selects the kernel backend and applies the thread cap.

``OFMKIT_BACKEND=numpy`` forces the pure-numpy kernels;
``OFMKIT_BACKEND=numba`` requires numba and fails loudly if it is
missing.  Unset, numba is used when importable.  ``OFMKIT_THREADS``
caps the numba threading layer (the numpy kernels are single-threaded
already).
"""

from __future__ import annotations

import os
from types import ModuleType

_active: ModuleType | None = None
_active_name = ""


def _load(name: str) -> ModuleType:
    if name == "numpy":
        from . import _kernels_numpy

        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        _apply_thread_cap()
        return _kernels_numba
    raise ValueError(f"unknown kernel backend {name!r} (expected 'numba' or 'numpy')")


def _apply_thread_cap() -> None:
    cap = os.environ.get("OFMKIT_THREADS")
    if not cap:
        return
    import numba

    n = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)


def select(name: str) -> None:
    """Force a backend by name (mainly for tests and benchmarks)."""
    global _active, _active_name
    _active = _load(name)
    _active_name = name


def kernels() -> ModuleType:
    """Return the active kernel module, resolving it on first use."""
    global _active, _active_name
    if _active is None:
        requested = os.environ.get("OFMKIT_BACKEND", "").strip().lower()
        if requested:
            select(requested)
        else:
            try:
                select("numba")
            except ImportError:
                select("numpy")
    return _active


def backend_name() -> str:
    kernels()
    return _active_name
