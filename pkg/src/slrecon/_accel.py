"""Kernel backend selection.

The hot loops (interpolation at characteristic feet, fast sweeping and the
reinitialisation iteration) exist twice: a numba ``@njit`` kernel and a
vectorised numpy path.  The backend is picked once at import time from the
``SLRECON_BACKEND`` environment variable (``numba`` by default, ``numpy`` to
bypass the JIT); :func:`using` switches it temporarily, mainly for tests and
the benchmark script.
"""
from __future__ import annotations

import os
from contextlib import contextmanager

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

BACKENDS = ("numba", "numpy")

_backend = os.environ.get("SLRECON_BACKEND", "numba").strip().lower() or "numba"
if _backend not in BACKENDS:
    raise ValueError(f"SLRECON_BACKEND must be one of {BACKENDS}, got {_backend!r}")
if numba is None:
    _backend = "numpy"
elif "NUMBA_THREADING_LAYER" not in os.environ:
    # prefer OpenMP/workqueue: an old system TBB only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def backend() -> str:
    return _backend


def use_numba() -> bool:
    return _backend == "numba"


def set_backend(name: str) -> None:
    global _backend
    name = name.lower()
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextmanager
def using(name: str):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def set_threads(n: int | None) -> None:
    """Set the numba worker count (no-op for the numpy backend)."""
    if n is None or numba is None:
        return
    numba.set_num_threads(int(n))


def get_threads() -> int:
    return 1 if numba is None else numba.get_num_threads()


if numba is not None:
    prange = numba.prange

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

else:  # pragma: no cover
    prange = range

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
