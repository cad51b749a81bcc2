"""Kernel backend selection.

``CORRTRACK_BACKEND=numpy`` forces the pure-numpy kernels; the default is
``numba`` when it imports cleanly. ``TCB_THREADS`` caps numba's thread pool.
"""
from __future__ import annotations

import os

_requested = os.environ.get("CORRTRACK_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"CORRTRACK_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

# an outdated system TBB only produces a warning; try the others first
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

HAVE_NUMBA = False
if _requested == "numba":
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def thread_cap() -> int | None:
    raw = os.environ.get("TCB_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return max(1, n)


def apply_thread_cap() -> None:
    n = thread_cap()
    if n is None or not HAVE_NUMBA:
        return
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
