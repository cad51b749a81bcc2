"""Hot kernels, dispatched to numba or numpy per ``CORRTRACK_BACKEND``."""
from .._backend import BACKEND, apply_thread_cap

if BACKEND == "numba":
    from ._numba import bipartite_components, cosine_rows, ema_rows, iou_matrix, solve_square

    apply_thread_cap()
else:
    from ._numpy import bipartite_components, cosine_rows, ema_rows, iou_matrix, solve_square

__all__ = ["BACKEND", "bipartite_components", "cosine_rows", "ema_rows", "iou_matrix", "solve_square"]
