"""Time the numba and numpy kernels side by side, then a full tracker step
under each backend (the step runs in a subprocess because the backend is
chosen at import time).

    python benchmarks/bench_backends.py [--repeat 50]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from corrtrack.kernels import _numba, _numpy


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return np.median(times) * 1e3


def kernel_cases(rng):
    pos = rng.uniform(0, 1, (200, 2)) * [1880, 990]
    a = np.c_[pos, np.full((200, 2), [40.0, 90.0])]
    b = a + np.c_[rng.normal(0, 2, (200, 2)), np.zeros((200, 2))]
    cost = rng.uniform(0, 1, (120, 120))
    templates = rng.standard_normal((32, 64))
    cells = rng.standard_normal((64 * 64, 64))
    tmpl = rng.standard_normal((200, 512))
    tmpl /= np.linalg.norm(tmpl, axis=1, keepdims=True)
    new = rng.standard_normal((200, 512))
    rows = np.arange(200, dtype=np.int64)
    return [
        ("iou_matrix 200x200", "iou_matrix", (a, b)),
        ("solve_square 120x120", "solve_square", (cost,)),
        ("cosine_rows k=32 64x64x64", "cosine_rows", (templates, cells)),
        ("ema_rows 200x512", "ema_rows", (tmpl, rows, new, 0.1)),
    ]


STEP_SNIPPET = (
    "from corrtrack.bench import association_latency, percentiles;"
    "p = percentiles(association_latency(200, 200, 100, 512));"
    "print(' '.join(f'{k}={v:.3f}' for k, v in p.items()))"
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for label, name, call_args in kernel_cases(rng):
        t_nb = best_of(getattr(_numba, name), [np.copy(x) if isinstance(x, np.ndarray) else x
                                               for x in call_args], args.repeat)
        t_np = best_of(getattr(_numpy, name), [np.copy(x) if isinstance(x, np.ndarray) else x
                                               for x in call_args], args.repeat)
        print(f"{label:<28} {t_nb:>10.3f} {t_np:>10.3f} {t_np / t_nb:>7.1f}x")
    print()
    print("tracker step, 200 tracks x 200 detections, D=512 (ms)")
    for backend in ("numba", "numpy"):
        env = dict(os.environ, CORRTRACK_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", STEP_SNIPPET], env=env,
                             capture_output=True, text=True, check=True)
        print(f"  {backend:<6} {out.stdout.strip()}")


if __name__ == "__main__":
    main()
