"""Per-frame association latency on a synthetic crowd."""
from __future__ import annotations

import time

import numpy as np

from .errors import InvalidInputError
from .tracker import FrameInput, Tracker, TrackerConfig

WARMUP_FRAMES = 5


def crowd_frames(tracks: int, dets: int, frames: int, dim: int = 512, seed: int = 0) -> list[FrameInput]:
    """``tracks`` walkers seen in every frame; ``dets`` rows per frame.

    When ``dets`` exceeds ``tracks`` the extra rows are clutter boxes;
    when it is smaller, only the first ``dets`` walkers are detected.
    """
    if tracks < 0 or dets < 0 or frames < 1 or dim < 1:
        raise InvalidInputError("tracks, dets must be >= 0 and frames, dim >= 1")
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0.0, 1.0, (tracks, 2)) * [1880.0, 990.0]
    vel = rng.normal(0.0, 2.0, (tracks, 2))
    protos = rng.standard_normal((tracks, dim))
    size = np.array([40.0, 90.0])
    seen = min(tracks, dets)
    out = []
    for f in range(1, frames + 1):
        pos = pos + vel
        boxes = np.empty((dets, 4))
        boxes[:seen, :2] = pos[:seen] + rng.normal(0.0, 1.0, (seen, 2))
        boxes[seen:, :2] = rng.uniform(0.0, 1.0, (dets - seen, 2)) * [1880.0, 990.0]
        boxes[:, 2:] = size
        emb = np.empty((dets, dim))
        emb[:seen] = protos[:seen] + 0.3 * rng.standard_normal((seen, dim))
        emb[seen:] = rng.standard_normal((dets - seen, dim))
        out.append(FrameInput.from_arrays(f, boxes, rng.uniform(0.6, 1.0, dets), emb))
    return out


def association_latency(tracks: int = 200, dets: int = 200, frames: int = 100, dim: int = 512,
                        seed: int = 0, config: TrackerConfig | None = None) -> np.ndarray:
    """Milliseconds per :meth:`Tracker.step`, warm-up frames excluded."""
    stream = crowd_frames(tracks, dets, frames + WARMUP_FRAMES, dim, seed)
    tracker = Tracker(config or TrackerConfig())
    times = []
    for frame in stream:
        t0 = time.perf_counter()
        tracker.step(frame)
        times.append(time.perf_counter() - t0)
    return np.asarray(times[WARMUP_FRAMES:]) * 1e3


def percentiles(ms: np.ndarray) -> dict[str, float]:
    p50, p95, p99 = np.percentile(ms, [50, 95, 99])
    return {"p50": float(p50), "p95": float(p95), "p99": float(p99)}
