"""Axis-aligned box geometry, detector score fusion and greedy NMS.

Boxes are top-left + width/height in continuous pixel coordinates, the
MOTChallenge convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .kernels import iou_matrix as _iou_matrix


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"box field {name} is not finite: {self}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidInputError(f"box must have positive width and height: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "BBox":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0


def fuse_score(conf: float, class_probs: Sequence[float]) -> float:
    """Overall box score: confidence times the best class probability."""
    if len(class_probs) == 0:
        raise InvalidInputError("class_probs must be non-empty")
    for p in (conf, *class_probs):
        if not 0.0 <= p <= 1.0:
            raise InvalidInputError(f"probability outside [0, 1]: {p}")
    return float(conf) * float(max(class_probs))


@dataclass(frozen=True)
class ScoredBox:
    """Detector output. ``fused`` is derived, never passed in."""

    box: BBox
    conf: float
    class_probs: tuple[float, ...] = (1.0,)
    fused: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "class_probs", tuple(float(p) for p in self.class_probs))
        object.__setattr__(self, "fused", fuse_score(self.conf, self.class_probs))


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    if len(boxes) == 0:
        return np.zeros((0, 4))
    return np.array([[b.x, b.y, b.w, b.h] for b in boxes], dtype=np.float64)


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU between two ``(N, 4)`` / ``(M, 4)`` tlwh arrays."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    return _iou_matrix(a, b)


def iou(a: BBox, b: BBox) -> float:
    return float(iou_matrix(a.as_array()[None], b.as_array()[None])[0, 0])


def nms(candidates: Sequence[ScoredBox], iou_threshold: float = 0.7) -> list[int]:
    """Greedy hard NMS on fused scores.

    Returns kept input indices in descending score order; equal scores keep
    the lower input index first. A box is suppressed when its IoU with an
    already kept box exceeds ``iou_threshold``.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise InvalidInputError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    if len(candidates) == 0:
        return []
    scores = np.array([c.fused for c in candidates])
    order = np.argsort(-scores, kind="stable")
    overlaps = iou_matrix(boxes_to_array([c.box for c in candidates]),
                          boxes_to_array([c.box for c in candidates]))
    suppressed = np.zeros(len(candidates), dtype=bool)
    keep: list[int] = []
    for idx in order:
        if suppressed[idx]:
            continue
        keep.append(int(idx))
        suppressed |= overlaps[idx] > iou_threshold
    return keep
