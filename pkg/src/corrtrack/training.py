"""Training-side math for the correlation embedding head, as pure functions.

Covers candidate selection against ground truth, cross-frame pairing by
identity, Gaussian target heatmaps and the logistic-MSE heatmap loss with its
analytic gradient. No optimiser lives here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .geometry import BBox, boxes_to_array, iou_matrix

SELECTION_ALPHA = 0.8
MIN_OVERLAP = 0.7
SIGMA_FLOOR = 0.5


@dataclass(frozen=True)
class GaussianSpec:
    cx: float
    cy: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInputError(f"sigma must be positive, got {self.sigma}")


@dataclass
class SelectionResult:
    selected_features: list = field(default_factory=list)
    selected_ids: list = field(default_factory=list)
    selected_indices: list = field(default_factory=list)
    scores: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.selected_ids)


@dataclass
class TrainingPair:
    prev_features: list
    gt_centers: list
    shared_ids: list

    def __len__(self) -> int:
        return len(self.shared_ids)


@dataclass
class LossReport:
    loss: float
    gradient: np.ndarray


def select_objects(candidates: Sequence[tuple[BBox, np.ndarray]], gt_boxes: Sequence[BBox],
                   gt_ids: Sequence[Hashable], alpha: float = SELECTION_ALPHA) -> SelectionResult:
    """Label the best-overlapping candidate of each ground-truth box.

    A ground truth whose best IoU is not strictly above ``alpha`` is skipped.
    Equal IoUs resolve to the lowest candidate index.
    """
    if len(gt_boxes) != len(gt_ids):
        raise InvalidInputError("gt_boxes and gt_ids must be aligned")
    if len(set(gt_ids)) != len(gt_ids):
        raise InvalidInputError("gt_ids must be unique within a frame")
    result = SelectionResult()
    if not candidates or not gt_boxes:
        return result
    cand = boxes_to_array([b for b, _ in candidates])
    overlaps = iou_matrix(boxes_to_array(gt_boxes), cand)
    best = np.argmax(overlaps, axis=1)
    for g, gid in enumerate(gt_ids):
        score = overlaps[g, best[g]]
        if score > alpha:
            idx = int(best[g])
            result.selected_features.append(np.asarray(candidates[idx][1], dtype=np.float64))
            result.selected_ids.append(gid)
            result.selected_indices.append(idx)
            result.scores.append(float(score))
    return result


def pair_by_id(prev: SelectionResult, cur: SelectionResult,
               cur_gt_centers: Mapping[Hashable, GaussianSpec]) -> TrainingPair:
    """Keep previous-frame selections whose identity is also selected now.

    Output order follows ``prev``.
    """
    cur_ids = set(cur.selected_ids)
    keep = [i for i, gid in enumerate(prev.selected_ids) if gid in cur_ids]
    missing = [prev.selected_ids[i] for i in keep if prev.selected_ids[i] not in cur_gt_centers]
    if missing:
        raise InvalidInputError(f"no ground-truth centre for ids {missing}")
    return TrainingPair(
        prev_features=[prev.selected_features[i] for i in keep],
        gt_centers=[cur_gt_centers[prev.selected_ids[i]] for i in keep],
        shared_ids=[prev.selected_ids[i] for i in keep],
    )


def gaussian_heatmap(spec: GaussianSpec, height: int, width: int) -> np.ndarray:
    """``exp(-((x - cx)^2 + (y - cy)^2) / (2 sigma^2))`` on an ``(H, W)`` grid.

    ``x`` indexes columns and ``y`` rows.
    """
    if not (0 <= spec.cx <= width - 1 and 0 <= spec.cy <= height - 1):
        raise InvalidInputError(f"centre ({spec.cx}, {spec.cy}) outside {height}x{width} grid")
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    d2 = (xs - spec.cx) ** 2 + (ys - spec.cy) ** 2
    return np.exp(-d2 / (2.0 * spec.sigma * spec.sigma))


def gaussian_radius(height: float, width: float, min_overlap: float = MIN_OVERLAP) -> float:
    """CenterNet corner-jitter radius keeping IoU >= ``min_overlap``."""
    a1 = 1.0
    b1 = height + width
    c1 = width * height * (1 - min_overlap) / (1 + min_overlap)
    r1 = (b1 + math.sqrt(b1 * b1 - 4 * a1 * c1)) / 2

    a2 = 4.0
    b2 = 2 * (height + width)
    c2 = (1 - min_overlap) * width * height
    r2 = (b2 + math.sqrt(b2 * b2 - 4 * a2 * c2)) / 2

    a3 = 4 * min_overlap
    b3 = -2 * min_overlap * (height + width)
    c3 = (min_overlap - 1) * width * height
    r3 = (b3 + math.sqrt(b3 * b3 - 4 * a3 * c3)) / 2
    return min(r1, r2, r3)


def size_adaptive_sigma(box: BBox, stride: float) -> float:
    if not stride > 0:
        raise InvalidInputError(f"stride must be positive, got {stride}")
    radius = gaussian_radius(box.h / stride, box.w / stride)
    return max(SIGMA_FLOOR, radius / 3.0)


def gaussian_spec_for_box(box: BBox, stride: float, height: int, width: int) -> GaussianSpec:
    """Grid-cell Gaussian target for a pixel box, centre rounded to a cell."""
    cx, cy = box.center
    gx = int(np.clip(np.floor(cx / stride), 0, width - 1))
    gy = int(np.clip(np.floor(cy / stride), 0, height - 1))
    return GaussianSpec(float(gx), float(gy), size_adaptive_sigma(box, stride))


def squash(correlation) -> np.ndarray:
    """Map cosine responses from ``[-1, 1]`` into ``[0, 1]`` for the loss."""
    return (np.asarray(correlation, dtype=np.float64) + 1.0) / 2.0


def _check_loss_inputs(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.ndim == 2:
        pred = pred[None]
    if gt.ndim == 2:
        gt = gt[None]
    if pred.shape != gt.shape:
        raise InvalidInputError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    if pred.shape[0] < 1:
        raise InvalidInputError("need at least one heatmap pair")
    if not np.all((pred > 0.0) & (pred < 1.0)):
        raise InvalidInputError("predictions must lie strictly inside (0, 1)")
    if not np.all(np.isfinite(gt)):
        raise InvalidInputError("gt heatmap has non-finite entries")
    return pred, gt


def logistic_mse_value(pred, gt) -> float:
    pred, gt = _check_loss_inputs(pred, gt)
    return _loss(pred, gt)


def _loss(pred: np.ndarray, gt: np.ndarray) -> float:
    pos = gt >= 1.0
    terms = np.where(pos, (1.0 - pred) * np.log(pred), (1.0 - gt) * pred * np.log1p(-pred))
    # exactly rounded, so the total does not depend on summation order
    return -math.fsum(terms.ravel()) / pred.shape[0]


def logistic_mse_loss(pred, gt) -> LossReport:
    """Heatmap loss and its gradient with respect to every prediction cell.

    ``pred`` and ``gt`` are ``(k, H, W)`` (or a single ``(H, W)``); the
    normaliser is the number of heatmap pairs ``k``. Cells where the target
    reaches 1 use ``(1 - m) log m``; all others ``(1 - h) m log(1 - m)``.
    """
    pred, gt = _check_loss_inputs(pred, gt)
    n = pred.shape[0]
    pos = gt >= 1.0
    d_pos = -np.log(pred) + (1.0 - pred) / pred
    d_neg = (1.0 - gt) * (np.log1p(-pred) - pred / (1.0 - pred))
    grad = -np.where(pos, d_pos, d_neg) / n
    return LossReport(loss=_loss(pred, gt), gradient=grad)


def random_loss_instance(rng: np.random.Generator, height: int, width: int, k: int,
                         dim: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Squashed correlation maps of random templates and their Gaussian targets."""
    from .appearance import correlate

    if height < 1 or width < 1 or k < 1 or dim < 1:
        raise InvalidInputError("size, template count and dim must be positive")
    fmap = rng.standard_normal((height, width, dim))
    templates = rng.standard_normal((k, dim))
    pred = squash(correlate(templates, fmap).heatmaps)
    gt = np.empty((k, height, width))
    for i in range(k):
        spec = GaussianSpec(float(rng.integers(0, width)), float(rng.integers(0, height)),
                            float(rng.uniform(0.5, 3.0)))
        gt[i] = gaussian_heatmap(spec, height, width)
    return pred, gt


def finite_difference_error(pred, gt, step: float = 1e-4) -> float:
    """Largest relative gap between the analytic gradient and central differences.

    Each cell is nudged by ``step`` inside the full loss. The relative gap is
    ``|g - fd| / max(|g|, |fd|)``; cells where both are below ``1e-10``
    count as agreeing.
    """
    pred, gt = _check_loss_inputs(pred, gt)
    grad = logistic_mse_loss(pred, gt).gradient
    worst = 0.0
    flat = pred.reshape(-1)
    for c in range(flat.size):
        orig = flat[c]
        flat[c] = orig + step
        up = _loss(pred, gt)
        flat[c] = orig - step
        down = _loss(pred, gt)
        flat[c] = orig
        fd = (up - down) / (2.0 * step)
        g = grad.reshape(-1)[c]
        scale = max(abs(g), abs(fd))
        if scale > 1e-10:
            worst = max(worst, abs(g - fd) / scale)
    return worst
