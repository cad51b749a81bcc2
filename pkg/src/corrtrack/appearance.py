"""Embedding algebra: cosine similarity, EMA template blending and dense
template-to-feature-map correlation.

Correlating a ``1x1xD`` template against an ``HxWxD`` map reduces to one
matrix product between row-normalised templates and row-normalised cells,
so every heatmap value is a cosine in ``[-1, 1]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import DegenerateUpdateWarning, InvalidInputError
from .kernels import cosine_rows, ema_rows

DEFAULT_DIM = 512


def _vector(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1:
        raise InvalidInputError(f"{name} must be a 1-D vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return a


def cosine(a, b) -> float:
    a = _vector(a, "a")
    b = _vector(b, "b")
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise InvalidInputError("cosine of a zero-norm vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def normalize(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    n = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise InvalidInputError("cannot normalise a zero-norm vector")
    return a / n


def ema_update(old, new, gamma: float = 0.1) -> np.ndarray:
    """Blend ``(1 - gamma) * old + gamma * new`` and rescale to unit norm.

    If the blend cancels exactly, ``old`` is returned unchanged and a
    :class:`DegenerateUpdateWarning` is emitted.
    """
    old = _vector(old, "old")
    new = _vector(new, "new")
    if old.shape != new.shape:
        raise InvalidInputError(f"dimension mismatch: {old.shape[0]} vs {new.shape[0]}")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError(f"gamma must lie in [0, 1], got {gamma}")
    blended = (1.0 - gamma) * old + gamma * new
    norm = np.linalg.norm(blended)
    if norm == 0.0:
        warnings.warn("EMA update produced a zero template; keeping the old one",
                      DegenerateUpdateWarning, stacklevel=2)
        return old.copy()
    return blended / norm


def ema_update_many(old: np.ndarray, new: np.ndarray, gamma: float) -> np.ndarray:
    """Row-wise :func:`ema_update`; degenerate rows keep their old value."""
    blended = (1.0 - gamma) * old + gamma * new
    norm = np.linalg.norm(blended, axis=1, keepdims=True)
    bad = norm[:, 0] == 0.0
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} EMA updates produced zero templates; kept old ones",
                      DegenerateUpdateWarning, stacklevel=2)
        blended[bad] = old[bad]
        norm[bad] = 1.0
    return blended / norm


def ema_update_rows(templates: np.ndarray, rows: np.ndarray, new: np.ndarray, gamma: float) -> None:
    """In-place :func:`ema_update` of ``templates[rows]`` from aligned ``new`` rows.

    ``rows`` must not repeat. ``templates`` must be a C-contiguous float64 array.
    """
    if rows.size == 0:
        return
    bad = ema_rows(templates, np.ascontiguousarray(rows, dtype=np.int64),
                   np.ascontiguousarray(new, dtype=np.float64), float(gamma))
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} EMA updates produced zero templates; kept old ones",
                      DegenerateUpdateWarning, stacklevel=2)


@dataclass
class TemplateSet:
    templates: np.ndarray
    track_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.templates = np.asarray(self.templates, dtype=np.float64)
        if self.templates.size == 0 and self.templates.ndim != 2:
            self.templates = self.templates.reshape(0, 0)
        if self.templates.ndim != 2 or self.templates.shape[0] != len(self.track_ids):
            raise InvalidInputError("templates must be (k, D) and aligned with track_ids")
        if len(set(self.track_ids)) != len(self.track_ids):
            raise InvalidInputError("template ids must be unique")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Hashable, np.ndarray]]) -> "TemplateSet":
        if not pairs:
            return cls(np.zeros((0, 0)), [])
        ids, vecs = zip(*pairs)
        return cls(np.stack([np.asarray(v, dtype=np.float64) for v in vecs]), list(ids))

    def __len__(self) -> int:
        return len(self.track_ids)


@dataclass
class Correlation:
    """Per-template heatmaps ``(k, H, W)`` plus a mask of zero-norm cells."""

    heatmaps: np.ndarray
    degenerate: np.ndarray
    track_ids: list

    def __len__(self) -> int:
        return self.heatmaps.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.heatmaps[i]


def correlate(templates, fmap) -> Correlation:
    """Cosine response of every template at every cell of an ``(H, W, D)`` map."""
    if not isinstance(templates, TemplateSet):
        arr = np.asarray(templates, dtype=np.float64)
        templates = TemplateSet(arr, list(range(arr.shape[0])) if arr.ndim == 2 else [])
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3:
        raise InvalidInputError(f"feature map must be (H, W, D), got shape {fmap.shape}")
    h, w, d = fmap.shape
    if not np.all(np.isfinite(fmap)):
        raise InvalidInputError("feature map has non-finite entries")
    k = len(templates)
    cells = fmap.reshape(h * w, d)
    if k == 0:
        degenerate = ~np.any(cells != 0.0, axis=1)
        return Correlation(np.zeros((0, h, w)), degenerate.reshape(h, w), [])
    z = templates.templates
    if z.shape[1] != d:
        raise InvalidInputError(f"template dim {z.shape[1]} != feature channels {d}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("templates have non-finite entries")
    if np.any(np.all(z == 0.0, axis=1)):
        raise InvalidInputError("zero-norm template")
    out, degenerate = cosine_rows(np.ascontiguousarray(z), np.ascontiguousarray(cells))
    return Correlation(out.reshape(k, h, w), np.asarray(degenerate).reshape(h, w), list(templates.track_ids))
