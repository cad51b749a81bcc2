"""Constant-velocity Kalman filter over (cx, cy, aspect, height).

State is the 4 box parameters plus their per-frame velocities. Noise scales
with box height as in SORT/ByteTrack. Batched variants take stacked
``(N, 8)`` means and ``(N, 8, 8)`` covariances so a whole track list is
predicted or corrected in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .geometry import BBox

_NDIM = 4
_MIN_POSITIVE = 1e-6


def box_to_xyah(box) -> np.ndarray:
    x, y, w, h = (box.x, box.y, box.w, box.h) if isinstance(box, BBox) else box
    return np.array([x + w / 2.0, y + h / 2.0, w / h, h], dtype=np.float64)


def tlwh_to_xyah(b) -> np.ndarray:
    """Vectorised :func:`box_to_xyah` on the last axis."""
    b = np.asarray(b, dtype=np.float64)
    return np.stack([b[..., 0] + b[..., 2] / 2.0, b[..., 1] + b[..., 3] / 2.0,
                     b[..., 2] / b[..., 3], b[..., 3]], axis=-1)


def xyah_to_tlwh(m) -> np.ndarray:
    """Vectorised inverse of :func:`box_to_xyah` on the last axis."""
    m = np.asarray(m, dtype=np.float64)
    w = m[..., 2] * m[..., 3]
    h = m[..., 3]
    return np.stack([m[..., 0] - w / 2.0, m[..., 1] - h / 2.0, w, h], axis=-1)


@dataclass
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def to_box(self) -> BBox:
        return BBox.from_array(xyah_to_tlwh(self.mean[:4]))


class KalmanFilter:
    def __init__(self, std_weight_position: float = 1.0 / 20, std_weight_velocity: float = 1.0 / 160):
        self.std_weight_position = std_weight_position
        self.std_weight_velocity = std_weight_velocity
        self._motion = np.eye(2 * _NDIM)
        for i in range(_NDIM):
            self._motion[i, _NDIM + i] = 1.0
        self._update = np.eye(_NDIM, 2 * _NDIM)

    # single-state API -----------------------------------------------------

    def initiate(self, box: BBox) -> KalmanState:
        mean, cov = self.initiate_many(box_to_xyah(box)[None])
        return KalmanState(mean[0], cov[0])

    def predict(self, state: KalmanState) -> KalmanState:
        mean, cov = self.predict_many(state.mean[None], state.covariance[None])
        return KalmanState(mean[0], cov[0])

    def update(self, state: KalmanState, observation: BBox) -> KalmanState:
        obs = np.array([observation.x, observation.y, observation.w, observation.h], dtype=np.float64)
        if not np.all(np.isfinite(obs)):
            raise InvalidInputError(f"non-finite observation {obs}")
        mean, cov = self.update_many(state.mean[None], state.covariance[None], box_to_xyah(obs)[None])
        return KalmanState(mean[0], cov[0])

    # batched API ----------------------------------------------------------

    def initiate_many(self, xyah: np.ndarray):
        xyah = np.asarray(xyah, dtype=np.float64).reshape(-1, _NDIM)
        n = xyah.shape[0]
        mean = np.concatenate([xyah, np.zeros((n, _NDIM))], axis=1)
        h = xyah[:, 3]
        wp, wv = self.std_weight_position, self.std_weight_velocity
        std = np.stack([
            2 * wp * h, 2 * wp * h, np.full(n, 1e-2), 2 * wp * h,
            10 * wv * h, 10 * wv * h, np.full(n, 1e-5), 10 * wv * h,
        ], axis=1)
        cov = np.zeros((n, 2 * _NDIM, 2 * _NDIM))
        idx = np.arange(2 * _NDIM)
        cov[:, idx, idx] = std ** 2
        return mean, cov

    def predict_many(self, mean: np.ndarray, cov: np.ndarray):
        n = mean.shape[0]
        h = mean[:, 3]
        wp, wv = self.std_weight_position, self.std_weight_velocity
        std = np.stack([
            wp * h, wp * h, np.full(n, 1e-2), wp * h,
            wv * h, wv * h, np.full(n, 1e-5), wv * h,
        ], axis=1)
        q = np.zeros_like(cov)
        idx = np.arange(2 * _NDIM)
        q[:, idx, idx] = std ** 2
        f = self._motion
        new_mean = mean @ f.T
        new_cov = f @ cov @ f.T + q
        return new_mean, 0.5 * (new_cov + np.swapaxes(new_cov, 1, 2))

    def update_many(self, mean: np.ndarray, cov: np.ndarray, xyah: np.ndarray):
        """Joseph-form correction, which keeps the covariance PSD."""
        xyah = np.asarray(xyah, dtype=np.float64).reshape(-1, _NDIM)
        if not np.all(np.isfinite(xyah)):
            raise InvalidInputError("non-finite observation")
        n = mean.shape[0]
        h = mean[:, 3]
        wp = self.std_weight_position
        std = np.stack([wp * h, wp * h, np.full(n, 1e-1), wp * h], axis=1)
        r = np.zeros((n, _NDIM, _NDIM))
        idx = np.arange(_NDIM)
        r[:, idx, idx] = std ** 2

        hm = self._update
        proj_mean = mean @ hm.T
        pht = cov @ hm.T                                   # (n, 8, 4)
        s = hm @ pht + r                                   # (n, 4, 4)
        gain = np.swapaxes(np.linalg.solve(s, np.swapaxes(pht, 1, 2)), 1, 2)  # (n, 8, 4)
        innovation = xyah - proj_mean
        new_mean = mean + np.einsum("nij,nj->ni", gain, innovation)
        i_kh = np.eye(2 * _NDIM)[None] - gain @ hm
        new_cov = i_kh @ cov @ np.swapaxes(i_kh, 1, 2) + gain @ r @ np.swapaxes(gain, 1, 2)
        new_cov = 0.5 * (new_cov + np.swapaxes(new_cov, 1, 2))
        new_mean[:, 2] = np.maximum(new_mean[:, 2], _MIN_POSITIVE)
        new_mean[:, 3] = np.maximum(new_mean[:, 3], _MIN_POSITIVE)
        return new_mean, new_cov


def kf_init(box: BBox, kf: KalmanFilter | None = None) -> KalmanState:
    return (kf or KalmanFilter()).initiate(box)


def kf_predict(state: KalmanState, kf: KalmanFilter | None = None) -> KalmanState:
    return (kf or KalmanFilter()).predict(state)


def kf_update(state: KalmanState, observation: BBox, kf: KalmanFilter | None = None) -> KalmanState:
    return (kf or KalmanFilter()).update(state, observation)


def predicted_boxes(mean: np.ndarray) -> np.ndarray:
    """tlwh boxes for stacked means; height/aspect floored to stay valid."""
    m = np.array(mean[:, :4], dtype=np.float64)
    m[:, 2] = np.maximum(m[:, 2], _MIN_POSITIVE)
    m[:, 3] = np.maximum(m[:, 3], _MIN_POSITIVE)
    return xyah_to_tlwh(m)


def is_valid_covariance(cov: np.ndarray, tol: float = 1e-9) -> bool:
    if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
        return False
    return bool(np.min(np.linalg.eigvalsh(cov)) >= -tol * max(1.0, math.fabs(np.max(np.diag(cov)))))
