"""Online tracker: fused association scores, a three-round matching cascade
and the Active/Lost/Removed track lifecycle.

Round 1 matches every live track against high-confidence detections on the
fused score (IoU x detection score x appearance by default). Round 2 retries
the leftovers of both sides on plain IoU, and round 3 offers the remaining
tracks the low-confidence detections, again on IoU. Appearance templates are
refreshed by EMA only from high-confidence matches.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields
from typing import NamedTuple, Sequence

import numpy as np

from .appearance import ema_update_rows
from .assignment import linear_assignment
from .errors import InvalidConfigError, InvalidInputError
from .geometry import BBox, ScoredBox, iou_matrix
from .motion import KalmanFilter, predicted_boxes, tlwh_to_xyah

FUSION_MODES = ("product", "linear", "iou")
_FUSION_ALIASES = {"iou_only": "iou"}


class TrackStatus(enum.Enum):
    ACTIVE = "active"
    LOST = "lost"
    REMOVED = "removed"


@dataclass
class TrackerConfig:
    tau_high: float = 0.6
    tau_low: float = 0.1
    stage1_min_score: float = 0.1
    stage2_min_iou: float = 0.5
    stage3_min_iou: float = 0.5
    gamma: float = 0.1
    max_age: int = 30
    use_kalman: bool = True
    fusion: str = "product"
    delta: float = 0.5
    # None means "same as tau_high"
    new_track_min_conf: float | None = None
    # matches needed before a track is reported; 1 reports it at birth
    min_hits: int = 1

    def __post_init__(self):
        self.fusion = _FUSION_ALIASES.get(self.fusion, self.fusion)
        if self.new_track_min_conf is None:
            self.new_track_min_conf = self.tau_high
        self.validate()

    def validate(self) -> None:
        if self.fusion not in FUSION_MODES:
            raise InvalidConfigError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        for name in ("tau_high", "tau_low", "stage1_min_score", "stage2_min_iou",
                     "stage3_min_iou", "gamma", "delta", "new_track_min_conf"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and 0.0 <= val <= 1.0):
                raise InvalidConfigError(f"{name} must lie in [0, 1], got {val!r}")
        if not self.tau_low < self.tau_high:
            raise InvalidConfigError(f"tau_low ({self.tau_low}) must be below tau_high ({self.tau_high})")
        if int(self.max_age) != self.max_age or self.max_age < 0:
            raise InvalidConfigError(f"max_age must be a non-negative integer, got {self.max_age!r}")
        if int(self.min_hits) != self.min_hits or self.min_hits < 1:
            raise InvalidConfigError(f"min_hits must be a positive integer, got {self.min_hits!r}")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class Track:
    id: int
    tlwh: np.ndarray
    template: np.ndarray | None
    conf: float
    mean: np.ndarray | None = None
    covariance: np.ndarray | None = None
    status: TrackStatus = TrackStatus.ACTIVE
    frames_since_update: int = 0
    age: int = 1
    hits: int = 1

    @property
    def last_box(self) -> BBox:
        return BBox.from_array(self.tlwh)


class TrackOutput(NamedTuple):
    id: int
    box: BBox
    conf: float


@dataclass
class FrameInput:
    """Detections of one frame with their aligned embeddings.

    ``embeddings`` may be ``None`` only for IoU-only fusion.
    """

    frame_index: int
    detections: Sequence[ScoredBox] = field(default_factory=list)
    embeddings: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.detections)
        self.boxes = np.array([[d.box.x, d.box.y, d.box.w, d.box.h] for d in self.detections],
                              dtype=np.float64).reshape(n, 4)
        self.scores = np.array([d.fused for d in self.detections], dtype=np.float64)
        if self.embeddings is not None:
            emb = np.asarray(self.embeddings, dtype=np.float64)
            if emb.ndim == 1 and emb.size == 0:
                emb = emb.reshape(0, 0)
            if emb.ndim != 2 or emb.shape[0] != n:
                raise InvalidInputError(
                    f"frame {self.frame_index}: {n} detections but embeddings of shape {emb.shape}")
            self.embeddings = emb

    @classmethod
    def from_arrays(cls, frame_index: int, boxes, confs, embeddings=None) -> "FrameInput":
        dets = [ScoredBox(BBox.from_array(b), float(c)) for b, c in zip(np.asarray(boxes), np.asarray(confs))]
        return cls(frame_index, dets, embeddings)


def temp_score(track_template, det_embedding) -> float:
    """Appearance agreement: cosine clamped below at zero."""
    from .appearance import cosine

    return max(0.0, cosine(track_template, det_embedding))


def fused_score(iou_val, det_conf, temp, mode: str = "product", delta: float = 0.5):
    """Combine overlap, detector score and appearance into one match score.

    Works elementwise on arrays as well as on scalars.
    """
    mode = _FUSION_ALIASES.get(mode, mode)
    if mode == "product":
        return iou_val * det_conf * temp
    if mode == "linear":
        if not 0.0 <= delta <= 1.0:
            raise InvalidConfigError(f"delta must lie in [0, 1], got {delta}")
        return (1.0 - delta) * iou_val + delta * temp
    if mode == "iou":
        return iou_val
    raise InvalidConfigError(f"unknown fusion mode {mode!r}")


def _gated_cost(score: np.ndarray, threshold: float) -> np.ndarray:
    return np.where(score >= threshold, 1.0 - score, np.inf)


class Tracker:
    """Single-sequence online tracker.

    Track state is kept column-wise (one array per field, one row per live
    track) so every round works on whole matrices; :attr:`tracks` builds
    :class:`Track` views on demand.
    """

    def __init__(self, config: TrackerConfig | None = None, kalman: KalmanFilter | None = None):
        self.config = config or TrackerConfig()
        self.config.validate()
        self.kf = kalman or KalmanFilter()
        self.removed_ids: set[int] = set()
        self.frame_index: int | None = None
        self._next_id = 1
        self.last_stage_matches: dict[int, int] = {}
        self._ids = np.zeros(0, dtype=np.int64)
        self._box: list[BBox] = []   # last matched detection box, reused for output
        self._dets: Sequence[ScoredBox] = []
        self._tlwh = np.zeros((0, 4))
        self._conf = np.zeros(0)
        self._status = np.zeros(0, dtype=np.int8)   # 0 active, 1 lost
        self._since = np.zeros(0, dtype=np.int64)
        self._age = np.zeros(0, dtype=np.int64)
        self._hits = np.zeros(0, dtype=np.int64)
        self._mean = np.zeros((0, 8))
        self._cov = np.zeros((0, 8, 8))
        self._templates: np.ndarray | None = None

    @property
    def tracks(self) -> list[Track]:
        out = []
        for k in range(self._ids.size):
            out.append(Track(
                id=int(self._ids[k]),
                tlwh=self._tlwh[k].copy(),
                template=None if self._templates is None else self._templates[k].copy(),
                conf=float(self._conf[k]),
                mean=self._mean[k].copy() if self.config.use_kalman else None,
                covariance=self._cov[k].copy() if self.config.use_kalman else None,
                status=TrackStatus.ACTIVE if self._status[k] == 0 else TrackStatus.LOST,
                frames_since_update=int(self._since[k]),
                age=int(self._age[k]),
                hits=int(self._hits[k]),
            ))
        return out

    def step(self, frame: FrameInput) -> list[TrackOutput]:
        cfg = self.config
        if self.frame_index is not None and frame.frame_index <= self.frame_index:
            raise InvalidInputError(
                f"frame index {frame.frame_index} does not follow {self.frame_index}")

        boxes = frame.boxes
        scores = frame.scores
        n_det = scores.size
        emb = None
        if frame.embeddings is not None and n_det:
            norms = np.linalg.norm(frame.embeddings, axis=1)
            if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
                raise InvalidInputError(f"frame {frame.frame_index}: zero-norm or non-finite embedding")
            if self._templates is not None and frame.embeddings.shape[1] != self._templates.shape[1]:
                raise InvalidInputError("embedding dimension changed between frames")
            emb = frame.embeddings / norms[:, None]
        elif cfg.fusion != "iou" and n_det:
            raise InvalidInputError("embeddings are required unless fusion is 'iou'")
        self.frame_index = frame.frame_index
        self._dets = frame.detections

        high = np.flatnonzero(scores >= cfg.tau_high)
        low = np.flatnonzero((scores >= cfg.tau_low) & (scores < cfg.tau_high))

        n_trk = self._ids.size
        if cfg.use_kalman and n_trk:
            self._mean, self._cov = self.kf.predict_many(self._mean, self._cov)
            track_boxes = predicted_boxes(self._mean)
        else:
            track_boxes = self._tlwh

        # round 1: fused score against high-confidence detections
        iou_hi = iou_matrix(track_boxes, boxes[high])
        if cfg.fusion == "iou" or n_trk == 0 or high.size == 0:
            score1 = iou_hi
        else:
            if self._templates is None:
                raise InvalidInputError("live tracks have no appearance templates")
            temp = np.clip(self._templates @ emb[high].T, 0.0, 1.0)
            score1 = fused_score(iou_hi, scores[high][None, :], temp, cfg.fusion, cfg.delta)
            # pairs must overlap; linear fusion would otherwise pair far-apart boxes on looks alone
            score1 = np.where(iou_hi > 0.0, score1, 0.0)
        res1 = linear_assignment(_gated_cost(score1, cfg.stage1_min_score))
        m_trk = [ti for ti, _ in res1.matches]
        m_det = [int(high[dj]) for _, dj in res1.matches]
        n_refresh = len(m_trk)

        # round 2: leftovers on IoU
        rem_t = np.asarray(res1.unmatched_tracks, dtype=np.int64)
        rem_hi = np.asarray(res1.unmatched_detections, dtype=np.int64)
        res2 = linear_assignment(_gated_cost(iou_hi[np.ix_(rem_t, rem_hi)], cfg.stage2_min_iou))
        m_trk += [int(rem_t[a]) for a, _ in res2.matches]
        m_det += [int(high[rem_hi[b]]) for _, b in res2.matches]
        n_refresh = len(m_trk)
        n_round1 = len(res1.matches)
        rem_t = rem_t[np.asarray(res2.unmatched_tracks, dtype=np.int64)]
        unmatched_high = high[rem_hi[np.asarray(res2.unmatched_detections, dtype=np.int64)]]

        # round 3: remaining tracks against low-confidence detections
        res3 = linear_assignment(_gated_cost(iou_matrix(track_boxes[rem_t], boxes[low]),
                                             cfg.stage3_min_iou))
        m_trk += [int(rem_t[a]) for a, _ in res3.matches]
        m_det += [int(low[b]) for _, b in res3.matches]

        ti = np.asarray(m_trk, dtype=np.int64)
        di = np.asarray(m_det, dtype=np.int64)
        stages = np.r_[np.full(n_round1, 1), np.full(n_refresh - n_round1, 2),
                       np.full(ti.size - n_refresh, 3)].astype(np.int64)
        self.last_stage_matches = dict(zip(self._ids[ti].tolist(), stages.tolist()))
        self._apply_matches(ti, di, n_refresh, boxes, scores, emb)

        matched = np.zeros(n_trk, dtype=bool)
        matched[ti] = True
        self._since[~matched] += 1
        self._status[~matched] = 1
        self._age += 1
        # tentative tracks die on their first miss
        keep = (self._since <= cfg.max_age) & (matched | (self._hits >= cfg.min_hits))
        if not keep.all():
            self.removed_ids.update(self._ids[~keep].tolist())
            self._select(keep)

        births = unmatched_high[scores[unmatched_high] >= cfg.new_track_min_conf]
        self._spawn(births, boxes, scores, emb)

        active = np.flatnonzero((self._status == 0) & (self._hits >= cfg.min_hits))
        active = active[np.argsort(self._ids[active], kind="stable")]
        ids = self._ids[active].tolist()
        confs = self._conf[active].tolist()
        return [TrackOutput(i, self._box[k], c) for i, k, c in zip(ids, active.tolist(), confs)]

    def _apply_matches(self, ti, di, n_refresh, boxes, scores, emb) -> None:
        if ti.size == 0:
            return
        cfg = self.config
        if cfg.use_kalman:
            self._mean[ti], self._cov[ti] = self.kf.update_many(
                self._mean[ti], self._cov[ti], tlwh_to_xyah(boxes[di]))
        if emb is not None and n_refresh:
            if self._templates is None:
                self._templates = np.zeros((self._ids.size, emb.shape[1]))
            rt, rd = ti[:n_refresh], di[:n_refresh]
            ema_update_rows(self._templates, rt, emb[rd], cfg.gamma)
        dets = self._dets
        for t, d in zip(ti.tolist(), di.tolist()):
            self._box[t] = dets[d].box
        self._tlwh[ti] = boxes[di]
        self._conf[ti] = scores[di]
        self._status[ti] = 0
        self._since[ti] = 0
        self._hits[ti] += 1

    def _select(self, keep: np.ndarray) -> None:
        self._box = [b for b, k in zip(self._box, keep.tolist()) if k]
        self._ids = self._ids[keep]
        self._tlwh = self._tlwh[keep]
        self._conf = self._conf[keep]
        self._status = self._status[keep]
        self._since = self._since[keep]
        self._age = self._age[keep]
        self._hits = self._hits[keep]
        self._mean = self._mean[keep]
        self._cov = self._cov[keep]
        if self._templates is not None:
            self._templates = self._templates[keep]

    def _spawn(self, idx: np.ndarray, boxes, scores, emb) -> None:
        if idx.size == 0:
            return
        n = idx.size
        new_ids = np.arange(self._next_id, self._next_id + n, dtype=np.int64)
        self._next_id += n
        self._ids = np.r_[self._ids, new_ids]
        self._box += [self._dets[d].box for d in idx.tolist()]
        self._tlwh = np.concatenate([self._tlwh, boxes[idx]])
        self._conf = np.r_[self._conf, scores[idx]]
        self._status = np.r_[self._status, np.zeros(n, dtype=np.int8)]
        self._since = np.r_[self._since, np.zeros(n, dtype=np.int64)]
        self._age = np.r_[self._age, np.ones(n, dtype=np.int64)]
        self._hits = np.r_[self._hits, np.ones(n, dtype=np.int64)]
        if self.config.use_kalman:
            mean, cov = self.kf.initiate_many(tlwh_to_xyah(boxes[idx]))
        else:
            mean, cov = np.zeros((n, 8)), np.zeros((n, 8, 8))
        self._mean = np.concatenate([self._mean, mean])
        self._cov = np.concatenate([self._cov, cov])
        if emb is not None:
            if self._templates is None:
                self._templates = np.zeros((self._ids.size - n, emb.shape[1]))
            self._templates = np.concatenate([self._templates, emb[idx]])
        elif self._templates is not None:
            raise InvalidInputError("new tracks need embeddings once templates are in use")

    def run(self, frames: Sequence[FrameInput]):
        """Feed a whole sequence; yields ``(frame_index, outputs)`` per frame."""
        for frame in frames:
            yield frame.frame_index, self.step(frame)
