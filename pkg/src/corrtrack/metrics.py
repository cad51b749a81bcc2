"""CLEAR-MOT, IDF1 and HOTA scores for track output against ground truth.

All three families share one preprocessing pass that groups records by frame
and computes per-frame IoU matrices. Reports keep raw counts (including the
per-threshold HOTA tallies) so reports from several sequences can be merged
by micro-averaging.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .assignment import linear_assignment
from .errors import InvalidInputError
from .geometry import BBox, iou_matrix

HOTA_ALPHAS = np.arange(1, 20) / 20.0
_ALPHA_EPS = np.finfo(np.float64).eps
# weight of the localisation term in the HOTA matching objective
_HOTA_SIM_WEIGHT = 1e-6


@dataclass(frozen=True)
class TrackRecord:
    frame: int
    id: Hashable
    box: BBox
    conf: float = 1.0

    def __post_init__(self):
        if int(self.frame) != self.frame or self.frame < 1:
            raise InvalidInputError(f"frame must be a positive integer, got {self.frame!r}")
        if not isinstance(self.box, BBox):
            raise InvalidInputError(f"box must be a BBox, got {type(self.box).__name__}")


@dataclass
class FrameRow:
    frame: int
    num_gt: int
    num_pred: int
    matches: int
    fp: int
    fn: int
    id_switches: int


@dataclass
class MetricsReport:
    mota: float
    fp: int
    fn: int
    id_switches: int
    idf1: float
    hota: float
    deta: float
    assa: float
    total_gt: int = 0
    total_pred: int = 0
    matches: int = 0
    idtp: int = 0
    per_frame: list[FrameRow] = field(default_factory=list)
    # per-alpha HOTA tallies: TP count and summed association score over TPs
    hota_tp: np.ndarray = field(default_factory=lambda: np.zeros(HOTA_ALPHAS.size))
    hota_ass: np.ndarray = field(default_factory=lambda: np.zeros(HOTA_ALPHAS.size))

    @property
    def idfp(self) -> int:
        return self.total_pred - self.idtp

    @property
    def idfn(self) -> int:
        return self.total_gt - self.idtp

    def summary(self) -> dict[str, float | int]:
        return {
            "mota": self.mota, "idf1": self.idf1, "hota": self.hota, "deta": self.deta,
            "assa": self.assa, "fp": self.fp, "fn": self.fn, "id_switches": self.id_switches,
            "total_gt": self.total_gt, "total_pred": self.total_pred,
        }

    def summary_text(self) -> str:
        lines = []
        for k, v in self.summary().items():
            lines.append(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        head = f"{'frame':>7} {'gt':>5} {'pred':>5} {'match':>6} {'fp':>5} {'fn':>5} {'idsw':>5}"
        rows = [head]
        for r in self.per_frame:
            rows.append(f"{r.frame:>7d} {r.num_gt:>5d} {r.num_pred:>5d} {r.matches:>6d} "
                        f"{r.fp:>5d} {r.fn:>5d} {r.id_switches:>5d}")
        return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# shared preprocessing


@dataclass
class _Frame:
    frame: int
    gt_ids: np.ndarray      # dense gt identity indices
    pred_ids: np.ndarray    # dense pred identity indices
    gt_labels: list
    pred_labels: list
    iou: np.ndarray


@dataclass
class _Sequence:
    frames: list[_Frame]
    n_gt_ids: int
    n_pred_ids: int
    gt_counts: np.ndarray
    pred_counts: np.ndarray
    total_gt: int
    total_pred: int


def _group(records: Iterable[TrackRecord], what: str) -> dict[int, list[TrackRecord]]:
    by_frame: dict[int, list[TrackRecord]] = {}
    seen = set()
    for r in records:
        if not isinstance(r, TrackRecord):
            raise InvalidInputError(f"{what} entries must be TrackRecord, got {type(r).__name__}")
        key = (int(r.frame), r.id)
        if key in seen:
            raise InvalidInputError(f"duplicate {what} row for frame {r.frame}, id {r.id!r}")
        seen.add(key)
        by_frame.setdefault(int(r.frame), []).append(r)
    return by_frame


def _prepare(gt: Sequence[TrackRecord], pred: Sequence[TrackRecord]) -> _Sequence:
    g = _group(gt, "gt")
    p = _group(pred, "pred")
    gt_index: dict = {}
    pred_index: dict = {}
    frames = []
    for f in sorted(set(g) | set(p)):
        gr = g.get(f, [])
        pr = p.get(f, [])
        gi = np.array([gt_index.setdefault(r.id, len(gt_index)) for r in gr], dtype=np.int64)
        pi = np.array([pred_index.setdefault(r.id, len(pred_index)) for r in pr], dtype=np.int64)
        gb = np.array([[r.box.x, r.box.y, r.box.w, r.box.h] for r in gr]).reshape(-1, 4)
        pb = np.array([[r.box.x, r.box.y, r.box.w, r.box.h] for r in pr]).reshape(-1, 4)
        frames.append(_Frame(f, gi, pi, [r.id for r in gr], [r.id for r in pr], iou_matrix(gb, pb)))
    gt_counts = np.zeros(len(gt_index), dtype=np.int64)
    pred_counts = np.zeros(len(pred_index), dtype=np.int64)
    for fr in frames:
        np.add.at(gt_counts, fr.gt_ids, 1)
        np.add.at(pred_counts, fr.pred_ids, 1)
    return _Sequence(frames, len(gt_index), len(pred_index), gt_counts, pred_counts,
                     int(gt_counts.sum()), int(pred_counts.sum()))


def _ratio(num: float, den: float, empty: float) -> float:
    return num / den if den else empty


# ---------------------------------------------------------------------------
# CLEAR


def _clear(seq: _Sequence, iou_threshold: float):
    last: dict[int, int] = {}   # gt identity -> last matched pred identity
    fp = fn = idsw = matches = 0
    rows = []
    for fr in seq.frames:
        ng, npred = fr.gt_ids.size, fr.pred_ids.size
        valid = fr.iou >= iou_threshold
        gt_free = np.ones(ng, dtype=bool)
        pred_free = np.ones(npred, dtype=bool)
        pred_pos = {int(j): c for c, j in enumerate(fr.pred_ids)}
        # keep last correspondences that are still valid
        for r in range(ng):
            c = pred_pos.get(last.get(int(fr.gt_ids[r]), -1))
            if c is not None and valid[r, c] and pred_free[c]:
                gt_free[r] = False
                pred_free[c] = False
        n_match = int(ng - gt_free.sum())
        n_sw = 0
        rows_left = np.flatnonzero(gt_free)
        cols_left = np.flatnonzero(pred_free)
        if rows_left.size and cols_left.size:
            sub = np.where(valid[np.ix_(rows_left, cols_left)],
                           1.0 - fr.iou[np.ix_(rows_left, cols_left)], np.inf)
            for a, b in linear_assignment(sub).matches:
                gid = int(fr.gt_ids[rows_left[a]])
                pid = int(fr.pred_ids[cols_left[b]])
                if gid in last and last[gid] != pid:
                    n_sw += 1
                last[gid] = pid
                n_match += 1
        rows.append(FrameRow(fr.frame, ng, npred, n_match, npred - n_match, ng - n_match, n_sw))
        fp += npred - n_match
        fn += ng - n_match
        idsw += n_sw
        matches += n_match
    total = seq.total_gt
    if total:
        mota = 1.0 - (fp + fn + idsw) / total
    else:
        mota = 1.0 if fp == 0 else 0.0
    return mota, fp, fn, idsw, matches, rows


def clear_metrics(gt: Sequence[TrackRecord], pred: Sequence[TrackRecord],
                  iou_threshold: float = 0.5) -> tuple[float, int, int, int]:
    """``(mota, fp, fn, id_switches)``.

    With no ground truth at all, MOTA is 1 when there are also no predictions
    and 0 otherwise.
    """
    _check_threshold(iou_threshold)
    mota, fp, fn, idsw, _, _ = _clear(_prepare(gt, pred), iou_threshold)
    return mota, fp, fn, idsw


# ---------------------------------------------------------------------------
# IDF1


def _idtp(seq: _Sequence, iou_threshold: float) -> int:
    if seq.n_gt_ids == 0 or seq.n_pred_ids == 0:
        return 0
    overlap = np.zeros((seq.n_gt_ids, seq.n_pred_ids), dtype=np.int64)
    for fr in seq.frames:
        r, c = np.nonzero(fr.iou >= iou_threshold)
        np.add.at(overlap, (fr.gt_ids[r], fr.pred_ids[c]), 1)
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return int(overlap[rows, cols].sum())


def idf1(gt: Sequence[TrackRecord], pred: Sequence[TrackRecord], iou_threshold: float = 0.5) -> float:
    _check_threshold(iou_threshold)
    seq = _prepare(gt, pred)
    idtp = _idtp(seq, iou_threshold)
    return _ratio(2.0 * idtp, seq.total_gt + seq.total_pred, 1.0)


# ---------------------------------------------------------------------------
# HOTA


def _hota_tallies(seq: _Sequence):
    """Per-alpha TP counts and summed association scores over TPs."""
    n_alpha = HOTA_ALPHAS.size
    tp = np.zeros(n_alpha, dtype=np.int64)
    ass = np.zeros(n_alpha)
    if seq.n_gt_ids == 0 or seq.n_pred_ids == 0:
        return tp, ass
    for a, alpha in enumerate(HOTA_ALPHAS):
        thr = alpha - _ALPHA_EPS
        potential = np.zeros((seq.n_gt_ids, seq.n_pred_ids))
        for fr in seq.frames:
            r, c = np.nonzero(fr.iou >= thr)
            np.add.at(potential, (fr.gt_ids[r], fr.pred_ids[c]), 1.0)
        union = seq.gt_counts[:, None] + seq.pred_counts[None, :] - potential
        a_max = np.divide(potential, union, out=np.zeros_like(potential), where=union > 0)

        tpa = np.zeros((seq.n_gt_ids, seq.n_pred_ids))
        for fr in seq.frames:
            if fr.iou.size == 0:
                continue
            ok = fr.iou >= thr
            if not ok.any():
                continue
            score = a_max[np.ix_(fr.gt_ids, fr.pred_ids)] + _HOTA_SIM_WEIGHT * fr.iou
            res = linear_assignment(np.where(ok, -score, np.inf))
            for i, j in res.matches:
                tpa[fr.gt_ids[i], fr.pred_ids[j]] += 1.0
        tp[a] = int(tpa.sum())
        union = seq.gt_counts[:, None] + seq.pred_counts[None, :] - tpa
        assoc = np.divide(tpa, union, out=np.zeros_like(tpa), where=union > 0)
        ass[a] = float(np.sum(tpa * assoc))
    return tp, ass


def _hota_scores(tp, ass, total_gt: int, total_pred: int) -> tuple[float, float, float]:
    if total_gt == 0 and total_pred == 0:
        return 1.0, 1.0, 1.0
    tp = np.asarray(tp, dtype=np.float64)
    fn = total_gt - tp
    fp = total_pred - tp
    deta = tp / np.maximum(tp + fn + fp, 1.0)
    assa = np.divide(ass, tp, out=np.zeros_like(tp), where=tp > 0)
    hota_a = np.sqrt(deta * assa)
    return float(hota_a.mean()), float(deta.mean()), float(assa.mean())


def hota(gt: Sequence[TrackRecord], pred: Sequence[TrackRecord]) -> tuple[float, float, float]:
    """``(hota, deta, assa)`` averaged over ``alpha`` in 0.05, 0.10, ..., 0.95.

    At each ``alpha`` a pair may match when its IoU reaches ``alpha``. Each
    frame takes the largest such matching, preferring pairs whose identities
    could co-occur most (``A_max``) and then better-localised pairs.
    """
    seq = _prepare(gt, pred)
    tp, ass = _hota_tallies(seq)
    return _hota_scores(tp, ass, seq.total_gt, seq.total_pred)


# ---------------------------------------------------------------------------
# combined


def _check_threshold(t: float) -> None:
    if not 0.0 < t <= 1.0:
        raise InvalidInputError(f"iou_threshold must lie in (0, 1], got {t}")


def evaluate(gt: Sequence[TrackRecord], pred: Sequence[TrackRecord],
             iou_threshold: float = 0.5) -> MetricsReport:
    _check_threshold(iou_threshold)
    seq = _prepare(gt, pred)
    mota, fp, fn, idsw, matches, rows = _clear(seq, iou_threshold)
    idtp = _idtp(seq, iou_threshold)
    tp, ass = _hota_tallies(seq)
    h, d, a = _hota_scores(tp, ass, seq.total_gt, seq.total_pred)
    return MetricsReport(
        mota=mota, fp=fp, fn=fn, id_switches=idsw,
        idf1=_ratio(2.0 * idtp, seq.total_gt + seq.total_pred, 1.0),
        hota=h, deta=d, assa=a,
        total_gt=seq.total_gt, total_pred=seq.total_pred, matches=matches, idtp=idtp,
        per_frame=rows, hota_tp=tp.astype(np.float64), hota_ass=ass,
    )


def merge_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Micro-average: pool the raw counts of several sequences, then rescore."""
    if not reports:
        raise InvalidInputError("nothing to merge")
    total_gt = sum(r.total_gt for r in reports)
    total_pred = sum(r.total_pred for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    idsw = sum(r.id_switches for r in reports)
    idtp = sum(r.idtp for r in reports)
    tp = np.sum([r.hota_tp for r in reports], axis=0)
    ass = np.sum([r.hota_ass for r in reports], axis=0)
    h, d, a = _hota_scores(tp, ass, total_gt, total_pred)
    if total_gt:
        mota = 1.0 - (fp + fn + idsw) / total_gt
    else:
        mota = 1.0 if fp == 0 else 0.0
    return MetricsReport(
        mota=mota, fp=fp, fn=fn, id_switches=idsw,
        idf1=_ratio(2.0 * idtp, total_gt + total_pred, 1.0),
        hota=h, deta=d, assa=a, total_gt=total_gt, total_pred=total_pred,
        matches=sum(r.matches for r in reports), idtp=idtp, hota_tp=tp, hota_ass=ass,
    )
