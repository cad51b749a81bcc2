"""Deterministic synthetic scenes: trajectories, noised detections and
identity-linked embeddings.

Every random draw comes from its own named stream spawned from the scenario
seed, and every stream draws a fixed amount per frame, so changing e.g. the
drop probability leaves trajectories, jitter and embeddings untouched.
Boxes and confidences are rounded to 6 decimals and embeddings stored as
float32, which makes an in-memory bundle identical to one read back from disk.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .errors import InvalidConfigError
from .geometry import BBox, ScoredBox
from .metrics import MetricsReport, TrackRecord, evaluate
from .tracker import FrameInput, Tracker, TrackerConfig

MOTIONS = ("linear", "crossing", "sinusoidal-dance")
FALSE_POSITIVE = "false-positive"
SUBSAMPLE_RATIOS = (1.0, 0.5, 0.33)
_STREAMS = ("motion", "appearance", "jitter", "drop", "conf", "embed", "fp")
_DECIMALS = 6


@dataclass
class ScenarioConfig:
    num_agents: int = 10
    frames: int = 100
    arena: tuple[float, float] = (1920.0, 1080.0)
    motion: str = "linear"
    box_size: tuple[float, float] = (40.0, 100.0)
    appearance_gap: float = 0.3
    embed_dim: int = 128
    embed_noise_sigma: float = 0.05
    jitter_sigma: float = 2.0
    drop_prob: float = 0.05
    fp_rate: float = 0.5
    conf_range: tuple[float, float] = (0.5, 1.0)
    speed: float = 5.0
    # range of sinusoid periods, in frames, for the dance motion
    dance_period: tuple[float, float] = (10.0, 40.0)
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.motion not in MOTIONS:
            raise InvalidConfigError(f"motion must be one of {MOTIONS}, got {self.motion!r}")
        if int(self.num_agents) != self.num_agents or self.num_agents < 0:
            raise InvalidConfigError(f"num_agents must be a non-negative integer, got {self.num_agents!r}")
        if int(self.frames) != self.frames or self.frames < 2:
            raise InvalidConfigError(f"frames must be an integer >= 2, got {self.frames!r}")
        if int(self.embed_dim) != self.embed_dim or self.embed_dim < 1:
            raise InvalidConfigError(f"embed_dim must be a positive integer, got {self.embed_dim!r}")
        if not 0.0 <= self.appearance_gap < 1.0:
            raise InvalidConfigError(f"appearance_gap must lie in [0, 1), got {self.appearance_gap}")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise InvalidConfigError(f"drop_prob must lie in [0, 1], got {self.drop_prob}")
        lo, hi = self.conf_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise InvalidConfigError(f"conf_range must satisfy 0 <= low <= high <= 1, got {self.conf_range}")
        for name in ("embed_noise_sigma", "jitter_sigma", "fp_rate", "speed"):
            if not getattr(self, name) >= 0.0:
                raise InvalidConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        plo, phi = self.dance_period
        if not 0.0 < plo <= phi:
            raise InvalidConfigError(f"dance_period must satisfy 0 < low <= high, got {self.dance_period}")
        aw, ah = self.arena
        bw, bh = self.box_size
        if not (bw > 0 and bh > 0 and aw > bw and ah > bh):
            raise InvalidConfigError(f"box_size {self.box_size} must be positive and fit in arena {self.arena}")
        needed = self.num_agents + (1 if self.appearance_gap > 0 and self.num_agents > 1 else 0)
        if needed > self.embed_dim:
            raise InvalidConfigError(
                f"{self.num_agents} agents with appearance_gap {self.appearance_gap} need "
                f"embed_dim >= {needed}, got {self.embed_dim}")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class ScenarioBundle:
    gt: list[TrackRecord]
    frames: list[FrameInput]
    # per frame, per detection row: the gt id it came from or FALSE_POSITIVE
    provenance: list[list] = field(default_factory=list)
    config: ScenarioConfig | None = None

    @property
    def num_frames(self) -> int:
        return len(self.frames)


def _streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(len(_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(_STREAMS, children)}


def _reflect(p: np.ndarray, hi: float) -> np.ndarray:
    """Fold unbounded coordinates into ``[0, hi]`` as if bouncing off walls."""
    q = np.mod(p, 2.0 * hi)
    return np.where(q > hi, 2.0 * hi - q, q)


def _trajectories(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Top-left corners, ``(frames, agents, 2)``."""
    n, t = cfg.num_agents, cfg.frames
    aw, ah = cfg.arena
    bw, bh = cfg.box_size
    span = np.array([aw - bw, ah - bh])
    steps = np.arange(t, dtype=np.float64)[:, None, None]
    if cfg.motion == "linear":
        start = rng.uniform(0.0, 1.0, (n, 2)) * span
        heading = rng.uniform(0.0, 2 * np.pi, n)
        mag = cfg.speed * rng.uniform(0.5, 1.5, n)
        vel = np.stack([np.cos(heading), np.sin(heading)], axis=1) * mag[:, None]
        raw = start[None] + steps * vel[None]
    elif cfg.motion == "crossing":
        # pairs share a lane and walk toward each other, meeting mid-sequence
        raw = np.empty((t, n, 2))
        for p in range(0, n, 2):
            lane = rng.uniform(0.1, 0.9) * span[1]
            meet_x = rng.uniform(0.3, 0.7) * span[0]
            meet_t = rng.uniform(0.35, 0.65) * (t - 1)
            dy = rng.uniform(-0.1, 0.1) * bh
            v = cfg.speed * rng.uniform(0.8, 1.2)
            ts = steps[:, 0, 0]
            raw[:, p, 0] = meet_x + (ts - meet_t) * v
            raw[:, p, 1] = lane
            if p + 1 < n:
                raw[:, p + 1, 0] = meet_x - (ts - meet_t) * v
                raw[:, p + 1, 1] = lane + dy
    else:
        start = rng.uniform(0.0, 1.0, (n, 2)) * span
        amp = cfg.speed * rng.uniform(0.5, 1.5, (n, 2))
        omega = 2 * np.pi / rng.uniform(*cfg.dance_period, (n, 2))
        phase = rng.uniform(0.0, 2 * np.pi, (n, 2))
        # position is the integral of amp * sin(omega t + phase)
        raw = start[None] + amp[None] / omega[None] * (np.cos(phase[None]) - np.cos(omega[None] * steps + phase[None]))
    out = np.empty_like(raw)
    out[..., 0] = _reflect(raw[..., 0], span[0])
    out[..., 1] = _reflect(raw[..., 1], span[1])
    return out


def _prototypes(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors whose pairwise cosines all equal ``appearance_gap``.

    Orthonormal directions are mixed with one shared direction orthogonal to
    all of them.
    """
    n, d = cfg.num_agents, cfg.embed_dim
    if n == 0:
        return np.zeros((0, d))
    mix = cfg.appearance_gap if n > 1 else 0.0
    q, _ = np.linalg.qr(rng.standard_normal((d, n + (1 if mix > 0 else 0))))
    basis = q.T
    protos = basis[:n]
    if mix > 0:
        protos = np.sqrt(1.0 - mix) * protos + np.sqrt(mix) * basis[n][None]
    return protos / np.linalg.norm(protos, axis=1, keepdims=True)


def _round(a) -> np.ndarray:
    return np.round(np.asarray(a, dtype=np.float64), _DECIMALS)


def generate_scenario(config: ScenarioConfig) -> ScenarioBundle:
    cfg = config
    cfg.validate()
    rng = _streams(cfg.seed)
    n, t, d = cfg.num_agents, cfg.frames, cfg.embed_dim
    aw, ah = cfg.arena
    bw, bh = cfg.box_size
    corners = _round(_trajectories(cfg, rng["motion"]))
    protos = _prototypes(cfg, rng["appearance"])
    lo, hi = cfg.conf_range

    gt: list[TrackRecord] = []
    frames: list[FrameInput] = []
    provenance: list[list] = []
    for f in range(t):
        jit = rng["jitter"].standard_normal((n, 4)) * cfg.jitter_sigma
        keep = rng["drop"].uniform(0.0, 1.0, n) >= cfg.drop_prob
        conf = _round(rng["conf"].uniform(lo, hi, n))
        noise = rng["embed"].standard_normal((n, d)) * cfg.embed_noise_sigma
        fp_rng = rng["fp"]
        n_fp = int(fp_rng.poisson(cfg.fp_rate)) if cfg.fp_rate > 0 else 0
        fp_xy = fp_rng.uniform(0.0, 1.0, (n_fp, 2)) * [aw - bw, ah - bh]
        fp_conf = _round(fp_rng.uniform(lo, (lo + hi) / 2.0, n_fp))
        fp_emb = fp_rng.standard_normal((n_fp, d))

        dets: list[ScoredBox] = []
        embs = []
        prov: list = []
        for a in range(n):
            x, y = corners[f, a]
            gt.append(TrackRecord(f + 1, a + 1, BBox(float(x), float(y), bw, bh)))
            if not keep[a]:
                continue
            box = _round([x + jit[a, 0], y + jit[a, 1], bw + jit[a, 2], bh + jit[a, 3]])
            box[2:] = np.maximum(box[2:], 1.0)
            dets.append(ScoredBox(BBox(*map(float, box)), float(conf[a])))
            e = protos[a] + noise[a]
            embs.append(e / np.linalg.norm(e))
            prov.append(a + 1)
        for k in range(n_fp):
            box = _round([fp_xy[k, 0], fp_xy[k, 1], bw, bh])
            dets.append(ScoredBox(BBox(*map(float, box)), float(fp_conf[k])))
            embs.append(fp_emb[k] / np.linalg.norm(fp_emb[k]))
            prov.append(FALSE_POSITIVE)
        emb = np.asarray(embs, dtype=np.float32).astype(np.float64).reshape(len(dets), d)
        frames.append(FrameInput(f + 1, dets, emb))
        provenance.append(prov)
    return ScenarioBundle(gt, frames, provenance, cfg)


def subsample(bundle: ScenarioBundle, ratio: float) -> ScenarioBundle:
    """Keep every ``round(1 / ratio)``-th frame starting at the first, renumbered 1..n."""
    if not 0.0 < ratio <= 1.0:
        raise InvalidConfigError(f"ratio must lie in (0, 1], got {ratio}")
    k = int(round(1.0 / ratio))
    if k == 1:
        return bundle
    kept = [fr.frame_index for fr in bundle.frames if (fr.frame_index - 1) % k == 0]
    renumber = {f: i + 1 for i, f in enumerate(kept)}
    gt = [replace(r, frame=renumber[r.frame]) for r in bundle.gt if r.frame in renumber]
    frames = []
    provenance = []
    for fr, prov in zip(bundle.frames, bundle.provenance):
        if fr.frame_index in renumber:
            frames.append(FrameInput(renumber[fr.frame_index], list(fr.detections), fr.embeddings))
            provenance.append(list(prov))
    return ScenarioBundle(gt, frames, provenance, bundle.config)


def track_bundle(bundle: ScenarioBundle, config: TrackerConfig) -> list[TrackRecord]:
    tracker = Tracker(replace(config))
    out = []
    for frame in bundle.frames:
        for t in tracker.step(frame):
            out.append(TrackRecord(frame.frame_index, t.id, t.box, t.conf))
    return out


def run_and_score(bundle: ScenarioBundle, config: TrackerConfig, iou_threshold: float = 0.5) -> MetricsReport:
    return evaluate(bundle.gt, track_bundle(bundle, config), iou_threshold)


def sweep_delta(bundle: ScenarioBundle, config: TrackerConfig,
                deltas: Sequence[float] = tuple(np.round(np.linspace(0.0, 1.0, 11), 2))) -> list[tuple[float, MetricsReport]]:
    """Linear-fusion grid over ``delta``."""
    return [(float(dl), run_and_score(bundle, replace(config, fusion="linear", delta=float(dl))))
            for dl in deltas]
