"""MOTChallenge text files, the TCBE binary embedding format and scenario
bundle directories.

Text rows are ``frame,id,x,y,w,h,conf,a,b,c`` with floats written to 6
decimals. TCBE is little-endian: magic ``TCBE``, version u16, dim u16, record
count u32, then ``count`` records of (frame u32, det_index u32, dim x f32).
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AlignmentError, FormatError, InvalidInputError, ParseError
from .geometry import BBox, ScoredBox
from .metrics import TrackRecord
from .tracker import FrameInput

TCBE_MAGIC = b"TCBE"
TCBE_VERSION = 1
_HEADER = struct.Struct("<4sHHI")
_MOT_FIELDS = 10


@dataclass
class SequenceMeta:
    name: str = "sequence"
    fps: float = 30.0
    frame_count: int = 0
    image_size: tuple[int, int] = (1920, 1080)
    embedding_dim: int = 0

    def __post_init__(self):
        if not self.fps > 0:
            raise InvalidInputError(f"fps must be positive, got {self.fps}")
        if self.frame_count < 0 or self.embedding_dim < 0:
            raise InvalidInputError("frame_count and embedding_dim must be non-negative")


@dataclass
class EmbeddingStream:
    dim: int
    frames: np.ndarray
    indices: np.ndarray
    vectors: np.ndarray   # (count, dim) float32

    def __len__(self) -> int:
        return int(self.frames.size)


def _f6(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _open_write(path):
    try:
        return open(path, "w", encoding="ascii", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# MOT text rows


def _parse_rows(path) -> list[tuple[int, list[str]]]:
    try:
        text = Path(path).read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise ParseError("file is not ASCII text", path) from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != _MOT_FIELDS:
            raise ParseError(f"expected {_MOT_FIELDS} fields, got {len(parts)}", path, lineno)
        rows.append((lineno, parts))
    return rows


def _frame(tok: str, path, lineno: int) -> int:
    try:
        f = int(tok)
    except ValueError:
        raise ParseError(f"frame {tok!r} is not an integer", path, lineno) from None
    if f < 1:
        raise ParseError(f"frame must be >= 1, got {f}", path, lineno)
    return f


def _floats(toks: Sequence[str], path, lineno: int) -> list[float]:
    try:
        vals = [float(t) for t in toks]
    except ValueError:
        raise ParseError(f"non-numeric field in {toks}", path, lineno) from None
    if not all(math.isfinite(v) for v in vals):
        raise ParseError(f"non-finite field in {toks}", path, lineno)
    return vals


def _box_conf(parts, path, lineno) -> tuple[BBox, float]:
    x, y, w, h, conf = _floats(parts[2:7], path, lineno)
    if w <= 0 or h <= 0:
        raise ParseError(f"box needs positive width and height, got w={w} h={h}", path, lineno)
    if not 0.0 <= conf <= 1.0:
        raise ParseError(f"confidence {conf} outside [0, 1]", path, lineno)
    return BBox(x, y, w, h), conf


def read_detections(path) -> dict[int, list[ScoredBox]]:
    """Detections grouped by frame (ascending), in-file order kept within a frame."""
    out: dict[int, list[ScoredBox]] = {}
    for lineno, parts in _parse_rows(path):
        f = _frame(parts[0], path, lineno)
        _floats(parts[1:2] + parts[7:], path, lineno)
        box, conf = _box_conf(parts, path, lineno)
        out.setdefault(f, []).append(ScoredBox(box, conf))
    return dict(sorted(out.items()))


def write_detections(path, detections: Mapping[int, Sequence[ScoredBox]]) -> None:
    """One row per detection; the confidence column holds the fused score."""
    with _open_write(path) as fh:
        for f in sorted(detections):
            for d in detections[f]:
                b = d.box
                fh.write(f"{int(f)},-1,{_f6(b.x)},{_f6(b.y)},{_f6(b.w)},{_f6(b.h)},{_f6(d.fused)},-1,-1,-1\n")


def read_tracks(path) -> list[TrackRecord]:
    """Ground-truth or result rows as :class:`TrackRecord` (ids must be integers)."""
    out = []
    for lineno, parts in _parse_rows(path):
        f = _frame(parts[0], path, lineno)
        try:
            tid = int(parts[1])
        except ValueError:
            raise ParseError(f"track id {parts[1]!r} is not an integer", path, lineno) from None
        _floats(parts[7:], path, lineno)
        box, conf = _box_conf(parts, path, lineno)
        out.append(TrackRecord(f, tid, box, conf))
    return out


def write_results(path, records: Iterable[TrackRecord]) -> None:
    """Rows sorted by (frame, id) with 6-decimal floats; byte-deterministic."""
    recs = sorted(records, key=lambda r: (int(r.frame), int(r.id)))
    with _open_write(path) as fh:
        for r in recs:
            b = r.box
            fh.write(f"{int(r.frame)},{int(r.id)},{_f6(b.x)},{_f6(b.y)},{_f6(b.w)},{_f6(b.h)},"
                     f"{_f6(r.conf)},-1,-1,-1\n")


# ---------------------------------------------------------------------------
# TCBE embeddings


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("frame", "<u4"), ("index", "<u4"), ("vector", "<f4", (dim,))])


def write_embeddings(path, embeddings: Mapping[int, np.ndarray], dim: int | None = None) -> None:
    """``embeddings[frame]`` is ``(n, dim)``; row ``i`` pairs with detection ``i``.

    ``dim`` only matters when there are no rows to infer it from.
    """
    dims = {np.asarray(e).shape[1] for e in embeddings.values() if np.asarray(e).shape[0]}
    if dim is not None:
        dims.add(int(dim))
    if len(dims) > 1:
        raise InvalidInputError(f"mixed embedding dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0
    if dim > 0xFFFF:
        raise InvalidInputError(f"dimension {dim} does not fit in u16")
    chunks = []
    for f in sorted(embeddings):
        e = np.asarray(embeddings[f])
        if e.shape[0] == 0:
            continue
        rec = np.zeros(e.shape[0], dtype=_record_dtype(dim))
        rec["frame"] = f
        rec["index"] = np.arange(e.shape[0])
        rec["vector"] = e.astype("<f4")
        chunks.append(rec)
    body = np.concatenate(chunks) if chunks else np.zeros(0, dtype=_record_dtype(dim))
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(TCBE_MAGIC, TCBE_VERSION, dim, body.size))
            fh.write(body.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def read_embeddings(path) -> EmbeddingStream:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, dim, count = _HEADER.unpack_from(data)
    if magic != TCBE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != TCBE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    dtype = _record_dtype(dim)
    expected = _HEADER.size + count * dtype.itemsize
    if len(data) != expected:
        raise FormatError(f"{path}: header promises {count} records ({expected} bytes), file has {len(data)}")
    rec = np.frombuffer(data, dtype=dtype, count=count, offset=_HEADER.size)
    return EmbeddingStream(dim, rec["frame"].astype(np.int64), rec["index"].astype(np.int64),
                           rec["vector"].astype(np.float32).reshape(count, dim))


def align_embeddings(stream: EmbeddingStream, detections: Mapping[int, Sequence]) -> dict[int, np.ndarray]:
    """Per-frame ``(n, dim)`` float64 arrays in detection row order."""
    n_det = sum(len(v) for v in detections.values())
    if len(stream) != n_det:
        raise AlignmentError(f"{len(stream)} embeddings for {n_det} detections")
    out = {f: np.full((len(d), stream.dim), np.nan) for f, d in detections.items()}
    filled = {f: np.zeros(len(d), dtype=bool) for f, d in detections.items()}
    for k in range(len(stream)):
        f, i = int(stream.frames[k]), int(stream.indices[k])
        if f not in out or i >= out[f].shape[0]:
            raise AlignmentError(f"embedding for frame {f} row {i} has no detection")
        if filled[f][i]:
            raise AlignmentError(f"duplicate embedding for frame {f} row {i}")
        filled[f][i] = True
        out[f][i] = stream.vectors[k]
    return out


def load_sequence(dets_path, embs_path=None, frame_count: int | None = None) -> list[FrameInput]:
    """Frames ``1..N`` as tracker input; frames without detections are empty.

    ``N`` is ``frame_count`` or, when not given, the last detection frame.
    """
    dets = read_detections(dets_path)
    embs = align_embeddings(read_embeddings(embs_path), dets) if embs_path is not None else None
    last = max(dets) if dets else 0
    n = last if frame_count is None else int(frame_count)
    if n < last:
        raise InvalidInputError(f"detections reach frame {last} beyond frame_count {n}")
    dim = None
    if embs_path is not None:
        dim = next((e.shape[1] for e in embs.values()), None)
    frames = []
    for f in range(1, n + 1):
        d = dets.get(f, [])
        e = None
        if embs is not None:
            e = embs.get(f, np.zeros((0, dim or 0)))
        frames.append(FrameInput(f, d, e))
    return frames


# ---------------------------------------------------------------------------
# sequence metadata and bundles


def write_meta(path, meta: SequenceMeta) -> None:
    with _open_write(path) as fh:
        fh.write(f"name={meta.name}\nfps={_f6(meta.fps)}\nframe_count={meta.frame_count}\n"
                 f"image_width={meta.image_size[0]}\nimage_height={meta.image_size[1]}\n"
                 f"embedding_dim={meta.embedding_dim}\n")


def read_meta(path) -> SequenceMeta:
    from .config import read_key_values

    kv = read_key_values(path)
    try:
        return SequenceMeta(
            name=kv.get("name", "sequence"),
            fps=float(kv.get("fps", 30.0)),
            frame_count=int(kv["frame_count"]),
            image_size=(int(kv.get("image_width", 1920)), int(kv.get("image_height", 1080))),
            embedding_dim=int(kv.get("embedding_dim", 0)),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad sequence metadata: {exc}", path) from None


BUNDLE_FILES = ("seqinfo.txt", "gt.txt", "det.txt", "emb.tcbe", "provenance.txt", "scenario.cfg")


def write_bundle(directory, bundle) -> None:
    from .config import write_key_values, scenario_to_kv

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    cfg = bundle.config
    dim = cfg.embed_dim if cfg is not None else next(
        (fr.embeddings.shape[1] for fr in bundle.frames if fr.embeddings is not None and fr.embeddings.size), 0)
    size = (int(cfg.arena[0]), int(cfg.arena[1])) if cfg is not None else (1920, 1080)
    write_meta(d / "seqinfo.txt", SequenceMeta("synthetic", 30.0, len(bundle.frames), size, dim))
    write_results(d / "gt.txt", bundle.gt)
    write_detections(d / "det.txt", {fr.frame_index: fr.detections for fr in bundle.frames})
    write_embeddings(d / "emb.tcbe", {fr.frame_index: (fr.embeddings if fr.embeddings is not None
                                                       else np.zeros((0, dim)))
                                      for fr in bundle.frames}, dim)
    with _open_write(d / "provenance.txt") as fh:
        for fr, prov in zip(bundle.frames, bundle.provenance):
            for i, src in enumerate(prov):
                fh.write(f"{fr.frame_index},{i},{-1 if isinstance(src, str) else int(src)}\n")
    if cfg is not None:
        write_key_values(d / "scenario.cfg", scenario_to_kv(cfg))


def read_bundle(directory):
    from .config import read_key_values, scenario_from_kv
    from .sim import FALSE_POSITIVE, ScenarioBundle

    d = Path(directory)
    if not d.is_dir():
        raise InvalidInputError(f"{d} is not a directory")
    meta = read_meta(d / "seqinfo.txt")
    frames = load_sequence(d / "det.txt", d / "emb.tcbe", meta.frame_count)
    provenance: list[list] = [[None] * len(fr.detections) for fr in frames]
    prov_path = d / "provenance.txt"
    if prov_path.exists():
        for lineno, line in enumerate(prov_path.read_text(encoding="ascii").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                f, i, src = (int(t) for t in line.split(","))
                provenance[f - 1][i] = FALSE_POSITIVE if src < 0 else src
            except (ValueError, IndexError):
                raise ParseError(f"bad provenance row {line!r}", prov_path, lineno) from None
    cfg_path = d / "scenario.cfg"
    cfg = scenario_from_kv(read_key_values(cfg_path)) if cfg_path.exists() else None
    return ScenarioBundle(read_tracks(d / "gt.txt"), frames, provenance, cfg)
