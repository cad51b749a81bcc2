"""Flat ``key=value`` run configuration.

One file holds the tracker settings, the metric IoU threshold and the
scenario settings. Keys are the field names of :class:`TrackerConfig` and
:class:`ScenarioConfig` plus ``iou_threshold``; ``seed`` is the scenario seed.
``#`` starts a comment, on its own line or after a value. Tuples are comma separated and
floats are written with 6 decimals.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

from .errors import InvalidConfigError, ParseError
from .sim import ScenarioConfig
from .tracker import TrackerConfig

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_key_values(path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("file not found", path) from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ParseError(f"expected key=value, got {raw!r}", path, lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", path, lineno)
        out[key] = value.strip()
    return out


def write_key_values(path, kv: Mapping[str, object]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in kv.items():
            fh.write(f"{k}={format_value(v)}\n")


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6f}"
    if isinstance(v, (tuple, list)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def _parse(key: str, raw: str, kind: str):
    """Convert ``raw`` to the annotated field type ``kind``."""
    try:
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float | None":
            return None if raw.lower() in ("", "none") else float(raw)
        if kind.startswith("tuple["):
            parts = [p.strip() for p in raw.split(",")]
            n = kind.count(",") + 1
            if len(parts) != n:
                raise ValueError(raw)
            return tuple(float(p) for p in parts)
        return raw
    except ValueError:
        raise InvalidConfigError(f"bad value for {key}: {raw!r} (expected {kind})") from None


def _types(cls) -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(cls)}


TRACKER_KEYS = _types(TrackerConfig)
SCENARIO_KEYS = _types(ScenarioConfig)
METRIC_KEYS = {"iou_threshold": "float"}
ALL_KEYS = {**TRACKER_KEYS, **SCENARIO_KEYS, **METRIC_KEYS}


@dataclass
class RunConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    iou_threshold: float = 0.5

    @property
    def seed(self) -> int:
        return self.scenario.seed

    def to_kv(self) -> dict[str, object]:
        kv: dict[str, object] = {}
        kv.update(asdict(self.tracker))
        kv.update(scenario_to_kv(self.scenario))
        kv["iou_threshold"] = self.iou_threshold
        return kv


def parse_values(raw: Mapping[str, str]) -> dict[str, object]:
    out = {}
    for k, v in raw.items():
        if k not in ALL_KEYS:
            raise InvalidConfigError(f"unknown config key {k!r}")
        out[k] = _parse(k, v, ALL_KEYS[k])
    return out


def build_run_config(values: Mapping[str, object], base: RunConfig | None = None) -> RunConfig:
    """Apply typed ``values`` on top of ``base`` (defaults when omitted)."""
    base = base or RunConfig()
    unknown = set(values) - set(ALL_KEYS)
    if unknown:
        raise InvalidConfigError(f"unknown config keys {sorted(unknown)}")
    tk = {k: v for k, v in values.items() if k in TRACKER_KEYS}
    sk = {k: v for k, v in values.items() if k in SCENARIO_KEYS}
    tracker_kw = asdict(base.tracker)
    if "tau_high" in tk and "new_track_min_conf" not in tk and \
            base.tracker.new_track_min_conf == base.tracker.tau_high:
        # keep "same as tau_high" when only tau_high moves
        tracker_kw["new_track_min_conf"] = None
    tracker_kw.update(tk)
    try:
        tracker = TrackerConfig(**tracker_kw)
        scenario = replace(base.scenario, **sk) if sk else base.scenario
    except TypeError as exc:
        raise InvalidConfigError(str(exc)) from None
    iou = float(values.get("iou_threshold", base.iou_threshold))
    if not 0.0 < iou <= 1.0:
        raise InvalidConfigError(f"iou_threshold must lie in (0, 1], got {iou}")
    return RunConfig(tracker, scenario, iou)


def load_run_config(path=None, overrides: Mapping[str, object] | None = None) -> RunConfig:
    values = parse_values(read_key_values(path)) if path is not None else {}
    values.update(overrides or {})
    return build_run_config(values)


def scenario_to_kv(cfg: ScenarioConfig) -> dict[str, object]:
    return asdict(cfg)


def scenario_from_kv(raw: Mapping[str, str]) -> ScenarioConfig:
    values = parse_values(raw)
    extra = set(values) - set(SCENARIO_KEYS)
    if extra:
        raise InvalidConfigError(f"not scenario keys: {sorted(extra)}")
    return ScenarioConfig(**values)
