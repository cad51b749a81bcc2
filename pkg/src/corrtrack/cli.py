"""Command-line entry point.

Exit status: 0 on success, 2 when input, configuration or file content is
rejected, 1 on any other failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .config import ALL_KEYS, TRACKER_KEYS, RunConfig, _parse, build_run_config, parse_values, \
    read_key_values
from .errors import InvalidConfigError, ValidationError


def _add_overrides(p: argparse.ArgumentParser, keys) -> None:
    grp = p.add_argument_group("config overrides (same names as the config file keys)")
    for key in keys:
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        grp.add_argument(*flags, dest=f"kv_{key}", metavar="VALUE", default=None)


def _overrides(args) -> dict[str, object]:
    out = {}
    for key, kind in ALL_KEYS.items():
        raw = getattr(args, f"kv_{key}", None)
        if raw is not None:
            out[key] = _parse(key, raw, kind)
    return out


def _run_config(args, extra: dict | None = None) -> RunConfig:
    values = parse_values(read_key_values(args.config)) if getattr(args, "config", None) else {}
    values.update(_overrides(args))
    values.update(extra or {})
    return build_run_config(values)


def _print(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


# ---------------------------------------------------------------------------
# commands


def cmd_track(args) -> int:
    from .formats import load_sequence, write_results
    from .metrics import TrackRecord
    from .tracker import Tracker

    extra = {}
    if args.no_kalman:
        extra["use_kalman"] = False
    cfg = _run_config(args, extra)
    if cfg.tracker.fusion != "iou" and not args.embs:
        raise InvalidConfigError(f"--embs is required for fusion {cfg.tracker.fusion!r}")
    frames = load_sequence(args.dets, args.embs)
    tracker = Tracker(cfg.tracker)
    records = []
    for frame in frames:
        for t in tracker.step(frame):
            records.append(TrackRecord(frame.frame_index, t.id, t.box, t.conf))
    write_results(args.out, records)
    return 0


def cmd_eval(args) -> int:
    from .formats import read_tracks
    from .metrics import evaluate

    report = evaluate(read_tracks(args.gt), read_tracks(args.results), args.iou_thresh)
    _print(report.table())
    _print("\n")
    _print(report.summary_text())
    return 0


def cmd_simulate(args) -> int:
    from .formats import write_bundle
    from .sim import generate_scenario

    extra = {"seed": args.seed} if args.seed is not None else {}
    cfg = _run_config(args, extra)
    write_bundle(args.out, generate_scenario(cfg.scenario))
    return 0


def cmd_subsample(args) -> int:
    from .formats import read_bundle, write_bundle
    from .sim import subsample

    write_bundle(args.out, subsample(read_bundle(getattr(args, "in")), args.ratio))
    return 0


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InvalidConfigError(f"{what} must be comma-separated numbers, got {text!r}") from None


def cmd_ablate(args) -> int:
    from .metrics import merge_reports
    from .sim import generate_scenario, run_and_score, subsample
    from .tracker import FUSION_MODES, _FUSION_ALIASES

    values = parse_values(read_key_values(args.scenario))
    values.update(_overrides(args))
    base = build_run_config(values)
    modes = [_FUSION_ALIASES.get(m.strip(), m.strip()) for m in args.modes.split(",") if m.strip()]
    for m in modes:
        if m not in FUSION_MODES:
            raise InvalidConfigError(f"unknown mode {m!r}; choose from {FUSION_MODES}")
    if args.seeds < 1:
        raise InvalidConfigError("--seeds must be at least 1")
    ratios = _floats(args.ratios, "--ratios")
    deltas = _floats(args.deltas, "--deltas") if args.deltas else [base.tracker.delta]
    kalman = {"on": [True], "off": [False], "both": [True, False],
              None: [base.tracker.use_kalman]}[args.kalman]

    variants = []
    for m in modes:
        for dl in (deltas if m == "linear" else [base.tracker.delta]):
            for k in kalman:
                variants.append((m, dl, k, replace(base.tracker, fusion=m, delta=dl, use_kalman=k)))
    reports = {(v[:3], r): [] for v in variants for r in ratios}
    for i in range(args.seeds):
        bundle = generate_scenario(replace(base.scenario, seed=base.scenario.seed + i))
        for r in ratios:
            sub = subsample(bundle, r)
            for v in variants:
                reports[(v[:3], r)].append(run_and_score(sub, v[3], base.iou_threshold))

    head = (f"{'mode':<14} {'kalman':>6} {'ratio':>6} {'MOTA':>8} {'IDF1':>8} {'HOTA':>8} "
            f"{'DetA':>8} {'AssA':>8} {'IDsw':>6} {'FP':>6} {'FN':>6}")
    lines = [head]
    for v in variants:
        m, dl, k = v[:3]
        label = f"linear({dl:g})" if m == "linear" else m
        for r in ratios:
            rep = merge_reports(reports[(v[:3], r)])
            lines.append(f"{label:<14} {('on' if k else 'off'):>6} {r:>6.2f} {rep.mota:>8.4f} {rep.idf1:>8.4f} "
                         f"{rep.hota:>8.4f} {rep.deta:>8.4f} {rep.assa:>8.4f} {rep.id_switches:>6d} "
                         f"{rep.fp:>6d} {rep.fn:>6d}")
    _print("\n".join(lines) + "\n")
    return 0


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise InvalidConfigError(f"--size must look like HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise InvalidConfigError(f"--size must be positive, got {text!r}")
    return h, w


def cmd_losscheck(args) -> int:
    from .training import finite_difference_error, logistic_mse_value, random_loss_instance

    h, w = _size(args.size)
    if args.templates < 1:
        raise InvalidConfigError("--templates must be at least 1")
    pred, gt = random_loss_instance(np.random.default_rng(args.seed), h, w, args.templates, args.dim)
    _print(f"loss={logistic_mse_value(pred, gt):.12g}\n"
           f"max_grad_rel_error={finite_difference_error(pred, gt, args.step):.3e}\n")
    return 0


def cmd_bench(args) -> int:
    from .bench import association_latency, percentiles
    from .kernels import BACKEND

    if args.frames < 1:
        raise InvalidConfigError("--frames must be at least 1")
    ms = association_latency(args.tracks, args.dets, args.frames, args.dim, args.seed)
    p = percentiles(ms)
    _print(f"backend={BACKEND}\ntracks={args.tracks}\ndets={args.dets}\ndim={args.dim}\n"
           f"frames={ms.size}\np50_ms={p['p50']:.3f}\np95_ms={p['p95']:.3f}\np99_ms={p['p99']:.3f}\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corrtrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker over detection and embedding files")
    p.add_argument("--dets", required=True)
    p.add_argument("--embs")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--no-kalman", action="store_true")
    _add_overrides(p, TRACKER_KEYS)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a results file against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--iou-thresh", "--iou_threshold", dest="iou_thresh", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="write a synthetic scenario bundle")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    _add_overrides(p, [k for k in ALL_KEYS if k != "seed"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("subsample", help="keep every k-th frame of a bundle")
    p.add_argument("--in", required=True)
    p.add_argument("--ratio", type=float, required=True, choices=[1.0, 0.5, 0.33])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("ablate", help="compare fusion modes over seeded scenarios")
    p.add_argument("--scenario", required=True)
    p.add_argument("--modes", default="product,linear,iou")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--ratios", default="1.0")
    p.add_argument("--deltas", default=None, help="delta grid for linear mode, e.g. 0.1,0.3,0.5")
    p.add_argument("--kalman", choices=["on", "off", "both"], default=None,
                   help="default: the config's use_kalman")
    _add_overrides(p, [k for k in ALL_KEYS if k not in ("fusion", "delta", "use_kalman")])
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("losscheck", help="loss value and finite-difference gradient check")
    p.add_argument("--size", default="16x16")
    p.add_argument("--templates", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--step", type=float, default=1e-4)
    p.set_defaults(func=cmd_losscheck)

    p = sub.add_parser("bench", help="per-frame association latency percentiles")
    p.add_argument("--tracks", type=int, default=200)
    p.add_argument("--dets", type=int, default=200)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort handler for the exit code contract
        sys.stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
