"""Command-line entry point.

Subcommands: toygen, train, score, eval, ablate, gradcheck. Every run writes
one ``run_manifest.json`` into its output directory with the command, the
effective config, the seed, timestamps and output paths, which is enough to
reproduce the run. Exit codes: 0 success, 1 runtime or verification failure,
2 usage error. ``FFAD_SEED`` provides the seed when ``--seed`` is absent.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import checkpoint as ckpt_io
from .errors import FfadError
from .evaluator import (
    config_hash,
    default_ablation_grid,
    evaluate,
    run_ablation,
    write_report,
)
from .frames_io import IngestConfig, labels_path, load_labels, load_split
from .gradcheck import run_all
from .scorer import score_video, write_score_csv
from .toyworld import default_test_scenario, default_training_scenario, write_dataset
from .trainer import TrainConfig, load_config_file, train, train_config_from_mapping


def _env_seed() -> int:
    return int(os.environ.get("FFAD_SEED", "0"))


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace, t0: float, **extra) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": [a for a in sys.argv[1:]] if sys.argv else [],
        "args": {k: str(v) for k, v in vars(args).items() if k != "func"},
        "started_unix": t0,
        "finished_unix": time.time(),
        **extra,
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2))


def _build_train_config(args: argparse.Namespace) -> TrainConfig:
    mapping = load_config_file(args.config) if args.config else {}
    cfg = train_config_from_mapping(mapping)
    for item in args.set or []:
        key, _, value = item.partition("=")
        cfg = train_config_from_mapping({key: value}, cfg)
    if args.steps is not None:
        cfg = replace(cfg, max_steps=args.steps)
    seed = args.seed if args.seed is not None else _env_seed()
    cfg = replace(cfg, seed=seed)
    if getattr(args, "no_flow", False):
        cfg = replace(cfg, weights=replace(cfg.weights, flow=0.0))
    return cfg


def _ingest_from(cfg: TrainConfig) -> IngestConfig:
    return IngestConfig(resize_target=cfg.resize_target, color_mode=cfg.color_mode)


def cmd_toygen(args: argparse.Namespace) -> int:
    t0 = time.time()
    seed = args.seed if args.seed is not None else _env_seed()
    out = Path(args.out)
    train_scn = default_training_scenario(seed, duration=args.frames_train, canvas_size=args.canvas)
    test_scn = default_test_scenario(seed + 1, duration=args.frames_test, canvas_size=args.canvas)
    manifest_path = write_dataset(out, train_scn, test_scn)
    _write_manifest(
        out,
        "toygen",
        args,
        t0,
        seed=seed,
        outputs={"scenario_manifest": str(manifest_path), "root": str(out)},
    )
    print(f"wrote {args.frames_train} training and {args.frames_test} test frames under {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    t0 = time.time()
    cfg = _build_train_config(args)
    dataset = load_split(args.data, "train", _ingest_from(cfg))
    out = Path(args.out)
    ckpt_path = train(cfg, dataset, out, resume=args.resume)
    _write_manifest(
        out,
        "train",
        args,
        t0,
        seed=cfg.seed,
        config=dataclasses.asdict(cfg),
        config_hash=config_hash(cfg),
        motion_constraint=cfg.describe_motion_constraint(),
        outputs={
            "checkpoint": str(ckpt_path),
            "checkpoint_id": ckpt_io.checkpoint_id(ckpt_path),
            "train_log": str(out / "train_log.csv"),
        },
    )
    print(f"trained {cfg.max_steps} steps ({cfg.describe_motion_constraint()}); checkpoint: {ckpt_path}")
    return 0


def _load_eval_inputs(args: argparse.Namespace):
    gen, ckpt = ckpt_io.load_generator(args.checkpoint)
    train_cfg = ckpt.extra.get("train_config", {})
    ingest = IngestConfig(
        resize_target=int(train_cfg.get("resize_target", 256)),
        color_mode=str(train_cfg.get("color_mode", "auto")),
    )
    videos = load_split(args.data, "test", ingest)
    return gen, ckpt, videos


def cmd_score(args: argparse.Namespace) -> int:
    t0 = time.time()
    gen, _, videos = _load_eval_inputs(args)
    out = Path(args.out)
    outputs = {}
    for seq in videos:
        series = score_video(gen, seq)
        path = out / f"scores_{seq.video_id}.csv"
        write_score_csv(path, series)
        outputs[seq.video_id] = str(path)
    _write_manifest(out, "score", args, t0, outputs=outputs)
    print(f"scored {len(videos)} videos into {out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    t0 = time.time()
    gen, ckpt, videos = _load_eval_inputs(args)
    labels_root = Path(args.labels) if args.labels else Path(args.data)
    per_video = []
    for seq in videos:
        lp = labels_path(labels_root, seq.video_id)
        per_video.append((score_video(gen, seq), load_labels(lp)))
    snapshot = ckpt.extra.get("train_config")
    cfg_hash = config_hash(_snapshot_to_config(snapshot)) if snapshot else ""
    report = evaluate(
        per_video,
        config_hash=cfg_hash,
        checkpoint_id=ckpt_io.checkpoint_id(args.checkpoint),
        notes=f"checkpoint step {ckpt.step}",
    )
    out = Path(args.report_out)
    write_report(report, out)
    outputs = {"report": str(out / "report.txt"), "report_csv": str(out / "report.csv")}
    if args.plots:
        from . import plots
        from .evaluator import concatenate

        scores, labels = concatenate(per_video)
        outputs["roc_png"] = str(plots.save_roc(scores, labels, report.auc, out / "roc.png"))
        for series, lab in per_video:
            p = plots.save_score_curve(series, lab, out / f"scores_{series.video_id}.png")
            outputs[f"curve_{series.video_id}"] = str(p)
    _write_manifest(out, "eval", args, t0, outputs=outputs)
    print(f"AUC={report.auc:.4f}")
    print(f"delta_s={report.delta_s:.4f}")
    return 0


def _snapshot_to_config(snapshot: dict) -> TrainConfig:
    from .flow import FlowEstimatorSpec
    from .losses import LossWeights

    snap = dict(snapshot)
    weights = LossWeights(**snap.pop("weights"))
    flow_spec = FlowEstimatorSpec(**snap.pop("flow_spec"))
    return TrainConfig(weights=weights, flow_spec=flow_spec, **snap)


def cmd_ablate(args: argparse.Namespace) -> int:
    t0 = time.time()
    cfg = _build_train_config(args)
    train_videos = load_split(args.data, "train", _ingest_from(cfg))
    test_videos = load_split(args.data, "test", _ingest_from(cfg))
    test_items = [(seq, load_labels(labels_path(Path(args.data), seq.video_id))) for seq in test_videos]
    out = Path(args.out)
    reports = run_ablation(default_ablation_grid(), cfg, train_videos, test_items, out)
    for r in reports:
        print(f"{r.variant:36s} AUC={r.auc:.4f} gap={r.delta_s:.4f}")
    outputs = {"table": str(out / "ablation.csv")}
    if args.plots:
        from . import plots

        outputs["bars_png"] = str(plots.save_ablation_bars(reports, out / "ablation.png"))
    _write_manifest(out, "ablate", args, t0, seed=cfg.seed, outputs=outputs)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_all(corrupt=args.corrupt)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:24s} max_rel_error={r.max_rel_error:.3e} threshold={r.threshold:.0e} {status}")
    if failed:
        print(f"FAILED: {', '.join(r.name for r in failed)}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ffad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toygen", help="generate the toy crossroad dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--frames-train", type=int, default=210)
    p.add_argument("--frames-test", type=int, default=1242)
    p.add_argument("--canvas", type=int, default=256)
    p.set_defaults(func=cmd_toygen)

    p = sub.add_parser("train", help="train the future-frame model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override (wins over file)")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-flow", action="store_true", help="drop the motion constraint (sets its weight to 0)")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="write per-video score CSVs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="frame-level AUC and score gap")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--labels", default=None, help="root containing labels/ (default: --data)")
    p.add_argument("--report-out", required=True)
    p.add_argument("--plots", action="store_true", help="write ROC and score-curve images")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate the four-loss-variant grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference verification of all loss gradients")
    p.add_argument("--corrupt", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FfadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
