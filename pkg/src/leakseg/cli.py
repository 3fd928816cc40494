"""Command line interface.

Subcommands: run (one config, one dataset), sweep (sweep spec file), synth
(emit the fixture suite), presets (list or run ablation presets), eval (score
externally produced mask directories against ground truth).

Every flat config key is exposed as a CLI flag of the same name
(e.g. --detect.tau_vlm 0.09) and overrides both defaults and --config.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import LeaksegError, load_clip, load_manifest, read_mask
from .evaluation import VideoMetrics, aggregate, frame_confusion
from .pipeline import (DatasetResult, PipelineError, VideoRow, ablation_presets,
                       config_from_file, config_registry, default_config,
                       parse_sweep_file, per_video_csv, report_csv, run_dataset,
                       run_sweep, set_config_value, validate_config)
from .synthgen import write_suite

_REGISTRY = config_registry()


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for key in sorted(_REGISTRY):
        group.add_argument(f"--{key}", dest=_dest(key), metavar="VALUE")


def _dest(key: str) -> str:
    return "cfg__" + key.replace(".", "__")


def _collect_overrides(args: argparse.Namespace) -> dict[str, str]:
    overrides = {}
    for key in _REGISTRY:
        value = getattr(args, _dest(key), None)
        if value is not None:
            overrides[key] = value
    return overrides


def _build_config(args: argparse.Namespace):
    cfg = config_from_file(args.config) if args.config else default_config()
    for key, value in _collect_overrides(args).items():
        set_config_value(cfg, key, value)
    validate_config(cfg)
    return cfg


def _write_reports(results: list[DatasetResult], out_dir: str | None) -> None:
    report = report_csv(results)
    sys.stdout.write(report)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report)
        (out / "per_video.csv").write_text(per_video_csv(results))


def _cmd_run(args) -> int:
    cfg = _build_config(args)
    manifest_path = args.manifest or cfg.dataset.manifest
    if not manifest_path:
        raise PipelineError("no manifest given (--manifest or dataset.manifest)")
    manifest = load_manifest(manifest_path)
    result = run_dataset(
        manifest, cfg, label=args.label,
        allow_missing_gt=args.allow_missing_gt, dump_dir=args.dump_dir,
    )
    _write_reports([result], args.out)
    return 0


def _cmd_sweep(args) -> int:
    base = config_from_file(args.config) if args.config else default_config()
    spec = parse_sweep_file(args.spec, base=base)
    manifest = load_manifest(args.manifest)
    results = run_sweep(spec, manifest, allow_missing_gt=args.allow_missing_gt)
    _write_reports(results, args.out)
    return 0


def _cmd_synth(args) -> int:
    manifest_path = write_suite(args.out, limit=args.limit)
    print(f"wrote fixture suite manifest: {manifest_path}")
    return 0


def _cmd_presets(args) -> int:
    presets = ablation_presets()
    if not args.run:
        for name, cfg in presets:
            stages = []
            stages.append("bgs" if cfg.bgs.enabled else "-")
            stages.append("vlm" if cfg.detect.enabled else "-")
            stages.append("temporal" if cfg.detect.enabled and cfg.temporal.enabled
                          else "-")
            seg = cfg.segment.mode if cfg.detect.enabled else "none"
            tau = f"tau={cfg.detect.tau_vlm}" if cfg.detect.enabled else "tau=-"
            print(f"{name:16s} {'+'.join(stages):20s} seg={seg:12s} {tau}")
        return 0
    by_name = dict(presets)
    if args.run not in by_name:
        raise PipelineError(f"unknown preset {args.run!r}; "
                            f"choose from {', '.join(n for n, _ in presets)}")
    if not args.manifest:
        raise PipelineError("--manifest is required with --run")
    cfg = by_name[args.run]
    for key, value in _collect_overrides(args).items():
        set_config_value(cfg, key, value)
    validate_config(cfg)
    manifest = load_manifest(args.manifest)
    result = run_dataset(manifest, cfg, label=args.run,
                         allow_missing_gt=args.allow_missing_gt,
                         dump_dir=args.dump_dir)
    _write_reports([result], args.out)
    return 0


def _cmd_eval(args) -> int:
    cfg = _build_config(args)
    manifest = load_manifest(args.manifest)
    pred_root = Path(args.pred)
    rows: list[VideoRow] = []
    for entry in manifest.active_entries():
        clip = load_clip(manifest.root, entry, gt_threshold=cfg.eval.gt_threshold)
        if clip.gt is None:
            raise PipelineError(f"{entry.id}: no ground truth to score against")
        mask_dir = pred_root / entry.id
        if (mask_dir / "masks").is_dir():  # accept the --dump-dir layout too
            mask_dir = mask_dir / "masks"
        files = sorted(mask_dir.glob("*.png"))
        if not files:
            raise PipelineError(f"{entry.id}: no prediction masks under {mask_dir}")
        metrics = VideoMetrics()
        for path in files:
            try:
                idx = int(path.stem)
            except ValueError:
                raise PipelineError(
                    f"{entry.id}: mask filename {path.name} is not a frame index"
                ) from None
            if idx >= len(clip.gt):
                raise PipelineError(f"{entry.id}: mask {path.name} has no gt frame")
            pred = read_mask(path)
            tp, fp, fn, (pred_pos, gt_pos) = frame_confusion(pred, clip.gt[idx])
            metrics.add(tp, fp, fn, pred_pos, gt_pos)
        rows.append(VideoRow(entry.id, clip.has_interference, metrics))
    reports = aggregate([(r.metrics, r.has_interference) for r in rows])
    result = DatasetResult(label=args.label, rows=rows, reports=reports)
    _write_reports([result], args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leakseg",
        description="Gas-leak video segmentation pipeline and benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration over a dataset")
    p_run.add_argument("--manifest", help="dataset manifest path")
    p_run.add_argument("--config", help="flat key=value config file")
    p_run.add_argument("--label", default="run", help="config label in reports")
    p_run.add_argument("--out", help="directory for report.csv/per_video.csv")
    p_run.add_argument("--dump-dir", help="dump per-frame masks and boxes here")
    p_run.add_argument("--allow-missing-gt", action="store_true",
                       help="skip metrics for clips without ground truth")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("--spec", required=True, help="sweep spec file")
    p_sweep.add_argument("--manifest", required=True)
    p_sweep.add_argument("--config", help="base config file")
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--allow-missing-gt", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_synth = sub.add_parser("synth", help="emit the synthetic fixture suite")
    p_synth.add_argument("--out", required=True, help="dataset output directory")
    p_synth.add_argument("--limit", type=int, help="emit only the first N clips")
    p_synth.set_defaults(func=_cmd_synth)

    p_presets = sub.add_parser("presets", help="list or run ablation presets")
    p_presets.add_argument("--run", help="preset name to run")
    p_presets.add_argument("--manifest")
    p_presets.add_argument("--out")
    p_presets.add_argument("--dump-dir")
    p_presets.add_argument("--allow-missing-gt", action="store_true")
    _add_config_flags(p_presets)
    p_presets.set_defaults(func=_cmd_presets)

    p_eval = sub.add_parser("eval", help="score external mask directories")
    p_eval.add_argument("--pred", required=True,
                        help="root of per-video prediction mask directories")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--config")
    p_eval.add_argument("--label", default="external")
    p_eval.add_argument("--out")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LeaksegError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
