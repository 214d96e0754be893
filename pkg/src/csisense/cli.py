"""Command-line front end: synth, run, plot, inspect.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from .errors import CsisenseError, DataError, NumericError, UsageError
from .files import (DatasetManifest, config_hash, read_trace, write_image,
                    write_report)
from .learn import (KFold, LeaveGroupOut, TrainSubsetScaling, TwoStage,
                    cross_validate)
from .pipeline import PipelineConfig, build_feature_set, extract_stream
from .synth import SynthConfig, build_dataset
from . import features

__all__ = ["main"]


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _pipeline_config(args) -> PipelineConfig:
    doc = _load_json(args.config) if args.config else {}
    cfg = PipelineConfig.from_dict(doc)
    if getattr(args, "pipeline", None):
        cfg = cfg.with_shorthand(args.pipeline)
    if args.seed is not None:
        cfg = PipelineConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    return cfg


def _protocol_from_name(name: str, cfg: PipelineConfig, k: int):
    if name == "kfold":
        return KFold(k=k, target=cfg.target)
    if name == "leave-room-out":
        return LeaveGroupOut(group="room", target=cfg.target)
    if name == "leave-location-out":
        return LeaveGroupOut(group="location", target=cfg.target)
    if name == "two-stage":
        return TwoStage(k=k, target=cfg.target)
    if name.startswith("scaling-"):
        try:
            n_train = int(name.split("-", 1)[1])
        except ValueError:
            raise UsageError(f"bad scaling protocol {name!r}; use scaling-<n>") from None
        return TrainSubsetScaling(n_train=n_train, target=cfg.target)
    raise UsageError(f"unknown protocol {name!r}: kfold, leave-room-out, "
                     f"leave-location-out, two-stage, scaling-<n>")


def cmd_synth(args) -> int:
    doc = _load_json(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = SynthConfig.from_dict(doc)
    os.makedirs(args.out, exist_ok=True)
    manifest = build_dataset(cfg, args.out)
    manifest.save(os.path.join(args.out, "manifest.json"))
    if not manifest.entries:
        print("warning: zero repetitions, wrote an empty manifest", file=sys.stderr)
    print(f"wrote {len(manifest.entries)} traces to {args.out}")
    return 0


def cmd_run(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    if not manifest.entries:
        raise DataError(f"manifest {args.manifest} has no entries")
    cfg = _pipeline_config(args)
    protocol = _protocol_from_name(args.protocol, cfg, args.k)
    base_dir = os.path.dirname(os.path.abspath(args.manifest))
    cache_dir = os.environ.get("CSISENSE_CACHE") or None
    dataset = build_feature_set(manifest, base_dir, cfg, jobs=args.jobs,
                                cache_dir=cache_dir)
    report = cross_validate(dataset, protocol, seed=cfg.seed, fusion=cfg.fusion,
                            reg_c=cfg.reg_c, bow_k=cfg.bow_k)

    os.makedirs(args.out, exist_ok=True)
    lines = [
        ("config_hash", config_hash(cfg.to_dict())),
        ("protocol", report.protocol),
        ("seed", str(report.seed)),
        ("fusion", cfg.fusion),
        ("svd_scope", cfg.svd_scope),
        ("feature_kind", cfg.feature_kind),
        ("n_samples", str(int(report.confusion.sum()))),
        ("classes", ",".join(report.class_names)),
        ("accuracy", f"{report.accuracy:.6f}"),
    ]
    lines += [(f"fold {name}", f"{acc:.6f}")
              for name, acc in zip(report.fold_names, report.per_fold)]
    lines += [(f"confusion {cls}", ",".join(str(int(v)) for v in row))
              for cls, row in zip(report.class_names, report.confusion)]
    lines.append(("generated_at", datetime.datetime.now(datetime.timezone.utc).isoformat()))
    report_path = os.path.join(args.out, "report.txt")
    write_report(report_path, lines)

    denom = np.maximum(report.confusion.sum(axis=1, keepdims=True), 1)
    write_image(os.path.join(args.out, "confusion.pgm"),
                report.confusion / denom, scale=24)

    print(f"protocol {report.protocol}: accuracy {report.accuracy:.4f} "
          f"over {int(report.confusion.sum())} samples")
    for name, acc in zip(report.fold_names, report.per_fold):
        print(f"  fold {name}: {acc:.4f}")
    print(f"report written to {report_path}")
    return 0


def cmd_plot(args) -> int:
    trace = read_trace(args.trace)
    cfg = _pipeline_config(args)
    m = extract_stream(trace, cfg, stage=args.stage)
    img = features.to_image(m, cfg.image_h, cfg.image_w)
    write_image(args.out, img.pixels)
    print(f"wrote {args.stage} image of {args.trace} to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    if args.path.endswith(".json"):
        manifest = DatasetManifest.load(args.path)
        rooms = sorted({e.room_label for e in manifest.entries})
        actions = sorted({e.action_label for e in manifest.entries})
        persons = sorted({e.person_label for e in manifest.entries})
        locations = sorted({e.location_label for e in manifest.entries})
        print(f"entries: {len(manifest.entries)}")
        print(f"rooms: {','.join(rooms)}")
        print(f"locations: {','.join(locations)}")
        print(f"actions: {','.join(actions)}")
        print(f"persons: {','.join(persons)}")
    else:
        trace = read_trace(args.path)
        amp = np.abs(trace.gains)
        print(f"frames: {len(trace)}")
        print(f"pairs: {trace.n_pairs}")
        print(f"subcarriers: {trace.n_subcarriers}")
        print(f"nominal_rate: {trace.meta.nominal_rate}")
        print(f"span_s: {float(trace.timestamps[-1] - trace.timestamps[0]):.6f}")
        print(f"amplitude_mean: {amp.mean():.6f}")
        print(f"amplitude_std: {amp.std():.6f}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csisense",
                                     description="Wi-Fi CSI sensing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("config", help="synth config JSON")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="run an evaluation protocol")
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--config", default=None, help="pipeline config JSON")
    p_run.add_argument("--protocol", required=True)
    p_run.add_argument("--pipeline", default=None,
                       help="grid shorthand, e.g. svd120-1svm or none-4svm")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--k", type=int, default=10, help="folds for kfold protocols")
    p_run.set_defaults(func=cmd_run)

    p_plot = sub.add_parser("plot", help="render a trace stage as an image")
    p_plot.add_argument("trace")
    p_plot.add_argument("--stage", choices=["raw", "preprocessed", "denoised"],
                        default="preprocessed")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--config", default=None)
    p_plot.add_argument("--seed", type=int, default=None)
    p_plot.set_defaults(func=cmd_plot)

    p_inspect = sub.add_parser("inspect", help="print manifest or trace stats")
    p_inspect.add_argument("path")
    p_inspect.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CsisenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return UsageError.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NumericError.exit_code


if __name__ == "__main__":
    sys.exit(main())
