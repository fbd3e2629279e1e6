"""Command-line interface.

Subcommands: measure, score, score-i, attribute, bench-corruption, report.
Exit codes: 0 success, 1 input error, 2 numeric failure.  The measurement
cache directory is taken from $ANOSCORE_CACHE_DIR when set.
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
from pathlib import Path

from . import __version__
from .attribution import attribute, segment, write_attribution_outputs
from .complexity import TrajectoryConfig
from .corruption import DEFAULT_LEVELS, CorruptionBenchConfig, corruption_benchmark
from .harness import (
    RunConfig,
    measure_directory,
    read_measure_file,
    write_measure_file,
)
from .images import load_image
from .models import build_model, load_model_config
from .report import write_report
from .rng import seed_material
from .scores import anomaly_score, asi, mean_asi
from .types import InputError, NumericError
from .vulnerability import AttackConfig

MODE_ALIASES = {"2d": "2d", "complexity": "complexity_1d",
                "vulnerability": "vulnerability_1d"}


def _add_measure_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float, default=0.01,
                        help="noise-walk step magnitude (default 0.01)")
    parser.add_argument("--K", type=int, default=10,
                        help="noise-walk steps (default 10)")
    parser.add_argument("--alpha", type=float, default=0.01,
                        help="attack step size (default 0.01)")
    parser.add_argument("--delta", type=float, default=1e-6,
                        help="attack initial offset (default 1e-6)")
    parser.add_argument("--J", type=int, default=10,
                        help="attack steps (default 10)")
    parser.add_argument("--seed", type=int, default=0, help="global seed")


def cmd_measure(args) -> int:
    cfg = RunConfig(
        global_seed=args.seed,
        model_config=load_model_config(args.model),
        trajectory=TrajectoryConfig(epsilon=args.epsilon, K=args.K),
        attack=AttackConfig(alpha=args.alpha, delta=args.delta, J=args.J),
        workers=args.workers,
    )
    result = measure_directory(args.images, cfg, cache_dir=args.cache_dir)
    name = args.name or Path(args.images).name
    write_measure_file(args.out, result, cfg, dataset_name=name,
                       source_dir=str(args.images))
    print(f"wrote {len(result['records'])} records to {args.out} "
          f"(computed {result['computed']}, cached {result['cached']})")
    if result["skips"]:
        for skip in result["skips"]:
            print(f"skipped {skip['image_id']}: {skip['reason']}", file=sys.stderr)
        return 1
    return 0


def cmd_score(args) -> int:
    real_header, real = read_measure_file(args.real)
    gen_header, generated = read_measure_file(args.gen)
    result = anomaly_score(real, generated, mode=MODE_ALIASES[args.mode],
                           combine=args.combine)
    payload = {
        "kind": "anoscore-score",
        "tool_version": __version__,
        "value": result.value,
        "mode": result.mode,
        "combine": result.combine,
        "n_real": result.n_real,
        "n_generated": result.n_generated,
        "params_hash": real[0].params_hash,
        "model_id": real[0].model_id,
        "real": real_header.get("dataset"),
        "generated": gen_header.get("dataset"),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_score_i(args) -> int:
    _, records = read_measure_file(args.measures)
    if args.mean:
        print(json.dumps({"mean_asi": mean_asi(records), "n": len(records)}))
        return 0
    for record in records:
        print(json.dumps({"image_id": record.image_id, "asi": asi(record)}))
    return 0


def cmd_attribute(args) -> int:
    model = build_model(load_model_config(args.model))
    x = load_image(args.image, Path(args.image).name)
    seg = segment(x, args.segments)
    cfg = AttackConfig(alpha=args.alpha, delta=args.delta, J=args.J)
    material = seed_material(args.seed, x.id, "attribution")
    amap = attribute(model, x, seg, cfg, trials=args.trials,
                     min_sel=args.min_sel, max_sel=args.max_sel,
                     seed_material=material)
    paths = write_attribution_outputs(
        args.out, Path(args.image).stem, x, seg, amap,
        seed_label=f"seed={args.seed}")
    print(json.dumps({"segments": seg.S, "trials": amap.trials,
                      "degenerate": amap.degenerate, **paths}))
    return 0


def cmd_bench_corruption(args) -> int:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    levels = tuple(raw.pop("levels", DEFAULT_LEVELS))
    if "trajectory" in raw:
        raw["trajectory"] = TrajectoryConfig(**raw["trajectory"])
    if "attack" in raw:
        raw["attack"] = AttackConfig(**raw["attack"])
    if "image_shape" in raw:
        raw["image_shape"] = tuple(raw["image_shape"])
    cfg = CorruptionBenchConfig(**raw)
    report = corruption_benchmark(cfg, levels=levels)
    print(json.dumps({
        "anomaly_scores": report["anomaly_scores"],
        "strictly_increasing": report["strictly_increasing"],
        "vulnerability_one_tailed_p": report["vulnerability_one_tailed_p"],
        "mean_asi_one_tailed_p": report["mean_asi_one_tailed_p"],
        "out_dir": cfg.out_dir,
    }, indent=2))
    return 0


def cmd_report(args) -> int:
    score_paths = sorted(p for pattern in args.scores for p in glob.glob(pattern))
    measure_paths = sorted(p for pattern in args.measures for p in glob.glob(pattern))
    summary = write_report(score_paths, measure_paths, args.out, human_csv=args.human)
    print(f"report written to {args.out} ({len(summary['datasets'])} datasets, "
          f"{len(summary['scores'])} scores, {len(summary['plots'])} plots)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anoscore", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="measure an image directory into a JSONL file")
    p.add_argument("--images", required=True, help="directory of PNG/JPEG images")
    p.add_argument("--model", required=True, help="model config JSON file")
    _add_measure_params(p)
    p.add_argument("--out", required=True, help="output measure file (JSONL)")
    p.add_argument("--name", default=None, help="dataset label (default: dir name)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cache-dir", default=None,
                   help=f"cache directory (default: ${'{'}ANOSCORE_CACHE_DIR{'}'})")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("score", help="anomaly score between two measure files")
    p.add_argument("--real", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--mode", choices=sorted(MODE_ALIASES), default="2d")
    p.add_argument("--combine", choices=["average", "max"], default="average")
    p.add_argument("--out", default=None, help="also write the score JSON here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("score-i", help="per-image AS-i values from a measure file")
    p.add_argument("--measures", required=True)
    p.add_argument("--mean", action="store_true", help="print only the mean AS-i")
    p.set_defaults(func=cmd_score_i)

    p = sub.add_parser("attribute", help="super-pixel contribution map for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--segments", type=int, default=20)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--min-sel", type=int, default=3)
    p.add_argument("--max-sel", type=int, default=6)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--J", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("bench-corruption", help="run the hermetic corruption benchmark")
    p.add_argument("--config", default=None, help="JSON config (defaults when omitted)")
    p.set_defaults(func=cmd_bench_corruption)

    p = sub.add_parser("report", help="plots and summaries from score/measure files")
    p.add_argument("--scores", nargs="*", default=[], help="score file globs")
    p.add_argument("--measures", nargs="*", default=[], help="measure file globs")
    p.add_argument("--human", default=None, help="CSV with name + metric columns")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
