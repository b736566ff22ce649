"""Command-line pipeline: doe, simulate, build, evaluate, report."""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .pipeline import ConfigError, Run, load_config


def _add_common(parser):
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--preset", choices=sorted(pipeline.PRESETS), help="configuration preset")
    parser.add_argument("--root", help=f"artifact root (default: ${pipeline.ARTIFACT_ROOT_ENV} or ./vprom_artifacts)")
    parser.add_argument("--seed", type=int, help="override doe.seed_train")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vprom",
        description="Parametric ROMs of a Bouc-Wen shear frame: clustering, "
        "coefficient interpolation and cVAE basis generation with ECSW "
        "hyper-reduction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("doe", help="draw training/validation parameter samples")
    _add_common(p)

    p = sub.add_parser("simulate", help="run full-order simulations for a split")
    _add_common(p)
    p.add_argument("--split", choices=("train", "valid"), default="train")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("build", help="build strategy artifacts from training data")
    _add_common(p)
    p.add_argument("--strategy", choices=pipeline.STRATEGIES, required=True)

    p = sub.add_parser("evaluate", help="evaluate a strategy on a split")
    _add_common(p)
    p.add_argument("--strategy", choices=pipeline.STRATEGIES, required=True)
    p.add_argument("--split", choices=("train", "valid"), default="valid")
    p.add_argument("--hyper", action="store_true", help="use ECSW hyper-reduction")
    p.add_argument("--tau", type=float, help="ECSW tolerance (default from config)")
    p.add_argument("--uq", type=int, default=0, metavar="N", help="emit an N-draw uncertainty envelope (vprom only)")
    p.add_argument("--uq-sample", type=int, default=0, help="split index for the envelope")
    p.add_argument("--max-samples", type=int, help="evaluate only the first N samples")

    p = sub.add_parser("report", help="aggregate records into summary tables")
    _add_common(p)
    return parser


def _make_run(args) -> Run:
    overrides = {}
    if args.seed is not None:
        overrides = {"doe": {"seed_train": args.seed}}
    cfg = load_config(path=args.config, preset=args.preset, overrides=overrides)
    return Run(cfg, root=args.root)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _make_run(args)
        if args.command == "doe":
            out = pipeline.cmd_doe(run)
            print(f"[doe] run {run.run_id}: train={out['train'].shape[0]} valid={out['valid'].shape[0]}")
        elif args.command == "simulate":
            status = pipeline.cmd_simulate(run, args.split, workers=args.workers)
            print(f"[simulate] {status['done']}/{status['total']} complete ({args.split})")
            if status["failures"]:
                print(f"[simulate] failures: {sorted(status['failures'])}")
        elif args.command == "build":
            pipeline.cmd_build(run, args.strategy)
        elif args.command == "evaluate":
            pipeline.cmd_evaluate(
                run,
                args.strategy,
                split=args.split,
                hyper=args.hyper,
                tau=args.tau,
                uq_draws=args.uq,
                uq_sample=args.uq_sample,
                max_samples=args.max_samples,
            )
        elif args.command == "report":
            summaries = pipeline.cmd_report(run)
            print(f"{'strategy':<12} {'n':>4} {'median err_u':>14} {'max err_u':>12} {'speed-up':>9}")
            for s in summaries.values():
                print(
                    f"{s.strategy:<12} {s.n_records:>4} {s.median_err_u:>13.3f}% "
                    f"{s.max_err_u:>11.3f}% {s.mean_speed_up:>9.2f}"
                )
        return 0
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
