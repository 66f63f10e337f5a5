"""``wealthmap <subcommand> --config <path> [--seed N] [--out DIR]``

Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import InputError, NumericalError, WealthmapError

SUBCOMMANDS = ("synth", "features", "targets", "train", "benchmark", "explain", "predict")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wealthmap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "generate a synthetic scene (clusters, rasters, POIs, social, households)",
        "features": "assemble the cluster feature matrix",
        "targets": "build the wealth index and indicator targets from households",
        "train": "fit one model (optional RFE and random search) and save it as JSON",
        "benchmark": "model x source-group grid of cross-validated R^2",
        "explain": "SHAP force-plot data and global importance for a tree model",
        "predict": "predict with a saved model",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "train":
            p.add_argument("--family", help="model family (overrides config model.family)")
        if name in ("explain", "predict"):
            p.add_argument("--rows", help="comma-separated cluster ids (default: all rows)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {}
        if getattr(args, "family", None):
            overrides["family"] = args.family
        if getattr(args, "rows", None):
            overrides["explain_rows"] = [r.strip() for r in args.rows.split(",") if r.strip()]
        cfg = load_config(args.config, args.seed, args.out, overrides)
        if args.command == "synth":
            paths = pipeline.run_synth(cfg)
            print(f"scene written to {paths['clusters'].parent}")
        elif args.command == "features":
            print(pipeline.run_features(cfg))
        elif args.command == "targets":
            print(pipeline.run_targets(cfg))
        elif args.command == "train":
            print(pipeline.run_train(cfg))
        elif args.command == "benchmark":
            metrics = pipeline.run_benchmark(cfg)
            groups = pipeline.BENCHMARK_GROUPS
            print(f"{'model':<15}" + "".join(f"{g:>8}" for g in groups))
            for family, row in metrics["grid"].items():
                print(f"{family:<15}" + "".join(f"{row[g]:>8.3f}" for g in groups))
        elif args.command == "explain":
            paths = pipeline.run_explain(cfg)
            print(paths["global_importance"])
        elif args.command == "predict":
            print(pipeline.run_predict(cfg))
    except NumericalError as exc:
        print(f"wealthmap: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (InputError, FileNotFoundError, KeyError) as exc:
        print(f"wealthmap: bad input: {exc}", file=sys.stderr)
        return 2
    except WealthmapError as exc:
        print(f"wealthmap: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
