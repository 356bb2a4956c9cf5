"""Command-line interface: ``rpid <verb> [options]``.

Exit codes: 0 success, 1 usage or config error, 2 data or schema error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .bundle import BundleError
from .causal_graph import GraphError
from .config import ConfigError, load_any
from .dataio import SchemaError
from .evaluation import EvaluationError
from .glm import GlmError
from .simulation import InvalidConfig
from .stats import StatsError
from .warp import WarpError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("rpid")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, config_required: bool = False) -> None:
    p.add_argument("--config", required=config_required, help="TOML config file or a built-in name (sim1, sim2, rq3, credit)")
    p.add_argument("--seed", type=int, default=None, help="overrides io.seed from the config")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (study only)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rpid", description="Residual-based rank-preserving warping pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw real-world and FiND-world CSVs")
    _common(p, config_required=True)

    p = sub.add_parser("warp", help="fit warping models on training data and warp it")
    _common(p, config_required=True)
    p.add_argument("--data", required=True, help="training CSV (target column included)")
    p.add_argument("--bundle-out", default=None, help="default: <out>/bundle.json")
    p.add_argument("--warped-out", default=None, help="default: <out>/warped.csv")

    p = sub.add_parser("train", help="fit the prediction model on warped data")
    _common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--warped", required=True, help="warped CSV written by 'warp'")
    p.add_argument("--bundle-out", default=None, help="default: overwrite --bundle")

    p = sub.add_parser("predict", help="warp new rows and score them")
    _common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--predictions-out", default=None, help="default: <out>/predictions.csv")

    p = sub.add_parser("evaluate", help="criteria report for warped (and optionally FiND / adapted) data")
    _common(p, config_required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--warped", required=True)
    p.add_argument("--find", default=None)
    p.add_argument("--adapted", default=None, help="externally adapted CSV with original column names")
    p.add_argument("--split", type=float, default=None, help="seeded training fraction, e.g. 0.8")

    p = sub.add_parser("study", help="Monte-Carlo simulation study")
    _common(p, config_required=True)
    p.add_argument("--iterations", type=int, default=None, help="overrides simulation.iterations")
    return parser


def _out_dir(args, config=None) -> Path:
    if args.out:
        return Path(args.out)
    if config is not None and config.out:
        return Path(config.out)
    return Path(".")


def _seed(args, config=None) -> int:
    if args.seed is not None:
        return args.seed
    return config.seed if config is not None else 0


def run(args) -> dict:
    config = load_any(args.config) if getattr(args, "config", None) else None
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    out = _out_dir(args, config)
    seed = _seed(args, config)
    if args.verb == "simulate":
        return pipeline.cmd_simulate(config, seed, out)
    if args.verb == "warp":
        return pipeline.cmd_warp(
            config, args.data, args.bundle_out or out / "bundle.json", args.warped_out or out / "warped.csv", seed
        )
    if args.verb == "train":
        features = config.features if config is not None else None
        return pipeline.cmd_train(args.bundle, args.warped, args.bundle_out or args.bundle, features)
    if args.verb == "predict":
        return pipeline.cmd_predict(args.bundle, args.data, args.predictions_out or out / "predictions.csv")
    if args.verb == "evaluate":
        report = pipeline.cmd_evaluate(config, args.real, args.warped, out, args.find, args.adapted, args.split, seed)
        return {"report": str(out / "report.json"), "methods": list(report["methods"])}
    if args.verb == "study":
        if args.iterations is not None and args.iterations < 1:
            raise UsageError("--iterations must be at least 1")
        return pipeline.cmd_study(config, seed, out, jobs=args.jobs, iterations=args.iterations)
    raise UsageError(f"unknown verb {args.verb!r}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = run(args)
    except (UsageError, ConfigError, InvalidConfig, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, WarpError, EvaluationError, BundleError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GlmError, StatsError, FloatingPointError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
