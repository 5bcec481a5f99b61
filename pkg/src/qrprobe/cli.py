"""Command-line entry point: ``qrprobe {run,point,export,validate} --config FILE``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import mean_r2
from .harness import (
    ConfigError,
    ExperimentConfig,
    export_outputs,
    load_config,
    run_point,
    run_sweep,
    save_point,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_ENGINE = 4

def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrprobe", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="experiment TOML file")
    common.add_argument("--output", type=Path, help="override the output directory")
    common.add_argument("--seed-override", type=_u64, metavar="U64", help="replace the batch seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    run = sub.add_parser("run", parents=[common], help="run the full parameter sweep")
    run.add_argument("--workers", type=_positive, default=1)
    run.add_argument("--resume", action="store_true", help="skip points already completed with this config")

    point = sub.add_parser("point", parents=[common], help="run a single parameter value")
    point.add_argument("--value", type=float, required=True)
    point.add_argument("--workers", type=_positive, default=1)

    export = sub.add_parser("export", parents=[common], help="re-emit tables from stored binaries")
    export.add_argument("--threshold", type=float, help="re-analyse with another deviation threshold")

    sub.add_parser("validate", parents=[common], help="check the config and exit")
    return parser


def _configure(args) -> ExperimentConfig:
    config = load_config(args.config)
    changes = {}
    if args.output is not None:
        changes["output"] = args.output
    if args.seed_override is not None:
        changes["seed"] = args.seed_override
    if getattr(args, "value", None) is not None:
        changes["sweep_values"] = [args.value]
    return dataclasses.replace(config, **changes) if changes else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _configure(args)
    except (ConfigError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.verb == "validate":
        print(f"ok {config.fingerprint()}")
        return EXIT_OK

    if args.verb == "export":
        try:
            paths = export_outputs(config, args.threshold)
        except FileNotFoundError as exc:
            print(f"nothing to export: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except ValueError as exc:
            print(f"invalid threshold: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for path in paths:
            print(path)
        return EXIT_OK

    if args.verb == "point":
        value = config.sweep_values[0]
        try:
            grid, r2, ent = run_point(config, value, workers=args.workers)
        except Exception as exc:
            print(f"engine failure at {config.sweep_parameter}={value}: {exc}", file=sys.stderr)
            return EXIT_ENGINE
        save_point(config, value, grid, r2, ent, config.batch())
        print(f"{config.sweep_parameter}={value:g} r2_mean={mean_r2(r2, config.subset):.9g}")
        return EXIT_OK

    sweep, manifest = run_sweep(config, resume=args.resume, workers=args.workers)
    print(f"{config.sweep_parameter},r2_mean")
    for value, mean in zip(sweep.values, sweep.r2_mean):
        print(f"{value:g},{mean:.9g}")
    dip = manifest["dip"]
    if dip is not None:
        kind = "interior dip" if dip["interior"] else "no interior dip"
        print(f"minimum at {config.sweep_parameter}={dip['value']:g} ({kind})")
    if manifest["failures"]:
        for failure in manifest["failures"]:
            print(f"failed {config.sweep_parameter}={failure['value']:g}: {failure['error']}", file=sys.stderr)
        return EXIT_ENGINE if not manifest["points"] else EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
