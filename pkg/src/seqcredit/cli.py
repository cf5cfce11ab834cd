"""Command-line entry point.

Exit codes: 0 success, 1 configuration or data error, 2 theory-check
failure, 3 budget or capability error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import (
    BudgetError,
    CapabilityError,
    ConfigurationError,
    DataError,
    DomainError,
    TheoryCheckFailure,
)
from .experiments import EXPERIMENTS, build_config, run_experiment

_HELP = {
    "mse-vs-k": "advantage estimation error as the team grows",
    "mse-vs-lambda": "advantage estimation error as interactions strengthen",
    "optim": "training comparison at matched environment budgets",
    "ablation": "sampled indirect effect versus direct effect only",
    "theory-check": "numerical verification of the structural claims",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqcredit",
        description="Simulation laboratory for per-agent credit assignment "
        "in sequential cooperative bandit teams.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", default=None, help="JSON configuration file")
        p.add_argument("--out", default="results", help="output root directory")
        p.add_argument("--seeds", type=int, default=None, help="seeds per cell")
        p.add_argument("--workers", type=int, default=None, help="parallel processes")
        p.add_argument(
            "--master-seed", type=int, default=None, dest="master_seed",
            help="root seed for all derived random streams",
        )
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="set any config field; value parsed as JSON when possible",
        )
    return parser


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"override must be KEY=VALUE, got {pair!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out[key.strip()] = value
    return out


def _load_config_file(path: str | None) -> dict | None:
    if path is None:
        return None
    try:
        with open(path) as handle:
            loaded = json.load(handle)
    except OSError as err:
        raise ConfigurationError(f"cannot read config file {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"config file {path} is not valid JSON: {err}") from err
    if not isinstance(loaded, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    return loaded


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        file_values = _load_config_file(args.config)
        overrides = _parse_overrides(args.override)
        cli_values = {
            name: getattr(args, name)
            for name in ("seeds", "workers", "master_seed")
            if getattr(args, name) is not None
        }
        cfg, config_warnings = build_config(
            args.experiment, file_values, overrides, cli_values
        )
        for warning in config_warnings:
            print(f"warning: {warning}", file=sys.stderr)
        out_dir = run_experiment(cfg, args.out, config_warnings)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1
    except (DataError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except TheoryCheckFailure as err:
        print(f"theory check failed: {err}", file=sys.stderr)
        return 2
    except (BudgetError, CapabilityError) as err:
        print(f"resource error: {err}", file=sys.stderr)
        return 3
    print(f"wrote {out_dir / 'results.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
