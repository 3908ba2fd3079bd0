"""Command surface: run, sweep, compare, validate-config, dump-trace-schema.

Exit codes: 0 success, 1 configuration or input error, 2 run-invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ScenarioConfig, echo_config, load_config
from .mobility import TRACE_HEADER, TraceOrderError, TraceParseError
from .runner import MODEL_NAMES, InvariantViolation, compare, run, sweep


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="scenario config file (dotted key = value lines)")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", required=True, help="output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ztmaf",
        description="Zero-trust vehicular fog authentication simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="one run per fleet size plus sweep.csv")
    _add_common(p_sweep)
    p_sweep.add_argument("--parallel", type=int, default=1, metavar="N")

    p_cmp = sub.add_parser("compare", help="replay the scenario under each auth model")
    _add_common(p_cmp)
    p_cmp.add_argument(
        "--models",
        nargs="+",
        default=list(MODEL_NAMES),
        help=f"subset of {MODEL_NAMES}",
    )

    p_val = sub.add_parser("validate-config", help="parse, validate, and echo a config")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--seed", type=int)

    sub.add_parser("dump-trace-schema", help="print the mobility trace CSV schema")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            summary = run(_load(args), args.out)
            print(json.dumps(summary, indent=2, sort_keys=True, default=str))
        elif args.command == "sweep":
            sweep(_load(args), args.out, parallel=args.parallel)
            print((Path(args.out) / "sweep.csv").read_text(), end="")
        elif args.command == "compare":
            compare(_load(args), args.out, models=args.models)
            print((Path(args.out) / "compare.csv").read_text(), end="")
        elif args.command == "validate-config":
            cfg = _load(args)
            sys.stdout.write(echo_config(cfg))
        elif args.command == "dump-trace-schema":
            print(TRACE_HEADER)
            print("# UTF-8, decimal point, LF line endings; times strictly")
            print("# increasing within each vehicle_id; speeds in m/s >= 0")
    except (ConfigError, TraceParseError, TraceOrderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
