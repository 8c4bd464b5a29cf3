"""
Benchmark Command Line
======================
  python src/bench_cli.py exp1 [flags]
  python src/bench_cli.py exp2 --threads 4
  python src/bench_cli.py exp3 --trials 5 --tau-grid 0.01,0.005
  python src/bench_cli.py all --config bench.json --format json

Exit status 0 on success. On failure a JSON error record is printed to
stderr and the exit status is 1 (2 for argument errors).
"""

import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import argparse
import json
import logging

from src.experiments.common import load_config, summarize, write_result
from src.experiments.exp1_statevector import run_exp1
from src.experiments.exp2_precision import run_exp2
from src.experiments.exp3_pc import run_exp3

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
EXPERIMENTS = {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3}


def parse_tau_grid(text: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid tau grid {text!r}")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("tau grid needs positive values")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench_cli",
        description="Quantum vs classical KL / CMI estimation benchmarks",
    )
    parser.add_argument("command", choices=sorted(EXPERIMENTS) + ["all"])
    parser.add_argument("--config", help="JSON file with BenchConfig fields")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--tau-grid", dest="tau_grid", type=parse_tau_grid)
    parser.add_argument("--L", dest="L", type=float)
    parser.add_argument("--shots", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--format", dest="fmt", choices=["csv", "json"])
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def setup_logging(out_dir: str, verbose: bool = False):
    os.makedirs(out_dir, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr),
                  logging.FileHandler(os.path.join(out_dir, "bench.log"), encoding="utf-8")],
        force=True,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "verbose")}
    try:
        config = load_config(args.config, overrides)
        setup_logging(config.out_dir, args.verbose)
        commands = sorted(EXPERIMENTS) if args.command == "all" else [args.command]
        for name in commands:
            print(f"\n>> {name}")
            result = EXPERIMENTS[name](config)
            write_result(result, config.out_dir, config.fmt)
            summarize(result)
    except Exception as exc:
        logger.exception("benchmark %s failed", args.command)
        record = {"status": "error", "command": args.command,
                  "error_type": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
