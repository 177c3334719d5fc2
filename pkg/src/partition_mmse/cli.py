"""Command line entry point: ``run`` executes a config, ``verify`` the identity suite."""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError
from .experiments import load_config, run
from .records import emit, render
from .verification import verify


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="partition_mmse", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--output", help="output path (default: the config's output, else stdout)")
    r.add_argument("--format", choices=("csv", "jsonl"), help="output format (default: the config's)")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--seed-override", type=int)
    r.add_argument("--timing", action="store_true", help="include wall_ms (breaks byte-reproducibility)")

    v = sub.add_parser("verify", help="run the identity suite; exit 0 iff every check is in tolerance")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--output")
    v.add_argument("--format", choices=("csv", "jsonl"), default="jsonl")
    v.add_argument("--workers", type=int, default=1)
    return ap


def _write(records, output, fmt, timing=False):
    if output:
        emit(records, output, fmt, timing)
    else:
        sys.stdout.write(render(records, fmt, timing))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            records = run(cfg, workers=args.workers, seed_override=args.seed_override)
            _write(records, args.output or cfg.output, args.format or cfg.format, args.timing)
            return 0
        records = verify(quick=args.quick, workers=args.workers)
        _write(records, args.output, args.format)
        return 0 if all(r.error is None and r.metrics.get("passed") == 1.0 for r in records) else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
