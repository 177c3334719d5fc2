"""Run every experiment config under configs/ and write the results next to the repo."""
import argparse
import sys
import time
from pathlib import Path

from partition_mmse.cli import main

ROOT = Path(__file__).resolve().parents[1]


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", default=str(ROOT / "configs"))
    ap.add_argument("--out", default=str(ROOT / "results"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip", nargs="*", default=[], help="config stems to skip")
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    status = 0
    for cfg in sorted(Path(args.configs).glob("*.json")):
        if cfg.stem in args.skip:
            continue
        fmt = "csv" if "sweep" in cfg.stem or "regime" in cfg.stem else "jsonl"
        out = Path(args.out) / f"{cfg.stem}.{fmt}"
        start = time.perf_counter()
        code = main(["run", "--config", str(cfg), "--output", str(out), "--format", fmt,
                     "--workers", str(args.workers)])
        print(f"{cfg.stem}: exit {code}, {time.perf_counter() - start:.1f}s -> {out}")
        status = status or code
    sys.exit(status)
