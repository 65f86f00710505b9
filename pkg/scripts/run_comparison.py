#!/usr/bin/env python3
"""Desk-scale method comparison: Random vs DM vs MDM at one SPC.

Drives the CLI end to end (gen -> distill x3 -> eval) so the produced
artifacts match what a by-hand run would create. Usage:

    python scripts/run_comparison.py [--config configs/desk.json] [--out runs/desk]
"""

import argparse
import sys
from pathlib import Path

from sigdistill.cli import main as cli


def run(argv) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/desk.json")
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    base = ["--config", args.config, "--force"]
    if args.out:
        base += ["--out", args.out]
    if args.seed is not None:
        base += ["--seed", str(args.seed)]

    if cli(["gen", *base]):
        return 1
    for method in ("random", "dm", "mdm"):
        print(f"== distilling with method={method} ==", flush=True)
        if cli(["distill", *base, "--method", method]):
            return 1
    return cli(["eval", *base])


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
