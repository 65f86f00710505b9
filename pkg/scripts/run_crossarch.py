#!/usr/bin/env python3
"""Cross-architecture generalization matrix: distill on C, evaluate on T.

    python scripts/run_crossarch.py [--config configs/desk.json] [--out runs/desk]
"""

import argparse
import sys

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
    return cli(["crossarch", *base])


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
