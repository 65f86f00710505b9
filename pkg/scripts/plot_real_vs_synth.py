#!/usr/bin/env python3
"""Emit per-class SVG figures comparing real and distilled records in the
time and frequency domains (one figure per class).

    python scripts/plot_real_vs_synth.py runs/desk/train.sigds runs/desk/synth_mdm_10.sigds figs/
"""

import argparse
import sys
from pathlib import Path

from sigdistill.cli import main as cli
from sigdistill.dataio import load_sigds


def run(argv) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("real", help="real SIGDS file")
    parser.add_argument("synth", help="distilled SIGDS file")
    parser.add_argument("out_dir", help="directory for per-class SVGs")
    parser.add_argument("--records", type=int, default=2)
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in load_sigds(args.real).class_names:
        target = out_dir / f"{name}.svg"
        rc = cli(
            [
                "plot",
                args.real,
                name,
                str(target),
                "--compare",
                args.synth,
                "--records",
                str(args.records),
            ]
        )
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
