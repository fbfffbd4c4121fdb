#!/usr/bin/env python3
"""Serial flop-rate sweep: every algorithm over m = n = 200..3000 with
k = 180, one CSV per algorithm (the layout the plotting tools expect).

Usage: python scripts/serial_sweep.py [outdir] [--quick]
"""

import pathlib
import sys

from rotseq.cli import main as rotbench

ALGOS = ["naive", "wavefront", "blocked", "fused", "kernel", "kernel-prepacked"]


def run(outdir: str, quick: bool) -> int:
    out = pathlib.Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    sweep = "200:1000:400" if quick else "200:3000:200"
    for algo in ALGOS:
        csv = out / f"results_{algo.replace('-', '_')}.csv"
        print(f"== {algo} -> {csv}")
        rc = rotbench([
            "run", "--algo", algo, "--sweep", sweep, "--k", "180",
            "--reps", "3", "--csv", str(csv),
        ])
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    args = [a for a in sys.argv[1:] if a != "--quick"]
    sys.exit(run(args[0] if args else "results", "--quick" in sys.argv))
