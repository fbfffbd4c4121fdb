#!/usr/bin/env python3
"""Thread-scaling sweep for the kernel path (row blocks are independent,
so scaling is limited only by memory bandwidth and core count).

Usage: python scripts/parallel_scaling.py [outdir] [--quick]
"""

import os
import pathlib
import sys

from rotseq.cli import main as rotbench

THREADS = [1, 2, 4, 8]


def run(outdir: str, quick: bool) -> int:
    out = pathlib.Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    sweep = "400:1200:400" if quick else "200:3000:200"
    ladder = [t for t in THREADS if t <= 2 * (os.cpu_count() or 1)]
    for t in ladder:
        csv = out / f"results_kernel_prepacked_para_{t}.csv"
        print(f"== threads={t} -> {csv}")
        rc = rotbench([
            "run", "--algo", "kernel-prepacked", "--sweep", sweep, "--k", "180",
            "--threads", str(t), "--reps", "3", "--csv", str(csv),
        ])
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    args = [a for a in sys.argv[1:] if a != "--quick"]
    sys.exit(run(args[0] if args else "results", "--quick" in sys.argv))
