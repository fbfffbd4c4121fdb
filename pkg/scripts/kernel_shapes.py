#!/usr/bin/env python3
"""Compare micro-kernel shapes on the prepacked path (the shape-selection
experiment): 48x1, 16x2, 12x3, 8x5, plus this build's tuned default.

Usage: python scripts/kernel_shapes.py [outdir] [--quick]
"""

import pathlib
import sys

from rotseq.cli import main as rotbench
from rotseq.verification import DEFAULT_KR, DEFAULT_MR

SHAPES = [(48, 1), (16, 2), (12, 3), (8, 5), (DEFAULT_MR, DEFAULT_KR)]


def run(outdir: str, quick: bool) -> int:
    out = pathlib.Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    sweep = "200:1000:400" if quick else "200:3000:200"
    for m_r, k_r in SHAPES:
        csv = out / f"results_{m_r}xnx{k_r}_prepacked.csv"
        print(f"== kernel {m_r}x{k_r} -> {csv}")
        rc = rotbench([
            "run", "--algo", "kernel-prepacked", "--sweep", sweep, "--k", "180",
            "--mr", str(m_r), "--kr", str(k_r), "--reps", "3", "--csv", str(csv),
        ])
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    args = [a for a in sys.argv[1:] if a != "--quick"]
    sys.exit(run(args[0] if args else "results", "--quick" in sys.argv))
