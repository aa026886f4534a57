#!/usr/bin/env python3
"""Run the desk-scale 1D and 2D benchmark grids and export plot tables.

Usage: python scripts/run_desk_benchmark.py [OUTDIR]
"""

import sys
from pathlib import Path

from dpbench.cli import main


def run(out_root: Path) -> int:
    for preset in ("desk-1d", "desk-2d"):
        out = out_root / preset
        code = main(["run", "--preset", preset, "--out", str(out)])
        if code != 0:
            return code
        code = main(["report", "--summary", str(out / "summary.csv"), "--out", str(out)])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results")
    sys.exit(run(root))
