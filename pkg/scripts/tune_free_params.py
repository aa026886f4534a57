#!/usr/bin/env python3
"""Learn the free parameters of the starred variants on synthetic shapes.

Usage: python scripts/tune_free_params.py [OUTDIR]
"""

import sys
from pathlib import Path

from dpbench.cli import main


def run(out_root: Path) -> int:
    for preset in ("tune-mwem", "tune-ahp"):
        code = main(["tune", "--preset", preset, "--out", str(out_root)])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/params")
    sys.exit(run(root))
