#!/usr/bin/env python3
"""Run the exchangeability, consistency, and budget property suites.

Usage: python scripts/run_property_checks.py [OUTDIR]

Exits 2 if any asserted property fails.
"""

import sys
from pathlib import Path

from dpbench.cli import main


def run(out_root: Path) -> int:
    worst = 0
    for suite in ("budget", "consistency", "exchangeability"):
        code = main(["check", suite, "--out", str(out_root)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/checks")
    sys.exit(run(root))
