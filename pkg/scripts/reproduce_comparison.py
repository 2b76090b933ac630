#!/usr/bin/env python3
"""Reproduce the three-model steady-gait comparison.

Finds the passive limit cycle at the nominal parameters, fits the gait
reference, runs the controlled stiffness walker with massless legs, with
swing-leg dynamics, and with the telescopic (retracting) swing leg for 20
footfalls each, and prints the velocity / cost-of-transport table.

Usage:
    python scripts/reproduce_comparison.py [out_dir]
"""

import sys
from pathlib import Path

from springwalker.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/comparison"
    Path(out).mkdir(parents=True, exist_ok=True)
    rc = main(["find-cycle", "--out-dir", out])
    if rc == 0:
        rc = main([
            "compare", "--models", "slip,vslip,swing,knee", "--steps", "20",
            "--out-dir", out, "--reference", str(Path(out) / "gait_reference.json"),
        ])
    sys.exit(rc)
