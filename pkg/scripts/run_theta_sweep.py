#!/usr/bin/env python3
"""Best-privacy sweep against kernel mixtures on the bundled 3-state scenario.

Writes a plot-ready CSV (log-scale the privacy columns to see the divergence
at the right end of the grid).
"""

import pathlib
import sys

from privchange.cli import main

HERE = pathlib.Path(__file__).resolve().parent

if __name__ == "__main__":
    out = HERE / "out_theta_sweep.csv"
    code = main(
        [
            "sweep-theta",
            str(HERE / "scenarios" / "mdp_three_state.json"),
            "--grid",
            "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95,1",
            "--output",
            str(out),
        ]
    )
    print(f"wrote {out}", file=sys.stderr)
    raise SystemExit(code)
