#!/usr/bin/env python3
"""Closed-form trade-off table and state-norm statistics for the bundled
linear scenario: a (rho, lambda) grid of optimal offsets, then the average
squared state norm through the change at one chosen cell.
"""

import pathlib
import sys

from privchange import average_xsq_experiment, tradeoff_limited_linear
from privchange.cli import main
from privchange.io import csv_lines, load_linear_scenario

HERE = pathlib.Path(__file__).resolve().parent

if __name__ == "__main__":
    scenario = HERE / "scenarios" / "linear_additive.json"
    table = HERE / "out_linear_table.csv"
    code = main(
        [
            "linear",
            str(scenario),
            "--mode",
            "limited",
            "--rho-grid",
            "0,0.25,0.5,0.75,1",
            "--lambda-grid",
            "0.5,1,1.5",
            "--output",
            str(table),
        ]
    )
    print(f"wrote {table}", file=sys.stderr)

    sys_model = load_linear_scenario(str(scenario))
    sol = tradeoff_limited_linear(sys_model, rho=1.0, lam=1.5)
    mean, lo, hi = average_xsq_experiment(
        sys_model, sol.alpha0, sol.alpha1, horizon=400, runs=1000, seed=0
    )
    stats = HERE / "out_linear_xsq.csv"
    rows = [[t + 1, mean[t], lo[t], hi[t]] for t in range(mean.shape[0])]
    stats.write_text(csv_lines(["step", "mean_xsq", "ci_low", "ci_high"], rows))
    print(f"wrote {stats}", file=sys.stderr)
    raise SystemExit(code)
