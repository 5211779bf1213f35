#!/usr/bin/env python3
"""CUSUM delay and false-alarm experiment on the bundled 2-state scenario.

Prints the exact information rate, the Monte Carlo mean detection delay at
two thresholds (expected to track threshold / rate), and the mean time to
false alarm.
"""

import pathlib

from privchange import (
    ChangeScenario,
    estimate_delay,
    estimate_false_alarm,
    full_info_rate,
    uniform_policy,
)
from privchange.io import load_mdp_scenario

HERE = pathlib.Path(__file__).resolve().parent

if __name__ == "__main__":
    scn = load_mdp_scenario(str(HERE / "scenarios" / "mdp_two_state.json"))
    pi = uniform_policy(scn.m0)
    sc = ChangeScenario(m0=scn.m0, m1=scn.m1, pi0=pi, pi1=pi, nu=scn.nu)
    rate = full_info_rate(scn.m0, scn.m1, pi, pi)
    print(f"exact full-information rate: {rate:.6f}")
    for c in (8.0, 16.0):
        rep = estimate_delay(sc, "full", c=c, runs=1000, horizon=600, seed=0)
        print(
            f"c={c:5.1f}: mean delay {rep.mean_delay:7.2f} "
            f"(+/- {rep.ci_halfwidth:.2f}), c/rate = {c / rate:7.2f}, "
            f"censored {rep.censored}"
        )
    fa = estimate_false_alarm(sc, "full", c=8.0, runs=200, horizon=5000, seed=0)
    print(
        f"false alarm: mean time {fa.mean_time_to_false_alarm:.1f} "
        f"over {fa.runs} runs, censored {fa.censored}"
    )
