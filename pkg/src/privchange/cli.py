"""Command-line front end.

Subcommands: ``metrics``, ``synthesize``, ``sweep-theta``, ``linear``,
``detect``, ``simulate``. Exit codes: 0 success, 1 usage, 2 scenario parse
error, 3 model validity error, 4 solver non-convergence (partial results are
still written). All commands are deterministic given their flags and
``--seed``. The environment variable ``PRIVCHANGE_THREADS`` caps how many
sweep cells may run concurrently (default 1, i.e. sequential; sequential runs
warm-start each cell from the previous one).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import detection, io, linear, metrics, synthesis
from .errors import (
    LambdaNonpositive,
    ModelError,
    PrivchangeError,
    ScenarioParseError,
    SolverError,
)
from .mdp import ChangeScenario, Policy, uniform_policy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_MODEL = 3
EXIT_SOLVER = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _usage_error(message: str) -> "SystemExit":
    print(f"privchange: error: {message}", file=sys.stderr)
    return SystemExit(EXIT_USAGE)


def max_workers() -> int:
    raw = os.environ.get("PRIVCHANGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SweepSpec:
    """A validated parameter sweep: which knob, its grid, and the I/O paths.

    Grids must be nonempty, sorted ascending, and inside the parameter's
    domain (``theta`` and ``rho`` in [0, 1], ``lambda`` nonnegative, ``c``
    positive).
    """

    parameter: str
    grid: tuple[float, ...]
    scenario: str
    output: str | None = None

    DOMAINS = {
        "theta": (0.0, 1.0),
        "rho": (0.0, 1.0),
        "lambda": (0.0, float("inf")),
        "c": (0.0, float("inf")),
    }

    def validate(self) -> "SweepSpec":
        if self.parameter not in self.DOMAINS:
            raise _usage_error(f"unknown sweep parameter {self.parameter!r}")
        if not self.grid:
            raise _usage_error(f"{self.parameter} grid is empty")
        if list(self.grid) != sorted(self.grid):
            raise _usage_error(f"{self.parameter} grid must be sorted ascending")
        lo, hi = self.DOMAINS[self.parameter]
        strict_low = self.parameter == "c"
        for v in self.grid:
            if v < lo or v > hi or (strict_low and v <= lo):
                raise _usage_error(
                    f"{self.parameter} grid value {v} outside its domain"
                )
        return self


def _sweep_spec(args, parameter: str, raw: str) -> SweepSpec:
    try:
        grid = tuple(float(tok) for tok in raw.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise _usage_error(f"--{parameter} grid must be numeric: {exc}")
    return SweepSpec(
        parameter=parameter,
        grid=grid,
        scenario=args.scenario,
        output=args.output,
    ).validate()


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _vector(spec: str, name: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in spec.split(",")], dtype=float)
    except ValueError as exc:
        raise _usage_error(f"{name} must be a comma-separated vector: {exc}")


def _policies(args, scenario) -> tuple[Policy, Policy]:
    pi0 = (
        io.load_policy(args.policy0, scenario.m0)
        if getattr(args, "policy0", None)
        else uniform_policy(scenario.m0)
    )
    pi1 = (
        io.load_policy(args.policy1, scenario.m1)
        if getattr(args, "policy1", None)
        else uniform_policy(scenario.m1)
    )
    return pi0, pi1


def _config(args) -> synthesis.SynthesisConfig:
    if getattr(args, "config", None):
        cfg = io.load_synthesis_config(args.config)
    else:
        cfg = synthesis.SynthesisConfig()
    overrides = {}
    for flag in ("restarts", "ccp_max_iters", "inner_max_iters"):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[flag] = val
    for flag in ("ccp_tol", "inner_tol", "epsilon_floor"):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[flag] = val
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = synthesis.SynthesisConfig(
            **{**cfg.__dict__, **overrides}
        ).validate()
    return cfg


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_metrics(args) -> int:
    scenario = io.load_mdp_scenario(args.scenario)
    pi0, pi1 = _policies(args, scenario)
    report = metrics.privacy_report(scenario.m0, scenario.m1, pi0, pi1)
    if args.format == "csv":
        d = report.to_dict()
        header = ["i_f", "i_l", "i_l_lower", "privacy_full", "privacy_limited"]
        _emit(io.csv_lines(header, [[d[k] for k in header]]), args.output)
    else:
        _emit(io.json_dumps(report.to_dict()), args.output)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    scenario = io.load_mdp_scenario(args.scenario)
    cfg = _config(args)
    if args.objective == "tradeoff":
        if args.lam is None or args.rho is None:
            raise _usage_error("--objective tradeoff requires --rho and --lambda")
        if args.lam < 0:
            raise _usage_error(f"--lambda must be nonnegative, got {args.lam}")
        if not 0.0 <= args.rho <= 1.0:
            raise _usage_error(f"--rho must be in [0, 1], got {args.rho}")
        solver = synthesis.tradeoff_full if args.mode == "full" else synthesis.tradeoff_limited
        result = solver(scenario.m0, scenario.m1, args.rho, args.lam, cfg)
    else:
        if args.mode == "full":
            result = synthesis.best_privacy_full(scenario.m0, scenario.m1)
        else:
            result = synthesis.best_privacy_limited(scenario.m0, scenario.m1, cfg)
    _emit(io.json_dumps(result.to_dict()), args.output)
    summary = (
        f"objective={io.fmt_number(result.objective)} "
        f"rate={io.fmt_number(result.rate)} "
        f"converged={result.converged}"
    )
    print(summary, file=sys.stderr)
    return EXIT_OK if result.converged else EXIT_SOLVER


def cmd_sweep_theta(args) -> int:
    scenario = io.load_mdp_scenario(args.scenario)
    grid = list(_sweep_spec(args, "theta", args.grid).grid)
    cfg = _config(args)
    workers = max_workers()
    if workers > 1:
        # Parallel cells forgo warm-start chaining; rows stay in grid order.
        def cell(theta):
            return synthesis.sweep_theta(scenario.m0, scenario.m1, [theta], cfg)[0]

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(cell, grid))
    else:
        rows = synthesis.sweep_theta(scenario.m0, scenario.m1, grid, cfg)
    header = ["theta", "i_f_best", "i_l_best", "privacy_f", "privacy_l"]
    table = [[row[k] for k in header] for row in rows]
    _emit(io.csv_lines(header, table), args.output)
    bad = [row for row in rows if not (row["full_result"].converged and row["limited_result"].converged)]
    return EXIT_SOLVER if bad else EXIT_OK


def cmd_linear(args) -> int:
    sys_model = io.load_linear_scenario(args.scenario)
    if args.rho_grid or args.lambda_grid:
        if not (args.rho_grid and args.lambda_grid):
            raise _usage_error("sweeps need both --rho-grid and --lambda-grid")
        rho_values = list(_sweep_spec(args, "rho", args.rho_grid).grid)
        lam_values = list(_sweep_spec(args, "lambda", args.lambda_grid).grid)
    else:
        if args.rho is None or args.lam is None:
            raise _usage_error("provide --rho/--lambda or the two sweep grids")
        if not 0.0 <= args.rho <= 1.0:
            raise _usage_error(f"rho must be in [0, 1], got {args.rho}")
        rho_values, lam_values = [args.rho], [args.lam]
    solver = (
        linear.tradeoff_full_linear
        if args.mode == "full"
        else linear.tradeoff_limited_linear
    )
    m = sys_model.m
    header = (
        ["rho", "lambda"]
        + [f"alpha0_{i}" for i in range(m)]
        + [f"alpha1_{i}" for i in range(m)]
        + ["V", "I"]
    )
    rows = []
    for rho in rho_values:
        for lam in lam_values:
            try:
                sol = solver(sys_model, rho, lam)
            except LambdaNonpositive:
                # Mark the cell invalid and keep sweeping.
                rows.append([rho, lam] + ["nan"] * (2 * m + 2))
                continue
            rows.append(
                [rho, lam]
                + list(sol.alpha0)
                + list(sol.alpha1)
                + [sol.value, sol.rate]
            )
    _emit(io.csv_lines(header, rows), args.output)
    return EXIT_OK


def cmd_detect(args) -> int:
    scenario = io.load_mdp_scenario(args.scenario)
    pi0, pi1 = _policies(args, scenario)
    sc = ChangeScenario(
        m0=scenario.m0, m1=scenario.m1, pi0=pi0, pi1=pi1, nu=scenario.nu
    )
    if args.threshold_grid:
        if args.threshold is not None:
            raise _usage_error("use either --threshold or --threshold-grid")
        spec = _sweep_spec(args, "c", args.threshold_grid)
        estimator = (
            detection.estimate_false_alarm if args.false_alarm else detection.estimate_delay
        )
        rows = []
        for c in spec.grid:
            rep = estimator(sc, args.mode, c, args.runs, args.horizon, args.seed)
            mean = (
                rep.mean_time_to_false_alarm if args.false_alarm else rep.mean_delay
            )
            rows.append([c, mean, rep.ci_halfwidth, rep.censored])
        mean_col = "mean_time_to_false_alarm" if args.false_alarm else "mean_delay"
        _emit(io.csv_lines(["c", mean_col, "ci_halfwidth", "censored"], rows),
              args.output)
        return EXIT_OK
    if args.threshold is None:
        raise _usage_error("--threshold (or --threshold-grid) is required")
    if args.threshold <= 0:
        raise _usage_error(f"--threshold must be positive, got {args.threshold}")
    if args.false_alarm:
        report = detection.estimate_false_alarm(
            sc, args.mode, args.threshold, args.runs, args.horizon, args.seed
        )
    else:
        report = detection.estimate_delay(
            sc, args.mode, args.threshold, args.runs, args.horizon, args.seed
        )
    if args.raw:
        records = detection.detection_records(
            sc, args.mode, args.threshold, args.runs, args.horizon, args.seed,
            false_alarm=args.false_alarm,
        )
        lines = io.csv_lines(
            ["seed", "stopping_time", "nu"],
            [[s, "censored" if t is None else t, nu] for s, t, nu in records],
        )
        with open(args.raw, "w", encoding="utf-8") as fh:
            fh.write(lines)
    if args.format == "csv":
        d = report.to_dict()
        header = list(d)
        _emit(
            io.csv_lines(header, [["" if d[k] is None else d[k] for k in header]]),
            args.output,
        )
    else:
        _emit(io.json_dumps(report.to_dict()), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if io.is_linear_scenario(args.scenario):
        sys_model = io.load_linear_scenario(args.scenario)
        alpha0 = (
            _vector(args.alpha0, "--alpha0") if args.alpha0 else np.zeros(sys_model.m)
        )
        alpha1 = (
            _vector(args.alpha1, "--alpha1") if args.alpha1 else np.zeros(sys_model.m)
        )
        mean, lo, hi = linear.average_xsq_experiment(
            sys_model,
            alpha0,
            alpha1,
            horizon=args.horizon,
            runs=args.runs,
            seed=args.seed,
            stochastic_policy=args.stochastic_policy,
        )
        rows = [[t + 1, mean[t], lo[t], hi[t]] for t in range(args.horizon)]
        _emit(io.csv_lines(["step", "mean_xsq", "ci_low", "ci_high"], rows), args.output)
        return EXIT_OK
    scenario = io.load_mdp_scenario(args.scenario)
    pi0, pi1 = _policies(args, scenario)
    sc = ChangeScenario(
        m0=scenario.m0, m1=scenario.m1, pi0=pi0, pi1=pi1, nu=scenario.nu
    )
    from .mdp import simulate as run_sim

    traj = run_sim(sc, args.horizon, args.seed)
    rows = [
        [t + 1, int(traj.states[t]), int(traj.actions[t])]
        for t in range(args.horizon)
    ]
    _emit(io.csv_lines(["t", "state", "action"], rows), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="privchange", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", default=None, help="write here instead of stdout")
        p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("metrics", help="exact rates and privacy levels")
    common(p)
    p.add_argument("--policy0", help="pre-change policy JSON (default: uniform)")
    p.add_argument("--policy1", help="post-change policy JSON (default: uniform)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synthesize", help="solve a synthesis problem")
    common(p)
    p.add_argument("--mode", choices=["full", "limited"], required=True)
    p.add_argument("--objective", choices=["privacy", "tradeoff"], required=True)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--config", help="solver config JSON")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--ccp-max-iters", dest="ccp_max_iters", type=int, default=None)
    p.add_argument("--ccp-tol", dest="ccp_tol", type=float, default=None)
    p.add_argument("--inner-max-iters", dest="inner_max_iters", type=int, default=None)
    p.add_argument("--inner-tol", dest="inner_tol", type=float, default=None)
    p.add_argument("--epsilon-floor", dest="epsilon_floor", type=float, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("sweep-theta", help="best privacy against kernel mixtures")
    common(p)
    p.add_argument("--grid", default="0,0.25,0.5,0.75,0.9,1")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--ccp-max-iters", dest="ccp_max_iters", type=int, default=None)
    p.set_defaults(func=cmd_sweep_theta)

    p = sub.add_parser("linear", help="closed-form linear trade-off table")
    common(p)
    p.add_argument("--mode", choices=["full", "limited"], required=True)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--rho-grid", dest="rho_grid", default=None)
    p.add_argument("--lambda-grid", dest="lambda_grid", default=None)
    p.set_defaults(func=cmd_linear)

    p = sub.add_parser("detect", help="Monte Carlo CUSUM delay / false alarms")
    common(p)
    p.add_argument("--mode", choices=["full", "limited"], default="full")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--threshold-grid", dest="threshold_grid", default=None)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--false-alarm", dest="false_alarm", action="store_true")
    p.add_argument("--raw", help="also write per-run (seed, T, nu) CSV here")
    p.add_argument("--policy0", help="pre-change policy JSON (default: uniform)")
    p.add_argument("--policy1", help="post-change policy JSON (default: uniform)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="sample a trajectory / state-norm stats")
    common(p)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--policy0", help="pre-change policy JSON (default: uniform)")
    p.add_argument("--policy1", help="post-change policy JSON (default: uniform)")
    p.add_argument("--alpha0", help="pre-change offset, comma-separated")
    p.add_argument("--alpha1", help="post-change offset, comma-separated")
    p.add_argument("--stochastic-policy", action="store_true")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        print(f"privchange: scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except LambdaNonpositive as exc:
        print(f"privchange: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"privchange: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except SolverError as exc:
        print(f"privchange: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PrivchangeError as exc:
        print(f"privchange: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
