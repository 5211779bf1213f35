"""The eavesdropper: log-likelihood ratio streams, CUSUM, delay estimation.

The detector is informed: it knows both models and both policies and tests
the post-change hypothesis against the pre-change one. Its per-observation
evidence increments form the LLR stream; the CUSUM rule thresholds the
running maximum of partial LLR sums.

Conventions: a stream entry at position ``i`` corresponds to trajectory time
``start_time + i`` (increments need one step of history, so streams start at
time 2). Detection delays count post-change observations consumed, so an
alarm raised on the first post-change sample has delay 1. A non-finite
increment is a support violation and triggers an immediate alarm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, ShapeMismatch
from .mdp import ChangeScenario, Trajectory, induced_chain, simulate


@dataclass(frozen=True)
class LlrStream:
    """Per-observation log-likelihood ratio increments of one trajectory."""

    z: np.ndarray
    mode: str
    start_time: int = 2

    @property
    def inf_positions(self) -> np.ndarray:
        """Stream positions whose increment is not finite."""
        return np.flatnonzero(~np.isfinite(self.z))


@dataclass(frozen=True)
class CusumRun:
    """CUSUM statistic path and the first threshold crossing, if any.

    ``statistic_path[i]`` is the running maximum over windows ending at
    position ``i``; ``stopping_time`` is in trajectory time (``None`` when the
    path never reaches the threshold before the stream ends).
    """

    threshold: float
    stopping_time: int | None
    statistic_path: np.ndarray
    start_time: int = 2


@dataclass(frozen=True)
class DelayReport:
    """Monte Carlo detection-delay or false-alarm summary.

    The inapplicable mean field is ``None``: delay estimation fills
    ``mean_delay``, false-alarm estimation fills ``mean_time_to_false_alarm``.
    Censored runs contribute their censoring lower bound to the mean and are
    counted, never dropped.
    """

    mean_delay: float | None
    ci_halfwidth: float
    mean_time_to_false_alarm: float | None
    runs: int
    censored: int

    def to_dict(self) -> dict:
        return {
            "mean_delay": self.mean_delay,
            "ci_halfwidth": self.ci_halfwidth,
            "mean_time_to_false_alarm": self.mean_time_to_false_alarm,
            "runs": self.runs,
            "censored": self.censored,
        }


def _log_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(num) - np.log(den)


def llr_full(sc: ChangeScenario, traj: Trajectory) -> LlrStream:
    """Evidence increments when states and actions are observed.

    Each increment compares the post-change transition-and-action density to
    the pre-change one along the realized path. Signed infinities mark
    support violations and are kept in the stream.
    """
    xs, us = traj.states, traj.actions
    if xs.shape != us.shape or xs.size < 1:
        raise IndexOutOfRange("trajectory must carry equal-length states/actions")
    if xs.max() >= sc.m0.n_states or us.max() >= sc.m0.n_actions:
        raise IndexOutOfRange("trajectory indices exceed the scenario's spaces")
    x_prev, u_prev, x_now, u_now = xs[:-1], us[:-1], xs[1:], us[1:]
    z = _log_ratio(sc.m1.P[u_prev, x_prev, x_now], sc.m0.P[u_prev, x_prev, x_now])
    z = z + _log_ratio(sc.pi1.pi[x_now, u_now], sc.pi0.pi[x_now, u_now])
    return LlrStream(z=z, mode="full")


def llr_limited(sc: ChangeScenario, traj: Trajectory) -> LlrStream:
    """Evidence increments when only states are observed: closed-loop kernels."""
    xs = traj.states
    if xs.size < 1:
        raise IndexOutOfRange("trajectory is empty")
    if xs.max() >= sc.m0.n_states:
        raise IndexOutOfRange("trajectory indices exceed the scenario's spaces")
    k1 = induced_chain(sc.m1, sc.pi1)
    k0 = induced_chain(sc.m0, sc.pi0)
    x_prev, x_now = xs[:-1], xs[1:]
    z = _log_ratio(k1[x_prev, x_now], k0[x_prev, x_now])
    return LlrStream(z=z, mode="limited")


def cusum(z: LlrStream, c: float) -> CusumRun:
    """Run the CUSUM rule on a stream: alarm when the running maximum of
    partial sums reaches ``c``.

    Implemented with the constant-time recursion ``S_t = max(0, S_{t-1}) + Z_t``,
    which reproduces the max-over-windows statistic exactly. A non-finite
    increment (support violation) raises the alarm at its own position.
    """
    if c <= 0:
        raise ShapeMismatch(f"threshold must be positive, got {c}")
    path: list[float] = []
    s = 0.0
    stop = None
    for i, step in enumerate(z.z):
        if not math.isfinite(step):
            # An observation impossible under one model is infinitely
            # informative: force the statistic up and alarm here.
            path.append(math.inf)
            stop = z.start_time + i
            break
        s = max(0.0, s) + step
        path.append(s)
        if s >= c:
            stop = z.start_time + i
            break
    return CusumRun(
        threshold=c,
        stopping_time=stop,
        statistic_path=np.asarray(path, dtype=float),
        start_time=z.start_time,
    )


def ergodic_llr_average(z: LlrStream, from_index: int) -> tuple[float, float]:
    """Running mean of the stream from a position, with batch-means stderr.

    The tail is split into equal batches (about ``sqrt(n)`` of them, capped at
    32); the standard error is the dispersion of batch means. A constant
    stream reports a zero standard error.
    """
    if not 0 <= from_index < z.z.shape[0]:
        raise IndexOutOfRange(
            f"from_index {from_index} outside stream of length {z.z.shape[0]}"
        )
    tail = z.z[from_index:]
    est = float(np.mean(tail))
    n = tail.shape[0]
    n_batches = int(min(32, max(1, math.isqrt(n))))
    if n_batches < 2:
        return est, 0.0
    b = n // n_batches
    means = tail[: n_batches * b].reshape(n_batches, b).mean(axis=1)
    stderr = float(means.std(ddof=1) / math.sqrt(n_batches))
    return est, stderr


def _llr_for_mode(sc: ChangeScenario, traj: Trajectory, mode: str) -> LlrStream:
    if mode == "full":
        return llr_full(sc, traj)
    if mode == "limited":
        return llr_limited(sc, traj)
    raise ShapeMismatch(f"mode must be 'full' or 'limited', got {mode!r}")


def _mean_ci(values: list[float]) -> tuple[float, float]:
    mean = math.fsum(values) / len(values)
    if len(values) > 1:
        var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
        half = 1.96 * math.sqrt(var / len(values))
    else:
        half = 0.0
    return mean, half


def detection_records(
    sc: ChangeScenario,
    mode: str,
    c: float,
    runs: int,
    horizon: int,
    seed: int,
    false_alarm: bool = False,
) -> list[tuple[int, int | None, int]]:
    """Per-run ``(seed, stopping_time, nu)`` tuples behind the estimators.

    With ``false_alarm`` the trajectories never change (the detector still
    tests for the change) and the CUSUM runs from the start of the stream;
    otherwise the statistic restarts at the change time, which is its worst
    case over pre-change histories. ``stopping_time`` is ``None`` for runs
    censored at the horizon.
    """
    if runs < 1:
        raise ShapeMismatch("runs must be >= 1")
    if not false_alarm and horizon <= sc.nu:
        raise ShapeMismatch("horizon must exceed the change time")
    if false_alarm:
        world = ChangeScenario(
            m0=sc.m0, m1=sc.m1, pi0=sc.pi0, pi1=sc.pi1, nu=horizon + 1
        )
        start = 2
    else:
        world = sc
        start = max(sc.nu, 2)
    records = []
    for i in range(runs):
        run_seed = _run_seed(seed, i)
        traj = simulate(world, horizon, seed=run_seed)
        z = _llr_for_mode(sc, traj, mode)
        post = LlrStream(z=z.z[start - z.start_time :], mode=mode, start_time=start)
        run = cusum(post, c)
        records.append((run_seed, run.stopping_time, world.nu))
    return records


def estimate_delay(
    sc: ChangeScenario,
    mode: str,
    c: float,
    runs: int,
    horizon: int,
    seed: int,
) -> DelayReport:
    """Monte Carlo mean detection delay at the scenario's change time.

    Each run simulates a fresh trajectory with a stationary pre-change start,
    restarts the CUSUM statistic at the change time (its worst case over
    pre-change histories), and counts post-change observations until the
    alarm. Runs that never alarm are censored at the horizon and contribute
    ``horizon - nu`` as a lower bound.
    """
    records = detection_records(sc, mode, c, runs, horizon, seed)
    delays: list[float] = []
    censored = 0
    start = max(sc.nu, 2)
    for _, stop, _ in records:
        if stop is None:
            censored += 1
            delays.append(float(horizon - sc.nu))
        else:
            delays.append(float(stop - start + 1))
    mean, half = _mean_ci(delays)
    return DelayReport(
        mean_delay=mean,
        ci_halfwidth=half,
        mean_time_to_false_alarm=None,
        runs=runs,
        censored=censored,
    )


def estimate_false_alarm(
    sc: ChangeScenario,
    mode: str,
    c: float,
    runs: int,
    horizon: int,
    seed: int,
) -> DelayReport:
    """Monte Carlo mean time to false alarm when the change never happens.

    Trajectories follow the pre-change pair for the whole horizon while the
    detector still tests for the change; runs without an alarm are censored
    at the horizon and contribute the horizon as a lower bound.
    """
    records = detection_records(
        sc, mode, c, runs, horizon, seed, false_alarm=True
    )
    times: list[float] = []
    censored = 0
    for _, stop, _ in records:
        if stop is None:
            censored += 1
            times.append(float(horizon))
        else:
            times.append(float(stop))
    mean, half = _mean_ci(times)
    return DelayReport(
        mean_delay=None,
        ci_halfwidth=half,
        mean_time_to_false_alarm=mean,
        runs=runs,
        censored=censored,
    )


def _run_seed(seed: int, index: int) -> int:
    # Consecutive integers give well-separated generator streams, and the
    # mapping is stable regardless of run execution order.
    return seed + index
