"""Finite-MDP data model, occupancy-measure algebra, and change-point simulation.

Conventions used throughout the package:

- An MDP kernel is stored as ``P[u, x, y]`` = probability of moving from state
  ``x`` to state ``y`` under action ``u``; every ``P[u]`` is row-stochastic.
- Rewards are stored as ``r[x, u]``.
- A randomized policy is ``pi[x, u]`` = probability of playing ``u`` in ``x``.
- An occupancy measure is the stationary joint state-action distribution
  ``xi[x, u]``; its state marginal is the stationary distribution of the
  closed-loop chain.
- All randomness flows through ``numpy.random.default_rng`` seeded explicitly,
  so every stochastic operation is reproducible bit-for-bit given its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    NegativeEntry,
    NonStochasticRow,
    NotIrreducible,
    ShapeMismatch,
)

# Row sums of probability tables must match 1 this closely.
ROW_SUM_TOL = 1e-12
# Parsed floats at or below this are treated as exact zeros in support tests.
SUPPORT_FLOOR = 1e-15
# Total occupancy mass must match 1 this closely.
MASS_TOL = 1e-9
# Stationarity residual allowed before an occupancy is flagged infeasible.
STATIONARITY_TOL = 1e-8


@dataclass(frozen=True)
class Mdp:
    """Finite MDP ``(n_states, n_actions, P, r)``.

    ``P`` has shape ``(n_actions, n_states, n_states)`` and ``r`` has shape
    ``(n_states, n_actions)``. Use :func:`validate_mdp` to check invariants.
    """

    n_states: int
    n_actions: int
    P: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class Policy:
    """Randomized decision rule; ``pi[x, u]`` rows live on the action simplex."""

    pi: np.ndarray


@dataclass(frozen=True)
class OccupancyMeasure:
    """Stationary state-action distribution ``xi[x, u]``."""

    xi: np.ndarray

    @property
    def state_marginal(self) -> np.ndarray:
        return self.xi.sum(axis=1)


@dataclass(frozen=True)
class ChangeScenario:
    """Pre/post-change models and policies with the change time ``nu``.

    The change time is one-based: transitions into ``X_t`` and the action at
    ``X_t`` follow the post-change pair for ``t >= nu``.
    """

    m0: Mdp
    m1: Mdp
    pi0: Policy
    pi1: Policy
    nu: int

    def model_support_ok(self) -> np.ndarray:
        """Boolean table over ``(x, u)``: post-change rows absolutely
        continuous w.r.t. the pre-change rows."""
        p1_pos = self.m1.P > SUPPORT_FLOOR
        p0_pos = self.m0.P > SUPPORT_FLOOR
        ok = ~np.any(p1_pos & ~p0_pos, axis=2)  # (u, x)
        return ok.T  # (x, u)


@dataclass(frozen=True)
class Trajectory:
    """Realized state/action path, with the change time and seed that made it."""

    states: np.ndarray
    actions: np.ndarray
    nu: int
    seed: int


def _as_float(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch(f"{name} contains non-finite entries")
    return arr


def validate_mdp(m: Mdp) -> Mdp:
    """Check shapes, nonnegativity, and row stochasticity; return ``m``."""
    if m.n_states < 1 or m.n_actions < 1:
        raise ShapeMismatch("need at least one state and one action")
    P = _as_float(m.P, "P")
    r = _as_float(m.r, "r")
    if P.shape != (m.n_actions, m.n_states, m.n_states):
        raise ShapeMismatch(
            f"P has shape {P.shape}, expected "
            f"({m.n_actions}, {m.n_states}, {m.n_states})"
        )
    if r.shape != (m.n_states, m.n_actions):
        raise ShapeMismatch(
            f"r has shape {r.shape}, expected ({m.n_states}, {m.n_actions})"
        )
    if np.any(P < 0):
        u, x, y = np.argwhere(P < 0)[0]
        raise NegativeEntry(f"P[{u}][{x}][{y}] = {P[u, x, y]} is negative")
    sums = P.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        u, x = bad[0]
        raise NonStochasticRow(f"P[{u}] row {x} sums to {sums[u, x]!r}")
    return m


def make_mdp(P, r) -> Mdp:
    """Build and validate an :class:`Mdp` from array-likes."""
    P = np.asarray(P, dtype=float)
    r = np.asarray(r, dtype=float)
    if P.ndim != 3:
        raise ShapeMismatch("P must be indexed [action][row][col]")
    m = Mdp(n_states=P.shape[1], n_actions=P.shape[0], P=P, r=r)
    return validate_mdp(m)


def mixture_mdp(m0: Mdp, m1: Mdp, theta: float) -> Mdp:
    """Kernel mixture ``theta * P0 + (1 - theta) * P1`` with post-change rewards.

    At ``theta = 1`` the mixture coincides with the pre-change kernel exactly.
    """
    if not 0.0 <= theta <= 1.0:
        raise ShapeMismatch(f"theta must be in [0, 1], got {theta}")
    if m0.P.shape != m1.P.shape:
        raise ShapeMismatch("models must share state and action spaces")
    return make_mdp(theta * m0.P + (1.0 - theta) * m1.P, m1.r)


def validate_policy(pi: Policy, m: Mdp | None = None) -> Policy:
    """Check simplex rows; optionally check the shape against an MDP."""
    p = _as_float(pi.pi, "pi")
    if p.ndim != 2:
        raise ShapeMismatch("pi must be a states-by-actions matrix")
    if m is not None and p.shape != (m.n_states, m.n_actions):
        raise ShapeMismatch(
            f"pi has shape {p.shape}, expected ({m.n_states}, {m.n_actions})"
        )
    if np.any(p < 0):
        x, u = np.argwhere(p < 0)[0]
        raise NegativeEntry(f"pi[{x}][{u}] = {p[x, u]} is negative")
    sums = p.sum(axis=1)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise NonStochasticRow(f"pi row {bad[0][0]} sums to {sums[bad[0][0]]!r}")
    return pi


def uniform_policy(m: Mdp) -> Policy:
    return Policy(np.full((m.n_states, m.n_actions), 1.0 / m.n_actions))


def induced_chain(m: Mdp, pi: Policy) -> np.ndarray:
    """Closed-loop kernel ``K[x, y] = sum_u pi[x, u] * P[u, x, y]``."""
    p = pi.pi
    if p.shape != (m.n_states, m.n_actions):
        raise ShapeMismatch(
            f"policy shape {p.shape} does not match MDP "
            f"({m.n_states}, {m.n_actions})"
        )
    return np.einsum("xu,uxy->xy", p, m.P)


def _check_strongly_connected(P_closed: np.ndarray) -> None:
    support = (P_closed > SUPPORT_FLOOR).astype(np.int8)
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    if n_comp != 1:
        raise NotIrreducible(
            f"closed-loop support graph splits into {n_comp} communicating classes"
        )


def stationary_distribution(P_closed: np.ndarray) -> np.ndarray:
    """Unique stationary distribution of an irreducible row-stochastic matrix.

    Solves the linear system ``mu^T (P - I) = 0`` with the normalization row
    appended (least squares on the stacked system, which is exact here).
    """
    P = _as_float(P_closed, "P_closed")
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ShapeMismatch("P_closed must be square")
    n = P.shape[0]
    sums = P.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9) or np.any(P < -1e-15):
        raise NonStochasticRow("P_closed is not row-stochastic")
    _check_strongly_connected(P)
    a = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    mu, *_ = np.linalg.lstsq(a, b, rcond=None)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    residual = np.max(np.abs(mu @ P - mu))
    if residual > 1e-10:
        raise NotIrreducible(
            f"stationary solve left residual {residual:.3e}; chain is numerically reducible"
        )
    return mu


def occupancy_from_policy(m: Mdp, pi: Policy) -> OccupancyMeasure:
    """Occupancy measure ``xi[x, u] = mu(x) * pi[x, u]`` of the closed loop."""
    mu = stationary_distribution(induced_chain(m, pi))
    return OccupancyMeasure(mu[:, None] * pi.pi)


def policy_from_occupancy(xi: OccupancyMeasure) -> Policy:
    """Row-normalize an occupancy measure into a policy.

    Rows with zero mass carry no information, so they are set to uniform.
    """
    x = np.asarray(xi.xi, dtype=float)
    mass = x.sum(axis=1)
    n_actions = x.shape[1]
    pi = np.empty_like(x)
    for i, s in enumerate(mass):
        if s > 0.0:
            pi[i] = x[i] / s
        else:
            pi[i] = 1.0 / n_actions
    return Policy(pi)


def occupancy_residual(xi: OccupancyMeasure, m: Mdp) -> float:
    """Max of mass, stationarity, and nonnegativity violations of ``xi``."""
    x = np.asarray(xi.xi, dtype=float)
    marg = x.sum(axis=1)
    flow = np.einsum("xu,uxy->y", x, m.P)
    return max(
        float(np.max(np.abs(flow - marg))),
        abs(float(x.sum()) - 1.0),
        max(0.0, -float(x.min())),
    )


def ergodic_value(m: Mdp, pi: Policy) -> float:
    """Long-run average reward ``sum_{x,u} xi[x,u] r[x,u]`` of a policy."""
    xi = occupancy_from_policy(m, pi)
    return float(np.sum(xi.xi * m.r))


def _row_cdfs(rows: np.ndarray) -> np.ndarray:
    c = np.cumsum(rows, axis=-1)
    c[..., -1] = 1.0  # guard accumulated rounding at the top end
    return c


def _draw(cdf_row: np.ndarray, v: float) -> int:
    i = int(np.searchsorted(cdf_row, v, side="right"))
    return min(i, cdf_row.shape[0] - 1)


def simulate(sc: ChangeScenario, horizon: int, seed: int) -> Trajectory:
    """Sample a state/action path of length ``horizon`` through the change.

    The first state is drawn from the pre-change stationary distribution.
    Actions at time ``t`` follow the pre-change policy for ``t < nu`` and the
    post-change policy afterwards; the transition into ``X_t`` follows the
    pre-change kernel when ``t < nu`` and the post-change kernel otherwise.
    """
    if horizon < 1:
        raise ShapeMismatch("horizon must be >= 1")
    mu0 = stationary_distribution(induced_chain(sc.m0, sc.pi0))
    rng = np.random.default_rng(seed)
    draws = rng.random(2 * horizon)

    pi_cdf = (_row_cdfs(sc.pi0.pi), _row_cdfs(sc.pi1.pi))
    p_cdf = (_row_cdfs(sc.m0.P), _row_cdfs(sc.m1.P))
    mu0_cdf = _row_cdfs(mu0)

    states = np.empty(horizon, dtype=np.int64)
    actions = np.empty(horizon, dtype=np.int64)
    x = _draw(mu0_cdf, draws[0])
    for t in range(1, horizon + 1):
        regime = 0 if t < sc.nu else 1
        u = _draw(pi_cdf[regime][x], draws[2 * t - 1])
        states[t - 1] = x
        actions[t - 1] = u
        if t < horizon:
            next_regime = 0 if (t + 1) < sc.nu else 1
            x = _draw(p_cdf[next_regime][u, x], draws[2 * t])
    return Trajectory(states=states, actions=actions, nu=sc.nu, seed=seed)
