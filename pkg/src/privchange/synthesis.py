"""Policy synthesis: best-privacy programs and privacy-utility trade-offs.

Four solvers are provided over occupancy-measure polytopes:

- :func:`best_privacy_full`: the full-information best-privacy problem is a
  plain linear program in the post-change occupancy measure;
- :func:`best_privacy_limited`: the limited-information best-privacy problem
  is a concave minimization, handled by a convex-concave procedure (CCP);
- :func:`tradeoff_full` / :func:`tradeoff_limited`: reward-minus-rate
  trade-offs, also difference-of-convex programs handled by the CCP.

The CCP linearizes the concave part at the current iterate and solves the
resulting convex subproblem (exponential-cone program) with cvxpy/Clarabel.
Each accepted step is guarded by an exact objective evaluation, so recorded
objective histories are strictly nonincreasing. Pure LPs go through scipy's
HiGHS backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog

from .errors import (
    Infeasible,
    InfiniteCost,
    NonPositiveEntry,
    NotConverged,
    NotIrreducible,
    ShapeMismatch,
    Unbounded,
)
from .mdp import (
    Mdp,
    OccupancyMeasure,
    Policy,
    ergodic_value,
    mixture_mdp,
    occupancy_from_policy,
    occupancy_residual,
    policy_from_occupancy,
    uniform_policy,
)
from .metrics import (
    full_info_rate,
    kl_categorical,
    limited_info_rate,
    privacy_level,
)

# Weight of the uniform point mixed into every iterate to keep it interior.
_INTERIOR_MIX = 1e-10


@dataclass(frozen=True)
class SynthesisConfig:
    """Solver knobs shared by all synthesis operations."""

    ccp_max_iters: int = 50
    ccp_tol: float = 1e-7
    inner_max_iters: int = 5000
    inner_tol: float = 1e-8
    epsilon_floor: float = 1e-12
    restarts: int = 5
    seed: int = 0

    def validate(self) -> "SynthesisConfig":
        if min(self.ccp_tol, self.inner_tol, self.epsilon_floor) <= 0:
            raise ShapeMismatch("tolerances must be positive")
        if min(self.ccp_max_iters, self.inner_max_iters, self.restarts) < 1:
            raise ShapeMismatch("iteration and restart counts must be >= 1")
        return self


@dataclass(frozen=True)
class SynthesisResult:
    """Solution of one synthesis problem plus certification data.

    ``objective`` is the minimized objective (for trade-offs this equals
    ``lambda * rate - value``); ``rate`` and ``value`` are re-evaluated from
    the returned policies with the exact routines, independent of the solver.
    ``objective_history`` records the exact objective at every accepted CCP
    iterate of the winning restart.
    """

    xi0: OccupancyMeasure
    xi1: OccupancyMeasure
    pi0: Policy
    pi1: Policy
    objective: float
    rate: float
    value: float | None
    feasibility_residual: float
    iterations: int
    converged: bool
    restart_index: int
    objective_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "xi0": self.xi0.xi.tolist(),
            "xi1": self.xi1.xi.tolist(),
            "pi0": self.pi0.pi.tolist(),
            "pi1": self.pi1.pi.tolist(),
            "objective": self.objective,
            "rate": self.rate,
            "value": self.value,
            "feasibility_residual": self.feasibility_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "restart_index": self.restart_index,
            "objective_history": list(self.objective_history),
        }


def model_kl_table(m0: Mdp, m1: Mdp) -> np.ndarray:
    """Per-(state, action) divergence of post- vs pre-change next-state rows."""
    if (m0.n_states, m0.n_actions) != (m1.n_states, m1.n_actions):
        raise ShapeMismatch("models must share state and action spaces")
    d = np.empty((m1.n_states, m1.n_actions))
    for x in range(m1.n_states):
        for u in range(m1.n_actions):
            d[x, u] = kl_categorical(m1.P[u, x], m0.P[u, x])
    return d


# ---------------------------------------------------------------------------
# Occupancy linear programming
# ---------------------------------------------------------------------------


def _stationarity_matrix(P: np.ndarray) -> np.ndarray:
    """Rows y of the linear map xi -> inflow(y) - marginal(y), xi flattened C-order."""
    n_actions, n_states, _ = P.shape
    S = np.zeros((n_states, n_states * n_actions))
    for u in range(n_actions):
        for x in range(n_states):
            col = x * n_actions + u
            S[:, col] += P[u, x, :]
            S[x, col] -= 1.0
    return S


def _next_state_matrix(P: np.ndarray) -> np.ndarray:
    """Linear map xi -> joint mass over (x, y), both flattened C-order."""
    n_actions, n_states, _ = P.shape
    A = np.zeros((n_states * n_states, n_states * n_actions))
    for u in range(n_actions):
        for x in range(n_states):
            A[x * n_states : (x + 1) * n_states, x * n_actions + u] = P[u, x, :]
    return A


def solve_occupancy_lp(
    cost: np.ndarray, m: Mdp, forbid: np.ndarray | None = None
) -> OccupancyMeasure:
    """Minimize ``<cost, xi>`` over the stationary occupancy polytope of ``m``.

    ``forbid`` marks cells pinned to zero (used to exclude infinite-cost
    support). Unboundedness cannot occur over the simplex, so it signals a
    backend bug and is surfaced as such.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (m.n_states, m.n_actions):
        raise ShapeMismatch(
            f"cost has shape {cost.shape}, expected ({m.n_states}, {m.n_actions})"
        )
    if not np.all(np.isfinite(cost)):
        raise ShapeMismatch("cost must be finite; pin unusable cells via forbid")
    n = m.n_states * m.n_actions
    a_eq = np.vstack([_stationarity_matrix(m.P), np.ones((1, n))])
    b_eq = np.zeros(m.n_states + 1)
    b_eq[-1] = 1.0
    if forbid is None:
        bounds = [(0.0, None)] * n
    else:
        bounds = [
            (0.0, 0.0) if forbid.flat[i] else (0.0, None) for i in range(n)
        ]
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        raise Infeasible("no stationary occupancy satisfies the constraints")
    if res.status == 3:
        raise Unbounded("occupancy LP reported unbounded; this is a solver bug")
    if not res.success:
        raise NotConverged(f"occupancy LP failed: {res.message}")
    xi = np.clip(res.x.reshape(m.n_states, m.n_actions), 0.0, None)
    xi /= xi.sum()
    out = OccupancyMeasure(xi)
    resid = occupancy_residual(out, m)
    if resid > 1e-8:
        raise NotConverged(f"occupancy LP residual {resid:.3e} exceeds 1e-8")
    return out


# ---------------------------------------------------------------------------
# Convexity probes for the policy-ratio divergence
# ---------------------------------------------------------------------------


def _check_positive(mat, name: str) -> np.ndarray:
    a = np.asarray(mat, dtype=float)
    if np.any(a <= 0.0) or not np.all(np.isfinite(a)):
        raise NonPositiveEntry(f"{name} must be strictly positive")
    return a


def q_dc_decomposition(alpha, beta) -> tuple[float, float, float]:
    """Row-conditional divergence ``q`` and its convex-minus-convex split.

    ``q(alpha, beta)`` compares the row-normalized conditionals of two joint
    tables; it equals ``f - g`` where ``f`` is the joint divergence and ``g``
    the divergence of the row marginals. Returns ``(q, f, g)``.
    """
    a = _check_positive(alpha, "alpha")
    b = _check_positive(beta, "beta")
    if a.shape != b.shape:
        raise ShapeMismatch(f"tables have shapes {a.shape} and {b.shape}")
    sa = a.sum(axis=1, keepdims=True)
    sb = b.sum(axis=1, keepdims=True)
    q = float(np.sum(a * np.log((a / sa) / (b / sb))))
    f = float(np.sum(a * np.log(a / b)))
    g = float(np.sum(sa * np.log(sa / sb)))
    return q, f, g


def dc_gap(x_pair, y_pair, lam: float) -> float:
    """Convexity gap of ``q`` along the segment between two table pairs.

    Evaluates ``lam*q(x) + (1-lam)*q(y) - q(lam*x + (1-lam)*y)``; a negative
    value certifies non-convexity of ``q`` at this triple.
    """
    if not 0.0 <= lam <= 1.0:
        raise ShapeMismatch(f"lam must be in [0, 1], got {lam}")
    a, b = (_check_positive(m, n) for m, n in zip(x_pair, ("alpha", "beta")))
    a2, b2 = (_check_positive(m, n) for m, n in zip(y_pair, ("alpha'", "beta'")))
    qx, _, _ = q_dc_decomposition(a, b)
    qy, _, _ = q_dc_decomposition(a2, b2)
    qm, _, _ = q_dc_decomposition(lam * a + (1 - lam) * a2, lam * b + (1 - lam) * b2)
    return lam * qx + (1 - lam) * qy - qm


# ---------------------------------------------------------------------------
# CCP subproblem machinery
# ---------------------------------------------------------------------------


def _solve_cvxpy(problem: cp.Problem, cfg: SynthesisConfig) -> None:
    tol = min(cfg.inner_tol, 1e-9)
    try:
        problem.solve(
            solver=cp.CLARABEL,
            max_iter=min(cfg.inner_max_iters, 10_000),
            tol_gap_abs=tol,
            tol_gap_rel=tol,
            tol_feas=tol,
        )
    except cp.error.SolverError as exc:
        raise NotConverged(f"inner conic solver failed: {exc}") from exc
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise NotConverged(f"inner conic solver status: {problem.status}")


def _entropy_sum(w: np.ndarray, floor: float) -> float:
    on = w > floor
    return float(np.sum(w[on] * np.log(w[on])))


def _rel_entr_sum(a: np.ndarray, b: np.ndarray, floor: float) -> float:
    on = a > floor
    if not np.any(on):
        return 0.0
    bb = np.maximum(b[on], floor)
    return float(np.sum(a[on] * (np.log(a[on]) - np.log(bb))))


def _interior_joint(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    s = x.sum()
    x = x / s if s > 0 else np.full_like(x, 1.0 / x.size)
    return (1.0 - _INTERIOR_MIX) * x + _INTERIOR_MIX / x.size


def _interior_rows(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    s = x.sum(axis=1, keepdims=True)
    n = x.shape[1]
    x = np.where(s > 0, x / np.where(s > 0, s, 1.0), 1.0 / n)
    return (1.0 - _INTERIOR_MIX) * x + _INTERIOR_MIX / n


class LimitedPrivacyProblem:
    """Rate-only concave program over (post-change occupancy, pre-change policy).

    A point is the pair ``(xi1, alpha)`` with ``xi1`` an occupancy table of
    the post-change model and ``alpha`` a row-stochastic pre-change policy.
    The objective is the exact limited-information rate; its concave part is
    the negative marginal entropy of ``xi1``.
    """

    kind = "limited-privacy"

    def __init__(self, m0: Mdp, m1: Mdp, cfg: SynthesisConfig):
        self.m0, self.m1, self.cfg = m0, m1, cfg
        X, U = m1.n_states, m1.n_actions
        self._shape = (X, U)
        self._A1 = _next_state_matrix(m1.P)
        self._A0 = _next_state_matrix(m0.P)

        xi = cp.Variable(X * U, nonneg=True)
        al = cp.Variable(X * U, nonneg=True)
        self._grad = cp.Parameter(X * U)
        row_sum = np.zeros((X, X * U))
        for x in range(X):
            row_sum[x, x * U : (x + 1) * U] = 1.0
        constraints = [
            cp.sum(xi) == 1,
            _stationarity_matrix(m1.P) @ xi == np.zeros(X),
            row_sum @ al == np.ones(X),
        ]
        objective = cp.Minimize(
            cp.sum(cp.rel_entr(self._A1 @ xi, self._A0 @ al)) - self._grad @ xi
        )
        self._cvx = cp.Problem(objective, constraints)
        self._xi_var, self._al_var = xi, al

    def interior(self, point):
        xi1, alpha = point
        return _interior_joint(np.asarray(xi1, float)), _interior_rows(
            np.asarray(alpha, float)
        )

    def objective(self, point) -> float:
        xi1, alpha = point
        floor = self.cfg.epsilon_floor
        m1 = self._A1 @ xi1.ravel()
        m0 = self._A0 @ alpha.ravel()
        f = _rel_entr_sum(m1, m0, floor)
        g = _entropy_sum(xi1.sum(axis=1), floor)
        return f - g

    def concave_linearization(self, anchor) -> np.ndarray:
        """Gradient of the convex marginal-entropy part at the anchor."""
        xi1, _ = anchor
        s = np.maximum(xi1.sum(axis=1), self.cfg.epsilon_floor)
        return np.repeat(np.log(s) + 1.0, self._shape[1])

    def linearized_objective(self, point, anchor) -> float:
        xi1, alpha = point
        axi1, _ = anchor
        floor = self.cfg.epsilon_floor
        f = _rel_entr_sum(self._A1 @ xi1.ravel(), self._A0 @ alpha.ravel(), floor)
        g_anchor = _entropy_sum(axi1.sum(axis=1), floor)
        grad = self.concave_linearization(anchor)
        return f - (g_anchor + float(grad @ (xi1.ravel() - axi1.ravel())))

    def solve_linearized(self, anchor):
        self._grad.value = self.concave_linearization(anchor)
        _solve_cvxpy(self._cvx, self.cfg)
        X, U = self._shape
        return (
            np.asarray(self._xi_var.value).reshape(X, U),
            np.asarray(self._al_var.value).reshape(X, U),
        )

    def feasibility_residual(self, point) -> float:
        xi1, alpha = point
        row_dev = float(np.max(np.abs(alpha.sum(axis=1) - 1.0)))
        neg = max(0.0, -float(alpha.min()))
        return max(occupancy_residual(OccupancyMeasure(xi1), self.m1), row_dev, neg)

    def initial_points(self, rng: np.random.Generator, count: int, warms=()):
        X, U = self._shape
        points = list(warms)
        points.append(
            (occupancy_from_policy(self.m1, uniform_policy(self.m1)).xi,
             uniform_policy(self.m0).pi)
        )
        while len(points) < count:
            pi = _random_policy(X, U, rng)
            try:
                xi = occupancy_from_policy(self.m1, Policy(pi)).xi
            except NotIrreducible:
                continue
            points.append((xi, _random_policy(X, U, rng)))
        return points[:count]


class TradeoffProblem:
    """Reward/rate trade-off over the pair of occupancy measures.

    A point is ``(xi0, xi1)``. The exact objective is
    ``lam * rate - (rho * <xi1, r1> + (1 - rho) * <xi0, r0>)`` where the rate
    is the full- or limited-information rate expressed in occupancy variables;
    the concave part is ``-lam`` times the marginal relative entropy.
    """

    def __init__(self, m0: Mdp, m1: Mdp, rho: float, lam: float, mode: str,
                 cfg: SynthesisConfig):
        if mode not in ("full", "limited"):
            raise ShapeMismatch(f"mode must be 'full' or 'limited', got {mode!r}")
        if lam <= 0:
            raise ShapeMismatch("TradeoffProblem requires lam > 0")
        self.m0, self.m1, self.rho, self.lam, self.mode = m0, m1, rho, lam, mode
        self.kind = f"tradeoff-{mode}"
        self.cfg = cfg
        X, U = m1.n_states, m1.n_actions
        self._shape = (X, U)
        self._d1 = model_kl_table(m0, m1)
        if not np.all(np.isfinite(self._d1)):
            if mode == "full":
                raise InfiniteCost(
                    "model divergence is infinite somewhere; the trade-off "
                    "objective is undefined for lam > 0"
                )
            p1_any = np.any(m1.P > 0, axis=0)
            p0_any = np.any(m0.P > 0, axis=0)
            if np.any(p1_any & ~p0_any):
                raise InfiniteCost(
                    "post-change transitions reach pairs no pre-change action "
                    "supports; the limited-information rate is infinite"
                )
        self._A1 = _next_state_matrix(m1.P)
        self._A0 = _next_state_matrix(m0.P)

        xi0 = cp.Variable(X * U, nonneg=True)
        xi1 = cp.Variable(X * U, nonneg=True)
        self._g0 = cp.Parameter(X * U)
        self._g1 = cp.Parameter(X * U)
        constraints = [
            cp.sum(xi0) == 1,
            cp.sum(xi1) == 1,
            _stationarity_matrix(m0.P) @ xi0 == np.zeros(X),
            _stationarity_matrix(m1.P) @ xi1 == np.zeros(X),
        ]
        rewards = rho * (m1.r.ravel() @ xi1) + (1 - rho) * (m0.r.ravel() @ xi0)
        if mode == "full":
            entropic = cp.sum(cp.rel_entr(xi1, xi0)) + self._d1.ravel() @ xi1
        else:
            entropic = cp.sum(cp.rel_entr(self._A1 @ xi1, self._A0 @ xi0))
        # Scaling the subproblem objective leaves its minimizer unchanged but
        # keeps the conic solver well conditioned for extreme lam.
        scale = max(1.0, lam, float(np.abs(m0.r).max()), float(np.abs(m1.r).max()))
        objective = cp.Minimize(
            (lam * entropic - rewards - self._g0 @ xi0 - self._g1 @ xi1) / scale
        )
        self._cvx = cp.Problem(objective, constraints)
        self._xi0_var, self._xi1_var = xi0, xi1

    def interior(self, point):
        xi0, xi1 = point
        return _interior_joint(np.asarray(xi0, float)), _interior_joint(
            np.asarray(xi1, float)
        )

    def _convex_part(self, xi0, xi1) -> float:
        floor = self.cfg.epsilon_floor
        if self.mode == "full":
            ent = _rel_entr_sum(xi1.ravel(), xi0.ravel(), floor) + float(
                np.sum(self._d1 * xi1)
            )
        else:
            ent = _rel_entr_sum(self._A1 @ xi1.ravel(), self._A0 @ xi0.ravel(), floor)
        rewards = self.rho * float(np.sum(self.m1.r * xi1)) + (1 - self.rho) * float(
            np.sum(self.m0.r * xi0)
        )
        return self.lam * ent - rewards

    def _marginal_entropy(self, xi0, xi1) -> float:
        return _rel_entr_sum(xi1.sum(axis=1), xi0.sum(axis=1), self.cfg.epsilon_floor)

    def objective(self, point) -> float:
        xi0, xi1 = point
        return self._convex_part(xi0, xi1) - self.lam * self._marginal_entropy(
            xi0, xi1
        )

    def concave_linearization(self, anchor) -> tuple[np.ndarray, np.ndarray]:
        """Gradient of the convex marginal term at the anchor, per block."""
        xi0, xi1 = anchor
        floor = self.cfg.epsilon_floor
        s0 = np.maximum(xi0.sum(axis=1), floor)
        s1 = np.maximum(xi1.sum(axis=1), floor)
        U = self._shape[1]
        g0 = np.repeat(-self.lam * s1 / s0, U)
        g1 = np.repeat(self.lam * (np.log(s1 / s0) + 1.0), U)
        return g0, g1

    def linearized_objective(self, point, anchor) -> float:
        xi0, xi1 = point
        a0, a1 = anchor
        g0, g1 = self.concave_linearization(anchor)
        lin = (
            self.lam * self._marginal_entropy(a0, a1)
            + float(g0 @ (xi0.ravel() - a0.ravel()))
            + float(g1 @ (xi1.ravel() - a1.ravel()))
        )
        return self._convex_part(xi0, xi1) - lin

    def solve_linearized(self, anchor):
        # The compiled objective already subtracts the parameter terms, so the
        # parameters carry the gradient itself; constants drop out.
        g0, g1 = self.concave_linearization(anchor)
        self._g0.value = g0
        self._g1.value = g1
        _solve_cvxpy(self._cvx, self.cfg)
        X, U = self._shape
        return (
            np.asarray(self._xi0_var.value).reshape(X, U),
            np.asarray(self._xi1_var.value).reshape(X, U),
        )

    def feasibility_residual(self, point) -> float:
        xi0, xi1 = point
        return max(
            occupancy_residual(OccupancyMeasure(xi0), self.m0),
            occupancy_residual(OccupancyMeasure(xi1), self.m1),
        )

    def initial_points(self, rng: np.random.Generator, count: int, warms=()):
        points = list(warms)
        points.append(
            (occupancy_from_policy(self.m0, uniform_policy(self.m0)).xi,
             occupancy_from_policy(self.m1, uniform_policy(self.m1)).xi)
        )
        try:
            xi0 = solve_occupancy_lp(-self.m0.r, self.m0).xi
            xi1 = solve_occupancy_lp(-self.m1.r, self.m1).xi
            points.append((xi0, xi1))
        except (Infeasible, NotConverged):
            pass
        X, U = self._shape
        while len(points) < count:
            try:
                xi0 = occupancy_from_policy(self.m0, Policy(_random_policy(X, U, rng))).xi
                xi1 = occupancy_from_policy(self.m1, Policy(_random_policy(X, U, rng))).xi
            except NotIrreducible:
                continue
            points.append((xi0, xi1))
        return points[:count]


def _random_policy(n_states: int, n_actions: int, rng: np.random.Generator):
    return rng.dirichlet(np.ones(n_actions), size=n_states)


def ccp_step(problem, current):
    """One guarded CCP step: linearize, solve, accept only if it improves.

    Returns the current point unchanged when the subproblem cannot improve on
    it (a stationary point of the procedure).
    """
    current = problem.interior(current)
    candidate = problem.interior(problem.solve_linearized(current))
    if problem.objective(candidate) > problem.objective(current):
        return current
    return candidate


def _ccp_minimize(problem, start, cfg: SynthesisConfig):
    # The start is only a linearization anchor and may sit outside the
    # feasible polytope (warm starts across parameter sweeps do); one
    # subproblem solve projects onto it, and the recorded history begins at
    # that feasible point. For feasible anchors this is an ordinary first
    # step, so monotonicity from the anchor's objective is preserved.
    point = problem.interior(problem.solve_linearized(problem.interior(start)))
    history = [problem.objective(point)]
    converged = False
    for _ in range(cfg.ccp_max_iters):
        candidate = problem.interior(problem.solve_linearized(point))
        obj = problem.objective(candidate)
        if not math.isfinite(obj) or obj > history[-1]:
            converged = True  # no exact descent left at this anchor
            break
        decrease = history[-1] - obj
        history.append(obj)
        point = candidate
        if decrease <= cfg.ccp_tol:
            converged = True
            break
    return point, history, len(history) - 1, converged


def _multi_start(problem, cfg: SynthesisConfig, warms=()):
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    count = cfg.restarts + len(warms)
    starts = problem.initial_points(rng, count, warms=warms)
    best = None
    for idx, start in enumerate(starts):
        point, history, iters, converged = _ccp_minimize(problem, start, cfg)
        key = (history[-1], idx)
        if best is None or key < best[0]:
            best = (key, point, history, iters, converged, idx)
    _, point, history, iters, converged, idx = best
    return point, history, iters, converged, idx


def _occupancy_or_fallback(m: Mdp, pi: Policy) -> OccupancyMeasure:
    try:
        return occupancy_from_policy(m, pi)
    except NotIrreducible:
        n = pi.pi.shape[0]
        return OccupancyMeasure(pi.pi / n)


def _certified_value(m0, m1, pi0, pi1, rho, xi0, xi1) -> float:
    """Reward term re-evaluated from the returned policies when possible."""
    try:
        v1 = ergodic_value(m1, pi1)
        v0 = ergodic_value(m0, pi0)
    except NotIrreducible:
        v1 = float(np.sum(xi1 * m1.r))
        v0 = float(np.sum(xi0 * m0.r))
    return rho * v1 + (1 - rho) * v0


# ---------------------------------------------------------------------------
# Public solvers
# ---------------------------------------------------------------------------


def best_privacy_full(m0: Mdp, m1: Mdp) -> SynthesisResult:
    """Minimize the full-information rate over post-change occupancies.

    This is a linear program whose optimal policy is shared by both regimes;
    the returned pre- and post-change policies are identical by construction.
    """
    d1 = model_kl_table(m0, m1)
    forbid = ~np.isfinite(d1)
    cost = np.where(forbid, 0.0, d1)
    try:
        xi1 = solve_occupancy_lp(cost, m1, forbid=forbid if forbid.any() else None)
    except Infeasible as exc:
        raise InfiniteCost(
            "every stationary occupancy of the post-change model touches "
            "state-action pairs with infinite divergence"
        ) from exc
    pi1 = policy_from_occupancy(xi1)
    pi0 = Policy(pi1.pi.copy())
    objective = float(np.sum(cost * xi1.xi))
    rate = full_info_rate(m0, m1, pi0, pi1)
    return SynthesisResult(
        xi0=_occupancy_or_fallback(m0, pi0),
        xi1=xi1,
        pi0=pi0,
        pi1=pi1,
        objective=objective,
        rate=rate,
        value=None,
        feasibility_residual=occupancy_residual(xi1, m1),
        iterations=1,
        converged=True,
        restart_index=0,
        objective_history=[objective],
    )


def best_privacy_limited(
    m0: Mdp,
    m1: Mdp,
    cfg: SynthesisConfig | None = None,
    warm_start=None,
) -> SynthesisResult:
    """Minimize the limited-information rate over (occupancy, pre-change policy).

    Runs the CCP from ``cfg.restarts`` starts plus the full-information LP
    solution (whose limited-information rate never exceeds the LP optimum,
    so the result is guaranteed at least that private). ``warm_start`` adds
    one more caller-supplied ``(xi1, alpha)`` start, used by parameter sweeps.
    """
    cfg = (cfg or SynthesisConfig()).validate()
    problem = LimitedPrivacyProblem(m0, m1, cfg)
    warms = [] if warm_start is None else [warm_start]
    try:
        lp = best_privacy_full(m0, m1)
        warms.append((lp.xi1.xi, lp.pi1.pi))
    except InfiniteCost:
        pass
    point, history, iters, converged, idx = _multi_start(problem, cfg, warms=warms)
    xi1, alpha = point
    pi1 = policy_from_occupancy(OccupancyMeasure(xi1))
    pi0 = Policy(alpha.copy())
    rate = limited_info_rate(m0, m1, pi0, pi1)
    return SynthesisResult(
        xi0=_occupancy_or_fallback(m0, pi0),
        xi1=OccupancyMeasure(xi1),
        pi0=pi0,
        pi1=pi1,
        objective=history[-1],
        rate=rate,
        value=None,
        feasibility_residual=problem.feasibility_residual(point),
        iterations=iters,
        converged=converged,
        restart_index=idx,
        objective_history=history,
    )


def _lambda_zero_tradeoff(m0: Mdp, m1: Mdp, rho: float, mode: str) -> SynthesisResult:
    xi0 = solve_occupancy_lp(-m0.r, m0)
    xi1 = solve_occupancy_lp(-m1.r, m1)
    pi0 = policy_from_occupancy(xi0)
    pi1 = policy_from_occupancy(xi1)
    value = _certified_value(m0, m1, pi0, pi1, rho, xi0.xi, xi1.xi)
    rate_fn = full_info_rate if mode == "full" else limited_info_rate
    rate = rate_fn(m0, m1, pi0, pi1)
    residual = max(occupancy_residual(xi0, m0), occupancy_residual(xi1, m1))
    return SynthesisResult(
        xi0=xi0,
        xi1=xi1,
        pi0=pi0,
        pi1=pi1,
        objective=-value,
        rate=rate,
        value=value,
        feasibility_residual=residual,
        iterations=1,
        converged=True,
        restart_index=0,
        objective_history=[-value],
    )


def _tradeoff(
    m0: Mdp,
    m1: Mdp,
    rho: float,
    lam: float,
    cfg: SynthesisConfig | None,
    mode: str,
    warm_start=None,
) -> SynthesisResult:
    if not 0.0 <= rho <= 1.0:
        raise ShapeMismatch(f"rho must be in [0, 1], got {rho}")
    if lam < 0:
        raise ShapeMismatch(f"lambda must be nonnegative, got {lam}")
    cfg = (cfg or SynthesisConfig()).validate()
    if lam == 0.0:
        return _lambda_zero_tradeoff(m0, m1, rho, mode)
    problem = TradeoffProblem(m0, m1, rho, lam, mode, cfg)
    warms = [] if warm_start is None else [warm_start]
    point, history, iters, converged, idx = _multi_start(problem, cfg, warms=warms)
    xi0, xi1 = point
    pi0 = policy_from_occupancy(OccupancyMeasure(xi0))
    pi1 = policy_from_occupancy(OccupancyMeasure(xi1))
    value = _certified_value(m0, m1, pi0, pi1, rho, xi0, xi1)
    rate_fn = full_info_rate if mode == "full" else limited_info_rate
    rate = rate_fn(m0, m1, pi0, pi1)
    return SynthesisResult(
        xi0=OccupancyMeasure(xi0),
        xi1=OccupancyMeasure(xi1),
        pi0=pi0,
        pi1=pi1,
        objective=history[-1],
        rate=rate,
        value=value,
        feasibility_residual=problem.feasibility_residual(point),
        iterations=iters,
        converged=converged,
        restart_index=idx,
        objective_history=history,
    )


def tradeoff_full(
    m0: Mdp,
    m1: Mdp,
    rho: float,
    lam: float,
    cfg: SynthesisConfig | None = None,
    warm_start=None,
) -> SynthesisResult:
    """Maximize reward minus ``lam`` times the full-information rate.

    At ``lam = 0`` this decouples into two independent average-reward LPs.
    """
    return _tradeoff(m0, m1, rho, lam, cfg, "full", warm_start)


def tradeoff_limited(
    m0: Mdp,
    m1: Mdp,
    rho: float,
    lam: float,
    cfg: SynthesisConfig | None = None,
    warm_start=None,
) -> SynthesisResult:
    """Maximize reward minus ``lam`` times the limited-information rate."""
    return _tradeoff(m0, m1, rho, lam, cfg, "limited", warm_start)


def sweep_theta(
    m0: Mdp, m1: Mdp, grid, cfg: SynthesisConfig | None = None
) -> list[dict]:
    """Best privacy against kernel mixtures, per grid point.

    For each ``theta`` the pre-change model is compared against the mixture
    ``theta * P0 + (1 - theta) * P1``; both best-privacy solvers run, with the
    limited-information CCP warm-started from the previous cell's solution.
    Rows carry the rates, the privacy levels, and the full results.
    """
    cfg = (cfg or SynthesisConfig()).validate()
    rows = []
    warm = None
    for theta in grid:
        m_theta = mixture_mdp(m0, m1, float(theta))
        full = best_privacy_full(m0, m_theta)
        limited = best_privacy_limited(m0, m_theta, cfg, warm_start=warm)
        warm = (limited.xi1.xi.copy(), limited.pi0.pi.copy())
        rows.append(
            {
                "theta": float(theta),
                "i_f_best": full.rate,
                "i_l_best": limited.rate,
                "privacy_f": privacy_level(full.rate),
                "privacy_l": privacy_level(limited.rate),
                "full_result": full,
                "limited_result": limited,
            }
        )
    return rows
