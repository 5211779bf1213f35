"""Additive-change linear Gaussian systems: closed-form privacy and trade-offs.

The model is ``x_{t+1} = A x_t + B u_t + F theta 1{t >= nu} + w_t`` with
``w_t ~ N(0, Q)`` and a stabilizing state feedback ``u_t = K x_t + offset``.
Offsets are the optimization variables: in the full-information case the
policy noise ``N(alpha_i, R)`` keeps policies mutually absolutely continuous;
in the limited-information case offsets are deterministic and the process
noise does the smoothing.

All dense solves are factorization-based; nothing inverts a matrix entry-wise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve

from .errors import (
    LambdaNonpositive,
    NotConverged,
    NotSchur,
    NotSPD,
    ShapeMismatch,
    SingularL,
    SingularProjection,
)

_SCHUR_MARGIN = 1e-12
_COND_WARN = 1e12


@dataclass(frozen=True)
class LinearSystem:
    """State-space model with an additive change of magnitude ``F @ theta``.

    ``K`` is the (given) stabilizing gain with ``A + B K`` Schur; ``R`` is the
    policy noise covariance used in the full-information case.
    """

    A: np.ndarray
    B: np.ndarray
    F: np.ndarray
    theta: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    R: np.ndarray
    nu: int

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def closed_loop(self) -> np.ndarray:
        return self.A + self.B @ self.K

    @property
    def change(self) -> np.ndarray:
        """The additive shift ``F @ theta``."""
        return self.F @ self.theta


@dataclass(frozen=True)
class LinearTradeoffSolution:
    """Optimal offsets with the value, rate, and stationary covariance there."""

    alpha0: np.ndarray
    alpha1: np.ndarray
    value: float
    rate: float
    sigma: np.ndarray


def _chol(M: np.ndarray, name: str):
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-10):
        raise NotSPD(f"{name} must be symmetric")
    try:
        return cho_factor((M + M.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"{name} is not positive definite") from exc


def is_schur(M: np.ndarray) -> bool:
    """Spectral radius strictly below one (with a small safety margin)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch("is_schur expects a square matrix")
    return float(np.max(np.abs(np.linalg.eigvals(M)))) < 1.0 - _SCHUR_MARGIN


def make_linear_system(A, B, F, theta, Q, K, R, nu: int = 1) -> LinearSystem:
    """Build and validate a :class:`LinearSystem` from array-likes."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    n = A.shape[0]
    m = B.shape[1]
    if A.shape != (n, n):
        raise ShapeMismatch("A must be square")
    if B.shape[0] != n:
        raise ShapeMismatch("B must have as many rows as A")
    if F.shape[0] != n or F.shape[1] != theta.shape[0]:
        raise ShapeMismatch("F must be n-by-k with theta of length k")
    if K.shape != (m, n):
        raise ShapeMismatch(f"K must have shape ({m}, {n})")
    if Q.shape != (n, n) or R.shape != (m, m):
        raise ShapeMismatch("Q must be n-by-n and R m-by-m")
    if nu < 1:
        raise ShapeMismatch("nu must be a positive integer")
    _chol(Q, "Q")
    _chol(R, "R")
    if np.linalg.matrix_rank(B) < m:
        raise SingularProjection("columns of B must be linearly independent")
    sys = LinearSystem(A=A, B=B, F=F, theta=theta, Q=Q, K=K, R=R, nu=int(nu))
    if not is_schur(sys.closed_loop):
        raise NotSchur("A + B K must have spectral radius below one")
    return sys


def solve_lyapunov(A_cl: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Solve ``Sigma = A_cl Sigma A_cl^T + W`` for a Schur ``A_cl``.

    Small systems go through the vectorized linear solve; larger ones fall
    back to fixed-point iteration. The residual is checked to 1e-9.
    """
    A_cl = np.asarray(A_cl, dtype=float)
    W = np.asarray(W, dtype=float)
    if not is_schur(A_cl):
        raise NotSchur("Lyapunov recursion diverges for non-Schur dynamics")
    if W.shape != A_cl.shape or not np.allclose(W, W.T, atol=1e-9):
        raise ShapeMismatch("W must be symmetric with the shape of A_cl")
    n = A_cl.shape[0]
    if n <= 20:
        M = np.eye(n * n) - np.kron(A_cl, A_cl)
        sigma = solve(M, W.ravel()).reshape(n, n)
    else:
        sigma = W.copy()
        for _ in range(100_000):
            nxt = A_cl @ sigma @ A_cl.T + W
            if np.max(np.abs(nxt - sigma)) < 1e-12:
                sigma = nxt
                break
            sigma = nxt
    sigma = (sigma + sigma.T) / 2.0
    residual = float(np.max(np.abs(sigma - A_cl @ sigma @ A_cl.T - W)))
    if residual > 1e-9:
        raise NotConverged(f"Lyapunov residual {residual:.3e} exceeds 1e-9")
    return sigma


def gaussian_kl_equal_cov(m1, m0, Q) -> float:
    """KL divergence between Gaussians sharing covariance ``Q``:
    half the squared Mahalanobis distance of the means."""
    m1 = np.atleast_1d(np.asarray(m1, dtype=float))
    m0 = np.atleast_1d(np.asarray(m0, dtype=float))
    diff = m1 - m0
    qc = _chol(Q, "Q")
    return 0.5 * float(diff @ cho_solve(qc, diff))


def _l_and_e(sys: LinearSystem):
    L = np.eye(sys.n) - sys.A - sys.B @ sys.K
    cond = np.linalg.cond(L)
    if not np.isfinite(cond):
        raise SingularL("I - A - B K is singular")
    if cond > _COND_WARN:
        warnings.warn(f"I - A - B K has condition number {cond:.3e}", stacklevel=2)
    Linv = solve(L, np.eye(sys.n))
    return L, Linv.T @ Linv, Linv


def b_tilde(sys: LinearSystem, M: np.ndarray, T: np.ndarray | None = None) -> np.ndarray:
    """The projection-like map ``(B^T (M + T) B)^{-1} B^T M``."""
    B = sys.B
    MT = M if T is None else M + T
    W = B.T @ MT @ B
    try:
        return solve(W, B.T @ M)
    except np.linalg.LinAlgError as exc:
        raise SingularProjection("B^T (M + T) B is singular") from exc


def best_privacy_full_linear(sys: LinearSystem) -> float:
    """Minimal full-information rate: the change's signal-to-noise ratio.

    Independent of the gain and of the policy noise; nothing the controller
    does can hide a mean shift from an eavesdropper who sees the actions.
    """
    return gaussian_kl_equal_cov(sys.change, np.zeros(sys.n), sys.Q)


def best_privacy_limited_linear(sys: LinearSystem) -> tuple[float, np.ndarray]:
    """Minimal limited-information rate and the offset difference achieving it.

    The optimal post-change offset cancels as much of the additive change as
    the input directions allow, in the noise-weighted geometry: ``delta_g``
    solves the normal equations ``B^T Q^{-1} (F theta + B delta_g) = 0``.
    Returns ``(rate, delta_g)``; the rate is zero when the change lies in the
    range of ``B``.
    """
    qc = _chol(sys.Q, "Q")
    v = sys.change
    BtQi = sys.B.T @ cho_solve(qc, np.eye(sys.n))
    try:
        delta_g = -solve(BtQi @ sys.B, BtQi @ v)
    except np.linalg.LinAlgError as exc:
        raise SingularProjection("B^T Q^{-1} B is singular") from exc
    resid = v + sys.B @ delta_g
    rate = 0.5 * float(resid @ cho_solve(qc, resid))
    return rate, delta_g


def full_info_rate_linear(sys: LinearSystem, alpha0, alpha1) -> float:
    """Full-information rate of offset policies: model SNR plus policy KL."""
    da = np.asarray(alpha1, float) - np.asarray(alpha0, float)
    return best_privacy_full_linear(sys) + gaussian_kl_equal_cov(
        da, np.zeros(sys.m), sys.R
    )


def limited_info_rate_linear(sys: LinearSystem, alpha0, alpha1) -> float:
    """Limited-information rate of offset policies: SNR of the net shift."""
    da = np.asarray(alpha1, float) - np.asarray(alpha0, float)
    return gaussian_kl_equal_cov(sys.change + sys.B @ da, np.zeros(sys.n), sys.Q)


def value_full_linear(
    sys: LinearSystem, rho: float, lam: float, alpha0, alpha1
) -> float:
    """Trade-off value with stochastic offset policies (reward ``-x^T x``)."""
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    alpha1 = np.atleast_1d(np.asarray(alpha1, dtype=float))
    _, E, _ = _l_and_e(sys)
    sigma = solve_lyapunov(sys.closed_loop, sys.Q + sys.B @ sys.R @ sys.B.T)
    shift = sys.B @ alpha1 + sys.change
    return (
        -(1 - rho) * float(alpha0 @ sys.B.T @ E @ sys.B @ alpha0)
        - float(np.trace(sigma))
        - rho * float(shift @ E @ shift)
        - lam * full_info_rate_linear(sys, alpha0, alpha1)
    )


def value_limited_linear(
    sys: LinearSystem, rho: float, lam: float, alpha0, alpha1
) -> float:
    """Trade-off value with deterministic offset policies (reward ``-x^T x``)."""
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    alpha1 = np.atleast_1d(np.asarray(alpha1, dtype=float))
    _, E, _ = _l_and_e(sys)
    sigma = solve_lyapunov(sys.closed_loop, sys.Q)
    shift = sys.B @ alpha1 + sys.change
    return (
        -(1 - rho) * float(alpha0 @ sys.B.T @ E @ sys.B @ alpha0)
        - float(np.trace(sigma))
        - rho * float(shift @ E @ shift)
        - lam * limited_info_rate_linear(sys, alpha0, alpha1)
    )


def tradeoff_full_linear(
    sys: LinearSystem, rho: float, lam: float
) -> LinearTradeoffSolution:
    """Closed-form optimal offsets for the full-information trade-off."""
    if lam <= 0:
        raise LambdaNonpositive("the closed forms divide by lambda")
    if not 0.0 <= rho <= 1.0:
        raise ShapeMismatch(f"rho must be in [0, 1], got {rho}")
    _, E, _ = _l_and_e(sys)
    B, R = sys.B, sys.R
    T = (np.eye(sys.n) + (2.0 * (1 - rho) * rho / lam) * E @ B @ R @ B.T) @ E
    rhs = B.T @ E @ sys.change
    try:
        alpha0 = -rho * solve(B.T @ T @ B, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularProjection("B^T T B is singular") from exc
    alpha1 = (2.0 * (1 - rho) / lam) * (R @ B.T @ E @ B @ alpha0) + alpha0
    return LinearTradeoffSolution(
        alpha0=alpha0,
        alpha1=alpha1,
        value=value_full_linear(sys, rho, lam, alpha0, alpha1),
        rate=full_info_rate_linear(sys, alpha0, alpha1),
        sigma=solve_lyapunov(sys.closed_loop, sys.Q + B @ R @ B.T),
    )


def tradeoff_limited_linear(
    sys: LinearSystem, rho: float, lam: float
) -> LinearTradeoffSolution:
    """Closed-form optimal offsets for the limited-information trade-off."""
    if lam <= 0:
        raise LambdaNonpositive("the closed forms divide by lambda")
    if not 0.0 <= rho <= 1.0:
        raise ShapeMismatch(f"rho must be in [0, 1], got {rho}")
    _, E, _ = _l_and_e(sys)
    qc = _chol(sys.Q, "Q")
    Qinv = cho_solve(qc, np.eye(sys.n))
    S = b_tilde(sys, Qinv, T=(2.0 * (1 - rho) / lam) * E)
    M = (1 - rho) * E @ sys.B @ S + rho * E
    alpha1 = -b_tilde(sys, M) @ sys.change
    alpha0 = S @ (sys.change + sys.B @ alpha1)
    return LinearTradeoffSolution(
        alpha0=alpha0,
        alpha1=alpha1,
        value=value_limited_linear(sys, rho, lam, alpha0, alpha1),
        rate=limited_info_rate_linear(sys, alpha0, alpha1),
        sigma=solve_lyapunov(sys.closed_loop, sys.Q),
    )


def post_change_offset_full(sys: LinearSystem, lam: float) -> np.ndarray:
    """Optimal post-change offset when only it is tuned (pre-change offset 0,
    all reward weight on the post-change regime), stochastic policies."""
    if lam <= 0:
        raise LambdaNonpositive("the closed form divides by lambda")
    _, E, _ = _l_and_e(sys)
    B, R = sys.B, sys.R
    W = R @ B.T @ E @ B + (lam / 2.0) * np.eye(sys.m)
    return -solve(W, R @ B.T @ E @ sys.change)


def post_change_offset_limited(sys: LinearSystem, lam: float) -> np.ndarray:
    """Same one-sided optimum with deterministic policies."""
    if lam <= 0:
        raise LambdaNonpositive("the closed form divides by lambda")
    _, E, _ = _l_and_e(sys)
    qc = _chol(sys.Q, "Q")
    Qinv = cho_solve(qc, np.eye(sys.n))
    return -b_tilde(sys, (2.0 / lam) * E + Qinv) @ sys.change


def finite_difference_gradient(fun, point: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a vector."""
    point = np.asarray(point, dtype=float)
    grad = np.zeros_like(point)
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = step
        grad[i] = (fun(point + e) - fun(point - e)) / (2.0 * step)
    return grad


@dataclass(frozen=True)
class LinearSimulation:
    """One sampled path with its per-step squared state norm."""

    states: np.ndarray
    xsq: np.ndarray
    nu: int
    seed: int

    def batch_means(self, n_batches: int = 20):
        """Time-batched means of ``|x|^2`` with 95% half-widths."""
        n = self.xsq.shape[0]
        b = max(1, n // n_batches)
        used = b * min(n_batches, n)
        chunks = self.xsq[:used].reshape(-1, b)
        means = chunks.mean(axis=1)
        if means.size > 1:
            half = 1.96 * means.std(ddof=1) / np.sqrt(means.size)
        else:
            half = 0.0
        return means, float(half)


def _stationary_start(sys: LinearSystem, alpha0: np.ndarray, stochastic: bool):
    _, _, Linv = _l_and_e(sys)
    mean = Linv @ (sys.B @ alpha0)
    W = sys.Q + (sys.B @ sys.R @ sys.B.T if stochastic else 0.0)
    sigma = solve_lyapunov(sys.closed_loop, W)
    return mean, sigma


def simulate_linear(
    sys: LinearSystem,
    alpha0,
    alpha1,
    horizon: int,
    seed: int,
    stochastic_policy: bool = False,
) -> LinearSimulation:
    """Sample one path through the change, starting at pre-change stationarity.

    The first state is drawn from the exact pre-change stationary Gaussian, so
    no burn-in is needed on the pre-change side. Deterministic given the seed.
    """
    if horizon < 1:
        raise ShapeMismatch("horizon must be >= 1")
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    alpha1 = np.atleast_1d(np.asarray(alpha1, dtype=float))
    mean, sigma = _stationary_start(sys, alpha0, stochastic_policy)
    rng = np.random.default_rng(seed)
    chol_sigma = np.linalg.cholesky(sigma + 1e-15 * np.eye(sys.n))
    chol_q = np.linalg.cholesky(sys.Q)
    chol_r = np.linalg.cholesky(sys.R) if stochastic_policy else None

    x = mean + chol_sigma @ rng.standard_normal(sys.n)
    states = np.empty((horizon, sys.n))
    change = sys.change
    for t in range(1, horizon + 1):
        states[t - 1] = x
        if t == horizon:
            break
        alpha = alpha0 if t < sys.nu else alpha1
        u = sys.K @ x + alpha
        if stochastic_policy:
            u = u + chol_r @ rng.standard_normal(sys.m)
        w = chol_q @ rng.standard_normal(sys.n)
        x = sys.A @ x + sys.B @ u + (change if t >= sys.nu else 0.0) + w
    xsq = np.einsum("ti,ti->t", states, states)
    return LinearSimulation(states=states, xsq=xsq, nu=sys.nu, seed=seed)


def average_xsq_experiment(
    sys: LinearSystem,
    alpha0,
    alpha1,
    horizon: int,
    runs: int,
    seed: int,
    stochastic_policy: bool = False,
):
    """Across-run average of ``|x_t|^2`` with pointwise 95% confidence bands.

    Runs are vectorized over the batch; returns ``(mean, ci_low, ci_high)``
    arrays of length ``horizon``.
    """
    if runs < 1 or horizon < 1:
        raise ShapeMismatch("runs and horizon must be >= 1")
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    alpha1 = np.atleast_1d(np.asarray(alpha1, dtype=float))
    mean, sigma = _stationary_start(sys, alpha0, stochastic_policy)
    rng = np.random.default_rng(seed)
    chol_sigma = np.linalg.cholesky(sigma + 1e-15 * np.eye(sys.n))
    chol_q = np.linalg.cholesky(sys.Q)
    chol_r = np.linalg.cholesky(sys.R) if stochastic_policy else None

    x = mean + rng.standard_normal((runs, sys.n)) @ chol_sigma.T
    xsq = np.empty((runs, horizon))
    change = sys.change
    acl_t = sys.closed_loop.T
    for t in range(1, horizon + 1):
        xsq[:, t - 1] = np.einsum("ri,ri->r", x, x)
        if t == horizon:
            break
        alpha = alpha0 if t < sys.nu else alpha1
        drive = sys.B @ alpha + (change if t >= sys.nu else 0.0)
        x = x @ acl_t + drive
        if stochastic_policy:
            x = x + rng.standard_normal((runs, sys.m)) @ chol_r.T @ sys.B.T
        x = x + rng.standard_normal((runs, sys.n)) @ chol_q.T
    avg = xsq.mean(axis=0)
    half = 1.96 * xsq.std(axis=0, ddof=1) / np.sqrt(runs) if runs > 1 else 0.0
    return avg, avg - half, avg + half
