"""Shared fixtures and independent test oracles.

The oracles here deliberately avoid the library's solver paths: grid searches
enumerate policies and evaluate rates from batched stationary solves, the
power-iteration oracle iterates the chain map to a fixed point, and brute
force CUSUM recomputes window maxima with two loops.
"""

from __future__ import annotations

import pathlib

import numpy as np
import pytest

from privchange import Mdp, make_mdp, model_kl_table

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scripts" / "scenarios"

THREE_STATE_P0 = [
    [[0.6, 0.3, 0.1], [0.05, 0.85, 0.1], [0.15, 0.15, 0.7]],
    [[0.5, 0.2, 0.3], [0.5, 0.3, 0.2], [0.3, 0.3, 0.4]],
]
THREE_STATE_P1 = [
    [[0.3, 0.3, 0.4], [0.35, 0.5, 0.15], [0.8, 0.05, 0.15]],
    [[0.3, 0.55, 0.15], [0.8, 0.1, 0.1], [0.5, 0.3, 0.2]],
]
THREE_STATE_R = [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]


@pytest.fixture(scope="session")
def three_state_pair() -> tuple[Mdp, Mdp]:
    m0 = make_mdp(THREE_STATE_P0, THREE_STATE_R)
    m1 = make_mdp(THREE_STATE_P1, THREE_STATE_R)
    return m0, m1


@pytest.fixture(scope="session")
def example_linear_params() -> dict:
    return dict(
        A=[[0.0, 1.0], [1.0, 1.0]],
        B=[[0.01], [1.0]],
        F=[[0.5], [0.7]],
        theta=[1.0],
        Q=np.eye(2),
        K=[[-0.7, -0.9]],
        R=[[1.0]],
        nu=200,
    )


def random_mdp(
    n_states: int,
    n_actions: int,
    rng: np.random.Generator,
    min_prob: float = 0.08,
    reward_scale: float = 1.0,
) -> Mdp:
    """Random MDP with strictly positive kernels (uniform-mixed Dirichlet rows)."""
    P = rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))
    P = (1.0 - min_prob * n_states) * P + min_prob
    r = rng.uniform(0.0, reward_scale, size=(n_states, n_actions))
    return make_mdp(P, r)


def random_policy_matrix(
    n_states: int, n_actions: int, rng: np.random.Generator, min_prob: float = 0.05
) -> np.ndarray:
    pi = rng.dirichlet(np.ones(n_actions), size=n_states)
    return (1.0 - min_prob * n_actions) * pi + min_prob


# ---------------------------------------------------------------------------
# Stationary-distribution oracles
# ---------------------------------------------------------------------------


def power_iteration_stationary(P: np.ndarray, iters: int = 200_000, tol: float = 1e-14):
    """Fixed-point iteration oracle for the stationary distribution."""
    n = P.shape[0]
    mu = np.full(n, 1.0 / n)
    for _ in range(iters):
        nxt = mu @ P
        if np.max(np.abs(nxt - mu)) < tol:
            return nxt
        mu = nxt
    return mu


def batched_stationary(K: np.ndarray) -> np.ndarray:
    """Stationary rows for a batch of small irreducible chains ``K[g]``."""
    G, n, _ = K.shape
    A = np.transpose(K, (0, 2, 1)) - np.eye(n)
    A[:, -1, :] = 1.0
    b = np.zeros((G, n, 1))
    b[:, -1, 0] = 1.0
    return np.linalg.solve(A, b)[:, :, 0]


# ---------------------------------------------------------------------------
# Policy-grid oracles (brute force over discretized policy simplices)
# ---------------------------------------------------------------------------


def policy_grid_two_actions(n_states: int, step: float = 0.02) -> np.ndarray:
    """All policies whose rows put a grid-point mass on action 0."""
    g = np.arange(0.0, 1.0 + step / 2, step)
    mesh = np.meshgrid(*([g] * n_states), indexing="ij")
    probs = np.stack([m.ravel() for m in mesh], axis=1)  # (G, n_states)
    G = probs.shape[0]
    pis = np.empty((G, n_states, 2))
    pis[:, :, 0] = probs
    pis[:, :, 1] = 1.0 - probs
    return pis


def grid_best_privacy_full(m0: Mdp, m1: Mdp, step: float = 0.02) -> float:
    """Exhaustive search of the minimal full-information rate."""
    pis = policy_grid_two_actions(m1.n_states, step)
    K1 = np.einsum("gxu,uxy->gxy", pis, m1.P)
    mu1 = batched_stationary(K1)
    d1 = model_kl_table(m0, m1)
    vals = np.einsum("gx,gxu,xu->g", mu1, pis, d1)
    return float(vals.min())


def grid_limited_rate_matrix(m0: Mdp, m1: Mdp, step: float = 0.02):
    """Limited-information rates for every (post, pre) policy-grid pair.

    Returns ``(pis, rates)`` with ``rates[g, h]`` the rate when the
    post-change policy is ``pis[g]`` and the pre-change policy ``pis[h]``.
    """
    pis = policy_grid_two_actions(m1.n_states, step)
    K1 = np.einsum("gxu,uxy->gxy", pis, m1.P)
    K0 = np.einsum("gxu,uxy->gxy", pis, m0.P)
    mu1 = batched_stationary(K1)
    G = pis.shape[0]
    W = (mu1[:, :, None] * K1).reshape(G, -1)
    ent = np.sum(W * np.log(K1.reshape(G, -1)), axis=1)
    rates = ent[:, None] - W @ np.log(K0.reshape(G, -1)).T
    return pis, rates


def grid_best_privacy_limited(m0: Mdp, m1: Mdp, step: float = 0.02) -> float:
    _, rates = grid_limited_rate_matrix(m0, m1, step)
    return float(rates.min())


def grid_tradeoff(
    m0: Mdp, m1: Mdp, rho: float, lam: float, mode: str, step: float = 0.02
) -> float:
    """Exhaustive max of reward minus ``lam`` times the rate over grid pairs."""
    pis = policy_grid_two_actions(m1.n_states, step)
    G = pis.shape[0]
    K1 = np.einsum("gxu,uxy->gxy", pis, m1.P)
    K0 = np.einsum("gxu,uxy->gxy", pis, m0.P)
    mu1 = batched_stationary(K1)
    mu0 = batched_stationary(K0)
    v1 = np.einsum("gx,gxu,xu->g", mu1, pis, m1.r)
    v0 = np.einsum("gx,gxu,xu->g", mu0, pis, m0.r)
    if mode == "limited":
        W = (mu1[:, :, None] * K1).reshape(G, -1)
        ent = np.sum(W * np.log(K1.reshape(G, -1)), axis=1)
        rate = ent[:, None] - W @ np.log(K0.reshape(G, -1)).T
    else:
        d1 = model_kl_table(m0, m1)
        model_term = np.einsum("gx,gxu,xu->g", mu1, pis, d1)
        C = (mu1[:, :, None] * pis).reshape(G, -1)
        # Clipping keeps zero-support pre-change policies finite but so costly
        # that they can never win the max, mirroring an infinite rate.
        logs = np.log(np.clip(pis.reshape(G, -1), 1e-300, None))
        pent = np.sum(np.where(C > 0, C * logs, 0.0), axis=1)
        policy_term = pent[:, None] - C @ logs.T
        rate = model_term[:, None] + policy_term
    objective = rho * v1[:, None] + (1 - rho) * v0[None, :] - lam * rate
    return float(objective.max())


# ---------------------------------------------------------------------------
# CUSUM brute force
# ---------------------------------------------------------------------------


def cusum_brute_force_path(z: np.ndarray) -> np.ndarray:
    """Direct max over windows: path[t] = max_k sum(z[k..t])."""
    n = z.shape[0]
    path = np.empty(n)
    for t in range(n):
        best = -np.inf
        for k in range(t + 1):
            best = max(best, float(np.sum(z[k : t + 1])))
        path[t] = best
    return path


def full_rate_direct(m0: Mdp, m1: Mdp, pi0: np.ndarray, pi1: np.ndarray) -> float:
    """Literal one-step expectation of the full-information log ratio.

    Sums, over stationary state-action pairs and successor (state, action)
    pairs, the log of the joint transition-and-action density ratio. This is
    the single-sum form the decomposed rate must match.
    """
    from privchange import induced_chain, stationary_distribution, Policy

    mu1 = stationary_distribution(induced_chain(m1, Policy(pi1)))
    total = 0.0
    for x in range(m1.n_states):
        for u in range(m1.n_actions):
            w = mu1[x] * pi1[x, u]
            if w == 0.0:
                continue
            for y in range(m1.n_states):
                p1 = m1.P[u, x, y]
                if p1 == 0.0:
                    continue
                for a in range(m1.n_actions):
                    q1 = pi1[y, a]
                    if q1 == 0.0:
                        continue
                    num = q1 * p1
                    den = pi0[y, a] * m0.P[u, x, y]
                    total += w * num * np.log(num / den)
    return total
