"""Exact information rates of an abrupt change and the induced privacy level.

Two eavesdropper models are covered:

- full information: states and actions are observed, and the per-step rate
  splits into a model-divergence term plus a policy-divergence term, both
  averaged under the post-change stationary law;
- limited information: only states are observed, and the rate is the
  KL-divergence rate between the two closed-loop kernels.

Rates are extended reals: ``math.inf`` is returned exactly when absolute
continuity fails on the visited support, and the offending sites are reported
as diagnostics. The privacy level is the reciprocal rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .mdp import (
    SUPPORT_FLOOR,
    Mdp,
    Policy,
    induced_chain,
    stationary_distribution,
)

Site = tuple[str, tuple[int, ...]]


def kl_categorical(p, q) -> float:
    """KL divergence ``sum_i p_i ln(p_i/q_i)`` between finite distributions.

    Terms with ``p_i = 0`` contribute nothing; any ``p_i > 0`` with ``q_i = 0``
    makes the divergence infinite. Entries at or below the support floor are
    treated as exact zeros (they guard against parsed-float dust).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ShapeMismatch(f"distributions have shapes {p.shape} and {q.shape}")
    on = p > SUPPORT_FLOOR
    if np.any(on & (q <= SUPPORT_FLOOR)):
        return math.inf
    ps = p[on]
    return float(np.sum(ps * (np.log(ps) - np.log(q[on]))))


def kl_bernoulli(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), with 0 ln 0 = 0."""
    return kl_categorical([p, 1.0 - p], [q, 1.0 - q])


def privacy_level(rate: float) -> float:
    """Reciprocal rate: infinite at rate 0, zero at infinite rate."""
    if rate < 0:
        raise ShapeMismatch(f"rate must be nonnegative, got {rate}")
    if rate == 0.0:
        return math.inf
    if math.isinf(rate):
        return 0.0
    return 1.0 / rate


def _policy_violation_sites(mu1, pi1, pi0) -> list[Site]:
    sites = []
    for x in np.flatnonzero(mu1 > SUPPORT_FLOOR):
        on = pi1[x] > SUPPORT_FLOOR
        if np.any(on & (pi0[x] <= SUPPORT_FLOOR)):
            sites.append(("full", (int(x),)))
    return sites


def _model_violation_sites(mu1, pi1, P1, P0) -> list[Site]:
    sites = []
    for x in np.flatnonzero(mu1 > SUPPORT_FLOOR):
        for u in np.flatnonzero(pi1[x] > SUPPORT_FLOOR):
            on = P1[u, x] > SUPPORT_FLOOR
            if np.any(on & (P0[u, x] <= SUPPORT_FLOOR)):
                sites.append(("full", (int(x), int(u))))
    return sites


def _limited_violation_sites(mu1, K1, K0) -> list[Site]:
    sites = []
    for x in np.flatnonzero(mu1 > SUPPORT_FLOOR):
        on = K1[x] > SUPPORT_FLOOR
        if np.any(on & (K0[x] <= SUPPORT_FLOOR)):
            sites.append(("limited", (int(x),)))
    return sites


def full_info_rate(m0: Mdp, m1: Mdp, pi0: Policy, pi1: Policy) -> float:
    """Per-step information rate when states and actions are observed.

    Equals the stationary average of the model KL plus the stationary average
    of the policy KL; infinite exactly when the post-change policy or kernel
    escapes the support of the pre-change one somewhere on the visited set.
    """
    mu1 = stationary_distribution(induced_chain(m1, pi1))
    p1, p0 = pi1.pi, pi0.pi
    if _policy_violation_sites(mu1, p1, p0) or _model_violation_sites(
        mu1, p1, m1.P, m0.P
    ):
        return math.inf
    total = 0.0
    for x in range(m1.n_states):
        if mu1[x] <= SUPPORT_FLOOR:
            continue
        for u in range(m1.n_actions):
            w = p1[x, u]
            if w <= SUPPORT_FLOOR:
                continue
            total += mu1[x] * w * kl_categorical(m1.P[u, x], m0.P[u, x])
        total += mu1[x] * kl_categorical(p1[x], p0[x])
    return total


def limited_info_rate(m0: Mdp, m1: Mdp, pi0: Policy, pi1: Policy) -> float:
    """Per-step information rate when only states are observed.

    The KL-divergence rate between the closed-loop kernels under the
    post-change stationary law; never exceeds the full-information rate.
    """
    K1 = induced_chain(m1, pi1)
    K0 = induced_chain(m0, pi0)
    mu1 = stationary_distribution(K1)
    if _limited_violation_sites(mu1, K1, K0):
        return math.inf
    total = 0.0
    for x in range(m1.n_states):
        if mu1[x] <= SUPPORT_FLOOR:
            continue
        total += mu1[x] * kl_categorical(K1[x], K0[x])
    return total


def limited_info_lower_bound(m0: Mdp, m1: Mdp, pi0: Policy, pi1: Policy) -> float:
    """Data-processing lower bound on the limited-information rate.

    For each state, the best single next-state indicator gives a Bernoulli
    divergence; the bound is its stationary average.
    """
    K1 = induced_chain(m1, pi1)
    K0 = induced_chain(m0, pi0)
    mu1 = stationary_distribution(K1)
    total = 0.0
    for x in range(m1.n_states):
        if mu1[x] <= SUPPORT_FLOOR:
            continue
        best = max(
            kl_bernoulli(float(K1[x, y]), float(K0[x, y]))
            for y in range(K1.shape[1])
        )
        total += mu1[x] * best
        if math.isinf(total):
            return math.inf
    return total


@dataclass(frozen=True)
class PrivacyReport:
    """Rates, bound, privacy levels, and absolute-continuity diagnostics.

    ``ac_violations`` lists ``(mode, site)`` pairs: state sites ``(x,)`` and
    state-action sites ``(x, u)`` where the post-change law escapes the
    support of the pre-change law. A rate is infinite exactly when its mode
    has at least one violation recorded.
    """

    i_f: float
    i_l: float
    i_l_lower: float
    privacy_full: float
    privacy_limited: float
    ac_violations: list[Site] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "i_f": self.i_f,
            "i_l": self.i_l,
            "i_l_lower": self.i_l_lower,
            "privacy_full": self.privacy_full,
            "privacy_limited": self.privacy_limited,
            "ac_violations": [
                {"mode": mode, "site": list(site)} for mode, site in self.ac_violations
            ],
        }


def privacy_report(m0: Mdp, m1: Mdp, pi0: Policy, pi1: Policy) -> PrivacyReport:
    """Assemble both rates, the lower bound, and privacy levels in one pass."""
    mu1 = stationary_distribution(induced_chain(m1, pi1))
    K1 = induced_chain(m1, pi1)
    K0 = induced_chain(m0, pi0)
    violations = (
        _policy_violation_sites(mu1, pi1.pi, pi0.pi)
        + _model_violation_sites(mu1, pi1.pi, m1.P, m0.P)
        + _limited_violation_sites(mu1, K1, K0)
    )
    i_f = full_info_rate(m0, m1, pi0, pi1)
    i_l = limited_info_rate(m0, m1, pi0, pi1)
    bound = limited_info_lower_bound(m0, m1, pi0, pi1)
    return PrivacyReport(
        i_f=i_f,
        i_l=i_l,
        i_l_lower=bound,
        privacy_full=privacy_level(i_f),
        privacy_limited=privacy_level(i_l),
        ac_violations=violations,
    )
