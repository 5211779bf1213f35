"""Online privacy of abrupt changes in controlled Markov systems.

Quantifies how hard an eavesdropper's quickest change detection problem is
(rates and privacy levels), synthesizes privacy-maximizing and
privacy-utility-optimal policies over occupancy polytopes, gives closed forms
for additive changes in linear Gaussian systems, and validates privacy levels
empirically with a CUSUM detector simulation.
"""

from .detection import (
    CusumRun,
    DelayReport,
    LlrStream,
    cusum,
    detection_records,
    ergodic_llr_average,
    estimate_delay,
    estimate_false_alarm,
    llr_full,
    llr_limited,
)
from .linear import (
    LinearSystem,
    LinearTradeoffSolution,
    average_xsq_experiment,
    best_privacy_full_linear,
    best_privacy_limited_linear,
    gaussian_kl_equal_cov,
    is_schur,
    make_linear_system,
    simulate_linear,
    solve_lyapunov,
    tradeoff_full_linear,
    tradeoff_limited_linear,
    value_full_linear,
    value_limited_linear,
)
from .mdp import (
    ChangeScenario,
    Mdp,
    OccupancyMeasure,
    Policy,
    Trajectory,
    ergodic_value,
    induced_chain,
    make_mdp,
    mixture_mdp,
    occupancy_from_policy,
    policy_from_occupancy,
    simulate,
    stationary_distribution,
    uniform_policy,
    validate_mdp,
)
from .metrics import (
    PrivacyReport,
    full_info_rate,
    kl_bernoulli,
    kl_categorical,
    limited_info_lower_bound,
    limited_info_rate,
    privacy_level,
    privacy_report,
)
from .synthesis import (
    SynthesisConfig,
    SynthesisResult,
    best_privacy_full,
    best_privacy_limited,
    ccp_step,
    dc_gap,
    model_kl_table,
    q_dc_decomposition,
    solve_occupancy_lp,
    sweep_theta,
    tradeoff_full,
    tradeoff_limited,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
