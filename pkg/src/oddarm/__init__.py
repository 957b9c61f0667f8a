"""Odd-arm identification in rested Markov multi-armed bandits.

A library plus CLI implementing the sequential modified-GLR policy with
forced exploration, the instance-hardness lower-bound oracle, and a
seeded Monte Carlo experiment harness.
"""

from .env import ArmConfiguration, CountTables, EnvState, create_env, make_config, pull, update_counts
from .errors import OddArmError
from .glr import GlrValue, IncrementalGlr, MlEstimates, best_hypothesis, glr_min, log_beta, ml_estimates, modified_glr
from .hardness import (
    HardnessSolution,
    dstar_delta,
    dstar_objective,
    information_centre,
    lambda_opt,
    mixture_transition,
    solve_dstar,
)
from .markov import (
    InitialDistribution,
    StationaryDistribution,
    TransitionMatrix,
    binary_relative_entropy,
    conditional_kl,
    sample_step,
    stationary_distribution,
    validate_transition_matrix,
)
from .policy import (
    ADAPTIVE,
    KNOWN_PARAMS,
    PolicyParams,
    PolicyState,
    Pull,
    RunResult,
    Stop,
    known_ll_ratio,
    policy_step,
    run_nonstop,
    run_to_stop,
)
from .experiment import (
    ExperimentConfig,
    SweepRow,
    bound_report,
    emit_results,
    parse_config,
    run_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
