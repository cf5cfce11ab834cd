"""Simulation laboratory for per-agent credit assignment in sequential teams.

A team of K agents acts one after another down a Markov chain of
conditional policies; the environment pays a single noisy scalar for
the joint action. The package provides exact oracles for per-agent
advantages on enumerable instances, a family of advantage estimators
built on a shared rollout batch, budgeted training loops, a numerical
verification suite for the structural claims behind the estimators, and
an experiment harness with deterministic, seed-reproducible outputs.
"""

__version__ = "0.1.0"

from .attribution import (
    AttributionFit,
    additive_predict,
    build_features,
    fit_batch,
    gram_smallest_eigenvalue,
    ridge_fit,
)
from .checks import CheckResult, run_all_checks
from .errors import (
    BudgetError,
    CapabilityError,
    ConfigurationError,
    DataError,
    DomainError,
    SeqCreditError,
    TheoryCheckFailure,
)
from .estimators import (
    AdvantageTable,
    EnvCallMeter,
    c3,
    capo_decomposed_exact,
    capo_direct,
    capo_exact_batch,
    capo_fictitious,
    hagrpo,
    magrpo,
)
from .experiments import ExperimentConfig, build_config, run_experiment
from .oracle import (
    chain_law,
    check_factoredness,
    dstar_baseline,
    exact_conditional_mean,
    policy_value,
    seqau_advantage,
    sequential_learnability,
)
from .policies import (
    ChainPolicy,
    RolloutBatch,
    conditional,
    init_policy,
    ppo_update,
    sample_joint,
    sample_joint_batch,
    uniform_policy,
)
from .rewards import (
    RewardModel,
    enumerate_actions,
    mean_reward,
    mean_rewards,
    optimal_value,
    sample_reward,
    sample_reward_model,
    sample_rewards,
    uniform_value,
)
from .training import (
    TrainConfig,
    TrainTrace,
    collect_rollouts,
    normalized_regret,
    regret_auc,
    run_capo_iteration,
    run_method,
)

__all__ = [
    "AdvantageTable",
    "AttributionFit",
    "BudgetError",
    "CapabilityError",
    "ChainPolicy",
    "CheckResult",
    "ConfigurationError",
    "DataError",
    "DomainError",
    "EnvCallMeter",
    "ExperimentConfig",
    "RewardModel",
    "RolloutBatch",
    "SeqCreditError",
    "TheoryCheckFailure",
    "TrainConfig",
    "TrainTrace",
    "additive_predict",
    "build_config",
    "build_features",
    "c3",
    "capo_decomposed_exact",
    "capo_direct",
    "capo_exact_batch",
    "capo_fictitious",
    "chain_law",
    "check_factoredness",
    "collect_rollouts",
    "conditional",
    "dstar_baseline",
    "enumerate_actions",
    "exact_conditional_mean",
    "fit_batch",
    "gram_smallest_eigenvalue",
    "hagrpo",
    "init_policy",
    "magrpo",
    "mean_reward",
    "mean_rewards",
    "normalized_regret",
    "optimal_value",
    "policy_value",
    "ppo_update",
    "regret_auc",
    "ridge_fit",
    "run_all_checks",
    "run_capo_iteration",
    "run_experiment",
    "run_method",
    "sample_joint",
    "sample_joint_batch",
    "sample_reward",
    "sample_reward_model",
    "sample_rewards",
    "seqau_advantage",
    "sequential_learnability",
    "uniform_policy",
    "uniform_value",
]
