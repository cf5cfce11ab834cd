"""Iterative policy improvement under a shared real-environment budget.

One outer iteration samples a batch under the current joint policy,
scores it with the chosen advantage estimator, and applies clipped
policy-gradient steps agent by agent in execution order. Methods are
compared at matched counts of real reward evaluations, so replay-based
estimators trade outer iterations for their extra calls.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np

from .attribution import fit_batch
from .errors import BudgetError, ConfigurationError, DataError
from .estimators import (
    EnvCallMeter,
    c3,
    capo_direct,
    capo_fictitious,
    hagrpo,
    magrpo,
)
from .oracle import policy_value
from .policies import (
    ChainPolicy,
    RolloutBatch,
    log_prob_matrix,
    ppo_update,
    sample_joint_batch,
    total_variation_drift,
)
from .rewards import RewardModel, optimal_value, sample_rewards, uniform_value

METHODS = ("capo", "capo_direct", "magrpo", "hagrpo", "c3")

_FIELD_RELEVANCE = {
    "L": ("capo",),
    "ridge_lambda": ("capo", "capo_direct"),
    "M_c3": ("c3",),
    "is_clip": ("hagrpo",),
}


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run of a single method."""

    method: str
    N: int = 32
    L: int = 64
    M: int = 4
    eta: float = 0.3
    clip_eps: float = 0.2
    ridge_lambda: float = 0.1
    M_c3: int = 2
    is_clip: float = 5.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(
                f"unknown method {self.method!r}, expected one of {METHODS}"
            )
        for name in ("N", "L", "M", "M_c3"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("eta", "ridge_lambda", "is_clip"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.clip_eps <= 0:
            raise ConfigurationError(f"clip_eps must be positive, got {self.clip_eps}")
        defaults = {f.name: f.default for f in fields(TrainConfig)}
        for name, methods in _FIELD_RELEVANCE.items():
            if self.method not in methods and getattr(self, name) != defaults[name]:
                warnings.warn(
                    f"{name}={getattr(self, name)} has no effect for method "
                    f"{self.method!r}; ignoring",
                    stacklevel=2,
                )

    def iteration_cost(self, K: int) -> int:
        """Real environment calls one outer iteration spends."""
        if self.method == "c3":
            return self.N * (1 + K * self.M_c3)
        return self.N


@dataclass(frozen=True)
class TrainTrace:
    """Per-iteration diagnostics of one training run.

    The pre-training value and regret are stored separately so that
    area-under-curve summaries cover only post-update iterates.
    """

    method: str
    values: np.ndarray  # (T,)
    regrets: np.ndarray  # (T,)
    env_calls: np.ndarray  # (T,) cumulative real calls after each iteration
    drifts: np.ndarray  # (T,) max per-agent L1 policy movement within iteration
    initial_value: float
    initial_regret: float

    def __post_init__(self):
        T = self.values.shape[0]
        for name in ("regrets", "env_calls", "drifts"):
            if getattr(self, name).shape[0] != T:
                raise DataError(f"trace field {name} length mismatch")

    @property
    def iterations(self) -> int:
        return self.values.shape[0]


def collect_rollouts(
    model: RewardModel,
    policy: ChainPolicy,
    N: int,
    rng: np.random.Generator,
    meter: EnvCallMeter | None = None,
) -> RolloutBatch:
    """Sample N joint actions and their (noisy) team rewards."""
    if N <= 0:
        raise ConfigurationError(f"N must be positive, got {N}")
    if meter is not None:
        meter.consume(N)
    actions = sample_joint_batch(policy, N, rng)
    rewards = sample_rewards(model, actions, rng)
    return RolloutBatch(
        actions=actions, rewards=rewards, logp=log_prob_matrix(policy, actions)
    )


def run_capo_iteration(
    policy: ChainPolicy,
    model: RewardModel,
    config: TrainConfig,
    rng: np.random.Generator,
    meter: EnvCallMeter | None = None,
) -> tuple[ChainPolicy, dict]:
    """One outer iteration of the fitted-advantage method.

    Freezes the behavior policy, fits components on a fresh batch, then
    updates agents in execution order; each agent's advantages are
    recomputed under the partially updated joint policy before its own
    clipped steps.
    """
    return _fitted_iteration(policy, model, config, rng, meter, sampled_indirect=True)


def _fitted_iteration(policy, model, config, rng, meter, sampled_indirect):
    mu = policy
    batch = collect_rollouts(model, mu, config.N, rng, meter)
    fit = fit_batch(batch, mu.K, mu.A, config.ridge_lambda)
    current = mu
    for k in range(mu.K):
        if sampled_indirect:
            adv = capo_fictitious(fit, current, batch, k, config.L, rng)
        else:
            adv = capo_direct(fit, current, batch, k)
        current = ppo_update(
            current, k, batch, adv, config.M, config.eta, config.clip_eps
        )
    stats = {
        "fit": fit,
        "mean_reward": float(batch.rewards.mean()),
        "drift": total_variation_drift(mu, current),
    }
    return current, stats


def _magrpo_iteration(policy, model, config, rng, meter):
    mu = policy
    batch = collect_rollouts(model, mu, config.N, rng, meter)
    adv = magrpo(batch)
    current = mu
    for k in range(mu.K):
        current = ppo_update(
            current, k, batch, adv, config.M, config.eta, config.clip_eps
        )
    stats = {
        "mean_reward": float(batch.rewards.mean()),
        "drift": total_variation_drift(mu, current),
    }
    return current, stats


def _hagrpo_iteration(policy, model, config, rng, meter):
    mu = policy
    batch = collect_rollouts(model, mu, config.N, rng, meter)
    current = mu
    updated: list[ChainPolicy] = []
    for k in range(mu.K):
        adv = hagrpo(batch, updated, k, config.is_clip)
        current = ppo_update(
            current, k, batch, adv, config.M, config.eta, config.clip_eps
        )
        updated.append(current)
    stats = {
        "mean_reward": float(batch.rewards.mean()),
        "drift": total_variation_drift(mu, current),
    }
    return current, stats


def _c3_iteration(policy, model, config, rng, meter):
    mu = policy
    batch = collect_rollouts(model, mu, config.N, rng, meter)
    local_meter = meter if meter is not None else EnvCallMeter(None)
    advantages = [
        c3(model, mu, batch, k, config.M_c3, rng, local_meter) for k in range(mu.K)
    ]
    current = mu
    for k in range(mu.K):
        current = ppo_update(
            current, k, batch, advantages[k], config.M, config.eta, config.clip_eps
        )
    stats = {
        "mean_reward": float(batch.rewards.mean()),
        "drift": total_variation_drift(mu, current),
    }
    return current, stats


_ITERATIONS = {
    "capo": run_capo_iteration,
    "capo_direct": lambda p, m, c, r, meter=None: _fitted_iteration(
        p, m, c, r, meter, sampled_indirect=False
    ),
    "magrpo": _magrpo_iteration,
    "hagrpo": _hagrpo_iteration,
    "c3": _c3_iteration,
}


def normalized_regret(
    model: RewardModel,
    policy: ChainPolicy,
    value_cache: tuple[float, float] | None = None,
) -> float:
    """(best value - current value) / (best value - uniform-policy value).

    Zero at an optimal policy, one at the uniform policy; clipped below
    at zero so better-than-reference noise never reports negative
    regret.
    """
    if value_cache is None:
        v_star, v_unif = optimal_value(model), uniform_value(model)
    else:
        v_star, v_unif = value_cache
    span = v_star - v_unif
    if span <= 1e-12:
        raise DataError(
            "degenerate reward model: optimal and uniform-policy values coincide"
        )
    return max(0.0, (v_star - policy_value(model, policy)) / span)


def run_method(
    method: str,
    model: RewardModel,
    initial_policy: ChainPolicy,
    total_env_budget: int,
    config: TrainConfig,
    rng: np.random.Generator,
    value_cache: tuple[float, float] | None = None,
) -> TrainTrace:
    """Train one method until the real-environment budget is exhausted.

    Runs floor(budget / per-iteration cost) outer iterations; a budget
    too small for even one iteration is an error, not a silent no-op.
    """
    if method != config.method:
        raise ConfigurationError(
            f"method {method!r} does not match config.method {config.method!r}"
        )
    K = initial_policy.K
    cost = config.iteration_cost(K)
    iterations = total_env_budget // cost
    if iterations < 1:
        raise BudgetError(
            f"budget {total_env_budget} cannot afford one iteration costing {cost}"
        )
    if value_cache is None:
        value_cache = (optimal_value(model), uniform_value(model))
    meter = EnvCallMeter(total_env_budget)
    step = _ITERATIONS[method]

    policy = initial_policy
    initial_value = policy_value(model, policy)
    initial_regret = normalized_regret(model, policy, value_cache)
    values = np.empty(iterations)
    regrets = np.empty(iterations)
    env_calls = np.empty(iterations)
    drifts = np.empty(iterations)
    for t in range(iterations):
        policy, stats = step(policy, model, config, rng, meter)
        values[t] = policy_value(model, policy)
        regrets[t] = normalized_regret(model, policy, value_cache)
        env_calls[t] = meter.used
        drifts[t] = stats["drift"]
    return TrainTrace(
        method=method,
        values=values,
        regrets=regrets,
        env_calls=env_calls,
        drifts=drifts,
        initial_value=initial_value,
        initial_regret=initial_regret,
    )


def regret_auc(trace: TrainTrace) -> float:
    """Mean normalized regret over post-update iterations."""
    if trace.iterations == 0:
        raise DataError("cannot summarize an empty trace")
    return float(trace.regrets.mean())
