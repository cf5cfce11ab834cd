"""Per-agent advantage estimators over a shared rollout batch.

All estimators consume the same batch of N joint actions and team
rewards. They differ in how they split the scalar return into per-agent
credit: fitted-component decompositions (closed-form direct part plus a
sampled or marginalized indirect part), shared centered baselines, and
replay-based counterfactuals that spend extra environment calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attribution import AttributionFit
from .errors import BudgetError, ConfigurationError, DataError, DomainError
from .policies import (
    ChainPolicy,
    RolloutBatch,
    _draw_rows,
    log_softmax,
    sample_suffix_batch,
)
from .rewards import RewardModel, sample_rewards


@dataclass
class EnvCallMeter:
    """Counts reward-function evaluations against a hard budget.

    budget=None disables the cap but keeps the tally.
    """

    budget: int | None
    used: int = 0

    def consume(self, n: int) -> None:
        if n < 0:
            raise DomainError(f"cannot consume a negative call count: {n}")
        if self.budget is not None and self.used + n > self.budget:
            raise BudgetError(
                f"environment budget exceeded: {self.used} used, "
                f"{n} requested, {self.budget} allowed"
            )
        self.used += n

    @property
    def remaining(self) -> int | None:
        return None if self.budget is None else self.budget - self.used


@dataclass(frozen=True)
class AdvantageTable:
    """Per-rollout, per-agent advantages with the resources they cost."""

    estimator: str
    table: np.ndarray  # (N, K)
    env_calls_consumed: int = 0
    fictitious_draws_used: int = 0

    def __post_init__(self):
        if self.table.ndim != 2:
            raise DataError(f"advantage table must be 2-D, got shape {self.table.shape}")
        if not np.isfinite(self.table).all():
            raise DataError("advantage table contains non-finite values")


def downstream_component_sums(fit: AttributionFit, policy: ChainPolicy) -> np.ndarray:
    """S[k, a] = sum over j > k of E[phi_hat_j(a_j) | a_k = a].

    Backward recursion over the chain: S_k = T_{k+1} (phi_{k+1} + S_{k+1})
    with T_j the conditional action law of agent j given agent j-1.
    """
    K, A = policy.K, policy.A
    tabs = fit.per_agent(K, A)
    S = np.zeros((K, A))
    for k in range(K - 2, -1, -1):
        S[k] = policy.probs_cond[k] @ (tabs[k + 1] + S[k + 1])
    return S


def _direct_indirect(
    fit: AttributionFit, policy: ChainPolicy, prefix, focal: int
) -> tuple[float, float]:
    K, A = policy.K, policy.A
    prefix = tuple(int(a) for a in prefix)
    k = len(prefix)
    if not 0 <= k < K:
        raise DomainError(f"prefix length {k} leaves no agent to score")
    if not 0 <= focal < A:
        raise DomainError(f"focal action {focal} out of range [0, {A})")
    tabs = fit.per_agent(K, A)
    if k == 0:
        row = policy.probs_first
    else:
        row = policy.probs_cond[k - 1][prefix[-1]]
    S = downstream_component_sums(fit, policy)
    direct = float(tabs[k][focal] - row @ tabs[k])
    indirect = float(S[k][focal] - row @ S[k])
    return direct, indirect


def capo_decomposed_exact(
    fit: AttributionFit, policy: ChainPolicy, prefix, focal: int
) -> float:
    """Fitted advantage with the indirect part marginalized in closed form.

    Direct part: the focal agent's fitted component, centered under its
    own action law given the realized conditioning action. Indirect
    part: the induced shift in downstream fitted components, computed by
    exact propagation instead of sampling.
    """
    direct, indirect = _direct_indirect(fit, policy, prefix, focal)
    return direct + indirect


def capo_exact_batch(
    fit: AttributionFit, policy: ChainPolicy, batch: RolloutBatch, k: int
) -> np.ndarray:
    """Vectorized exact fitted advantage for agent k across a batch."""
    K, A = policy.K, policy.A
    if not 0 <= k < K:
        raise DomainError(f"agent index {k} out of range [0, {K})")
    tabs = fit.per_agent(K, A)
    S = downstream_component_sums(fit, policy)
    bundle = tabs[k] + S[k]
    rows = _conditioning_rows(policy, batch.actions, k)
    taken = batch.actions[:, k]
    return bundle[taken] - rows @ bundle


def _conditioning_rows(policy: ChainPolicy, actions: np.ndarray, k: int) -> np.ndarray:
    """(N, A) action-law rows for agent k given each rollout's context."""
    n = actions.shape[0]
    if k == 0:
        return np.broadcast_to(policy.probs_first, (n, policy.A))
    return policy.probs_cond[k - 1][actions[:, k - 1]]


def capo_direct(
    fit: AttributionFit, policy: ChainPolicy, batch: RolloutBatch, k: int
) -> np.ndarray:
    """Direct part only: centered fitted component of the focal agent."""
    K, A = policy.K, policy.A
    if not 0 <= k < K:
        raise DomainError(f"agent index {k} out of range [0, {K})")
    tabs = fit.per_agent(K, A)
    rows = _conditioning_rows(policy, batch.actions, k)
    return tabs[k][batch.actions[:, k]] - rows @ tabs[k]


def capo_fictitious(
    fit: AttributionFit,
    policy: ChainPolicy,
    batch: RolloutBatch,
    k: int,
    L: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Fitted advantage with a sampled indirect part.

    The direct part is closed form. The indirect part averages, over L
    paired draws per rollout, the downstream fitted components reached
    from the taken action minus those reached from a fresh action drawn
    out of the same conditional law. No environment calls are spent: the
    sampled continuations are scored with fitted components only.

    For the last agent there is no downstream term and no draws are
    consumed.
    """
    if L <= 0:
        raise ConfigurationError(f"L must be positive, got {L}")
    K, A = policy.K, policy.A
    if not 0 <= k < K:
        raise DomainError(f"agent index {k} out of range [0, {K})")
    advantage = capo_direct(fit, policy, batch, k).copy()
    if k == K - 1:
        return advantage

    tabs = fit.per_agent(K, A)
    n = batch.N
    taken_rep = np.repeat(batch.actions[:, k], L)
    suffix_taken = sample_suffix_batch(policy, k, taken_rep, rng)
    rows = _conditioning_rows(policy, batch.actions, k)
    rows_rep = np.repeat(rows, L, axis=0)
    fresh = _draw_rows(rows_rep, rng)
    suffix_fresh = sample_suffix_batch(policy, k, fresh, rng)

    downstream = np.arange(k + 1, K)
    sum_taken = tabs[downstream[:, None], suffix_taken.T].sum(axis=0)
    sum_fresh = tabs[downstream[:, None], suffix_fresh.T].sum(axis=0)
    paired_diff = (sum_taken - sum_fresh).reshape(n, L)
    advantage += paired_diff.mean(axis=1)
    return advantage


def magrpo(batch: RolloutBatch) -> np.ndarray:
    """Shared centered return: every agent gets R - mean(R)."""
    if batch.N < 2:
        raise DataError(f"need at least 2 rollouts to center returns, got {batch.N}")
    return batch.rewards - batch.rewards.mean()


def hagrpo(
    batch: RolloutBatch, updated: list[ChainPolicy], k: int, clip: float
) -> np.ndarray:
    """Centered return reweighted by clipped upstream policy ratios.

    updated[j] is the joint policy in force after agent j's update; the
    ratio multiplies, over all agents before k, the updated action
    probability against the behavior probability logged in the batch,
    then clips the product from above.
    """
    if batch.N < 2:
        raise DataError(f"need at least 2 rollouts to center returns, got {batch.N}")
    if clip <= 0:
        raise ConfigurationError(f"ratio clip must be positive, got {clip}")
    if len(updated) < k:
        raise DataError(f"need {k} updated policies for agent {k}, got {len(updated)}")
    log_ratio = np.zeros(batch.N)
    for j in range(k):
        logp_rows = log_softmax(updated[j].agent_logits(j), axis=-1)
        if j == 0:
            new_lp = logp_rows[0, batch.actions[:, 0]]
        else:
            new_lp = logp_rows[batch.actions[:, j - 1], batch.actions[:, j]]
        log_ratio += new_lp - batch.logp[:, j]
    ratio = np.minimum(np.exp(log_ratio), clip)
    return ratio * (batch.rewards - batch.rewards.mean())


def c3(
    model: RewardModel,
    mu: ChainPolicy,
    batch: RolloutBatch,
    k: int,
    M_c3: int,
    rng: np.random.Generator,
    meter: EnvCallMeter,
) -> np.ndarray:
    """Counterfactual replay baseline paid for with real environment calls.

    For each rollout, M_c3 replays redraw agent k's action from the
    behavior law and resample the suffix, keeping the realized prefix;
    each replay is scored by a fresh (noisy) reward evaluation. The
    advantage is the realized return minus the replay mean, so the
    realized rollout itself stays out of its own baseline.
    """
    if M_c3 <= 0:
        raise ConfigurationError(f"M_c3 must be positive, got {M_c3}")
    K = mu.K
    if not 0 <= k < K:
        raise DomainError(f"agent index {k} out of range [0, {K})")
    n = batch.N
    meter.consume(n * M_c3)
    rows = _conditioning_rows(mu, batch.actions, k)
    replay_total = np.zeros(n)
    for _ in range(M_c3):
        fresh = _draw_rows(rows, rng)
        replay = batch.actions.copy()
        replay[:, k] = fresh
        if k < K - 1:
            replay[:, k + 1 :] = sample_suffix_batch(mu, k, fresh, rng)
        replay_total += sample_rewards(model, replay, rng)
    return batch.rewards - replay_total / M_c3
