"""Tabular autoregressive Markov-1 joint policy.

Agents act in order 0..K-1. Agent 0 draws from a single categorical
distribution; each later agent k conditions only on the immediately
preceding action a_{k-1}, so the policy is a table of per-agent logit
rows. Policies are immutable values: updates return new objects.

Agent and action indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError, DomainError


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


@dataclass(frozen=True, eq=False)
class ChainPolicy:
    """Logit tables for the chain policy; probabilities are cached at construction."""

    K: int
    A: int
    logits_first: np.ndarray  # (A,)
    logits_cond: np.ndarray  # (K-1, A, A); row c of table k-1 is agent k's logits given a_{k-1}=c

    def __post_init__(self) -> None:
        if self.logits_first.shape != (self.A,):
            raise DomainError(
                f"logits_first has shape {self.logits_first.shape}, expected ({self.A},)"
            )
        if self.logits_cond.shape != (self.K - 1, self.A, self.A):
            raise DomainError(
                f"logits_cond has shape {self.logits_cond.shape}, "
                f"expected {(self.K - 1, self.A, self.A)}"
            )
        object.__setattr__(self, "probs_first", softmax(self.logits_first))
        object.__setattr__(
            self,
            "probs_cond",
            softmax(self.logits_cond, axis=-1)
            if self.K > 1
            else np.zeros((0, self.A, self.A)),
        )

    def agent_probs(self, k: int) -> np.ndarray:
        """Conditional table for agent k as a (rows, A) matrix (1 row for agent 0)."""
        if k == 0:
            return self.probs_first[None, :]
        return self.probs_cond[k - 1]

    def agent_logits(self, k: int) -> np.ndarray:
        if k == 0:
            return self.logits_first[None, :]
        return self.logits_cond[k - 1]

    def replace_agent(self, k: int, logits: np.ndarray) -> "ChainPolicy":
        """New policy differing from this one only at agent k's logits."""
        if k == 0:
            if logits.shape != (1, self.A) and logits.shape != (self.A,):
                raise DomainError(f"agent 0 logits must be ({self.A},)")
            return ChainPolicy(self.K, self.A, np.asarray(logits).reshape(self.A).copy(),
                               self.logits_cond)
        if logits.shape != (self.A, self.A):
            raise DomainError(f"agent {k} logits must be ({self.A}, {self.A})")
        cond = self.logits_cond.copy()
        cond[k - 1] = logits
        return ChainPolicy(self.K, self.A, self.logits_first, cond)


@dataclass(frozen=True, eq=False)
class RolloutBatch:
    """N joint actions with observed rewards and per-agent log-probs under the collection policy."""

    actions: np.ndarray  # (N, K) ints
    rewards: np.ndarray  # (N,)
    logp: np.ndarray  # (N, K), log mu_k(a_k | a_{k-1})

    def __post_init__(self) -> None:
        n, k = self.actions.shape
        if self.rewards.shape != (n,) or self.logp.shape != (n, k):
            raise DataError("RolloutBatch field shapes are inconsistent")
        if not np.isfinite(self.rewards).all() or not np.isfinite(self.logp).all():
            raise DataError("RolloutBatch contains non-finite values")
        if (self.logp > 1e-12).any():
            raise DataError("log-probabilities must be <= 0")

    @property
    def N(self) -> int:
        return self.actions.shape[0]

    @property
    def K(self) -> int:
        return self.actions.shape[1]


def uniform_policy(K: int, A: int) -> ChainPolicy:
    """All-zero logits: every conditional is uniform."""
    return ChainPolicy(K, A, np.zeros(A), np.zeros((K - 1, A, A)))


def init_policy(seed: int, K: int, A: int, rho: float) -> ChainPolicy:
    """Random initial policy with diagonal exponential tilt of strength rho.

    Each conditional row starts from a flat-Dirichlet draw; for agents
    k >= 1 the probability of repeating the upstream action is tilted up
    by a factor exp(rho). Agent 0 has no upstream action and no tilt.
    Logits are stored as normalized log-probabilities.
    """
    if rho < 0:
        raise ConfigurationError(f"rho must be >= 0, got {rho}")
    if K < 1 or A < 2:
        raise ConfigurationError(f"need K >= 1 and A >= 2, got K={K}, A={A}")
    rng = np.random.default_rng(seed)
    base_first = rng.dirichlet(np.ones(A))
    logits_first = np.log(base_first)
    logits_cond = np.zeros((K - 1, A, A))
    tilt = rho * np.eye(A)
    for j in range(K - 1):
        base = rng.dirichlet(np.ones(A), size=A)  # row c = conditional given a_{k-1} = c
        logits_cond[j] = np.log(base) + tilt
    policy = ChainPolicy(K, A, log_softmax(logits_first), log_softmax(logits_cond, axis=-1))
    return policy


def conditional(policy: ChainPolicy, k: int, c: int | None = None) -> np.ndarray:
    """Distribution of agent k's action given the preceding action c (None for agent 0)."""
    if not 0 <= k < policy.K:
        raise DomainError(f"agent index {k} out of range for K={policy.K}")
    if k == 0:
        if c is not None:
            raise DomainError("agent 0 takes no conditioning value")
        return policy.probs_first.copy()
    if c is None:
        raise DomainError(f"agent {k} requires a conditioning value")
    if not 0 <= c < policy.A:
        raise DomainError(f"conditioning value {c} out of range [0, {policy.A})")
    return policy.probs_cond[k - 1, c].copy()


def _draw_rows(prob_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of an (M, A) probability matrix."""
    cum = np.cumsum(prob_rows, axis=1)
    u = rng.random(prob_rows.shape[0])
    idx = (u[:, None] > cum).sum(axis=1)
    return np.minimum(idx, prob_rows.shape[1] - 1)


def sample_joint(policy: ChainPolicy, rng: np.random.Generator) -> np.ndarray:
    """One joint action sampled in execution order."""
    return sample_joint_batch(policy, 1, rng)[0]


def sample_joint_batch(policy: ChainPolicy, N: int, rng: np.random.Generator) -> np.ndarray:
    """(N, K) joint actions sampled in execution order, column by column."""
    actions = np.empty((N, policy.K), dtype=np.int64)
    actions[:, 0] = _draw_rows(np.broadcast_to(policy.probs_first, (N, policy.A)), rng)
    for k in range(1, policy.K):
        rows = policy.probs_cond[k - 1][actions[:, k - 1]]
        actions[:, k] = _draw_rows(rows, rng)
    return actions


def sample_suffix(
    policy: ChainPolicy, k: int, a_k: int, L: int, rng: np.random.Generator
) -> np.ndarray:
    """L continuations of agents k+1..K-1 given agent k played a_k; (L, K-1-k) array."""
    if not 0 <= k < policy.K:
        raise DomainError(f"agent index {k} out of range for K={policy.K}")
    seeds = np.full(L, a_k, dtype=np.int64)
    return sample_suffix_batch(policy, k, seeds, rng)


def sample_suffix_batch(
    policy: ChainPolicy, k: int, seed_actions: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Chain continuations after agent k, one per entry of seed_actions; (M, K-1-k) array."""
    M = seed_actions.shape[0]
    width = policy.K - 1 - k
    out = np.empty((M, width), dtype=np.int64)
    current = seed_actions
    for j in range(k + 1, policy.K):
        rows = policy.probs_cond[j - 1][current]
        current = _draw_rows(rows, rng)
        out[:, j - k - 1] = current
    return out


def log_prob_matrix(policy: ChainPolicy, actions: np.ndarray) -> np.ndarray:
    """(N, K) log-probabilities of each realized per-agent action."""
    acts = np.asarray(actions, dtype=np.int64)
    n = acts.shape[0]
    logp = np.empty((n, policy.K))
    lp_first = log_softmax(policy.logits_first)
    logp[:, 0] = lp_first[acts[:, 0]]
    for k in range(1, policy.K):
        lp = log_softmax(policy.logits_cond[k - 1], axis=-1)
        logp[:, k] = lp[acts[:, k - 1], acts[:, k]]
    return logp


def ppo_update(
    policy: ChainPolicy,
    k: int,
    batch: RolloutBatch,
    advantages: np.ndarray,
    M: int,
    eta: float,
    clip_eps: float,
) -> ChainPolicy:
    """M ascent steps of the clipped surrogate on agent k's logits.

    The surrogate is mean_n min(r_n * adv_n, clip(r_n, 1-eps, 1+eps) * adv_n)
    with r_n the ratio of the updated conditional to the collection
    policy's stored log-probability. Only agent k's logits change.
    """
    adv = np.asarray(advantages, dtype=np.float64)
    if adv.shape != (batch.N,):
        raise DataError(f"advantages have shape {adv.shape}, expected ({batch.N},)")
    if not np.isfinite(adv).all():
        raise DataError("advantages contain non-finite values")
    if M <= 0:
        raise ConfigurationError(f"M must be positive, got {M}")

    a_n = batch.actions[:, k]
    c_n = batch.actions[:, k - 1] if k > 0 else np.zeros(batch.N, dtype=np.int64)
    mu_logp = batch.logp[:, k]
    theta = policy.agent_logits(k).copy()  # (rows, A)
    n_rows = theta.shape[0]
    onehot = np.zeros((batch.N, policy.A))
    onehot[np.arange(batch.N), a_n] = 1.0

    lo, hi = 1.0 - clip_eps, 1.0 + clip_eps
    for _ in range(M):
        logp_rows = log_softmax(theta, axis=-1)
        ratios = np.exp(logp_rows[c_n, a_n] - mu_logp)
        surr_plain = ratios * adv
        surr_clip = np.clip(ratios, lo, hi) * adv
        # gradient flows only through samples where the unclipped branch attains the min
        active = surr_plain <= surr_clip
        probs_rows = np.exp(logp_rows)[c_n]  # (N, A)
        coef = np.where(active, adv * ratios, 0.0) / batch.N
        grad = np.zeros((n_rows, policy.A))
        np.add.at(grad, c_n, coef[:, None] * (onehot - probs_rows))
        theta = theta + eta * grad
        theta = log_softmax(theta, axis=-1)

    return policy.replace_agent(k, theta if k > 0 else theta[0])


def total_variation_drift(p: ChainPolicy, q: ChainPolicy) -> float:
    """Max over agents and conditioning values of the L1 distance between conditionals."""
    if (p.K, p.A) != (q.K, q.A):
        raise DomainError(f"policy shapes differ: {(p.K, p.A)} vs {(q.K, q.A)}")
    worst = float(np.abs(p.probs_first - q.probs_first).sum())
    for k in range(1, p.K):
        row_l1 = np.abs(p.probs_cond[k - 1] - q.probs_cond[k - 1]).sum(axis=1)
        worst = max(worst, float(row_l1.max()))
    return worst
