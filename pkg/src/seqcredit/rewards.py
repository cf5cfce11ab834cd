"""Synthetic team-reward environment.

A team of K agents each picks one of A actions; the expected team reward
is a sum of per-agent tables plus pairwise interaction tables scaled by
an interaction strength, and observations add Gaussian noise. Pairwise
tables are scaled so that at interaction strength 1 the pairwise part of
the reward variance matches the additive part under uniform actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ConfigurationError, DomainError

# optimal_value enumerates all A^K joint actions; cap the search space
ENUMERATION_BITS = 24.0

# chunk size for enumeration sweeps, keeps peak memory modest
_CHUNK = 1 << 18


def pair_list(K: int) -> list[tuple[int, int]]:
    """All agent pairs (k, l) with k < l, in lexicographic order."""
    return [(k, l) for k in range(K) for l in range(k + 1, K)]


@dataclass(frozen=True, eq=False)
class RewardModel:
    """Immutable reward tables: f(a) = sum_k phi[k, a_k] + lambda_int * sum_{k<l} g[kl, a_k, a_l]."""

    K: int
    A: int
    phi: np.ndarray  # (K, A)
    g: np.ndarray  # (n_pairs, A, A), pairs in pair_list order
    lambda_int: float
    sigma: float

    def __post_init__(self) -> None:
        n_pairs = self.K * (self.K - 1) // 2
        if self.phi.shape != (self.K, self.A):
            raise ConfigurationError(
                f"phi has shape {self.phi.shape}, expected {(self.K, self.A)}"
            )
        if self.g.shape != (n_pairs, self.A, self.A):
            raise ConfigurationError(
                f"g has shape {self.g.shape}, expected {(n_pairs, self.A, self.A)}"
            )

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return pair_list(self.K)

    def pair_index(self, k: int, l: int) -> int:
        """Index into g for the pair (k, l), k < l."""
        if not 0 <= k < l < self.K:
            raise DomainError(f"invalid agent pair ({k}, {l}) for K={self.K}")
        # offset of row k in the lexicographic pair list, then steps to l
        return k * (2 * self.K - k - 1) // 2 + (l - k - 1)


def sample_reward_model(
    seed: int, K: int, A: int, lambda_int: float, sigma: float
) -> RewardModel:
    """Draw reward tables: phi entries standard normal, g entries scaled by sqrt(2/(K-1))."""
    if K < 1 or A < 2:
        raise ConfigurationError(f"need K >= 1 and A >= 2, got K={K}, A={A}")
    if lambda_int < 0:
        raise ConfigurationError(f"lambda_int must be >= 0, got {lambda_int}")
    if sigma < 0:
        raise ConfigurationError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((K, A))
    n_pairs = K * (K - 1) // 2
    if n_pairs:
        scale = math.sqrt(2.0 / (K - 1))
        g = rng.standard_normal((n_pairs, A, A)) * scale
    else:
        g = np.zeros((0, A, A))
    return RewardModel(K=K, A=A, phi=phi, g=g, lambda_int=float(lambda_int), sigma=float(sigma))


def _check_action(model: RewardModel, a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.int64)
    if arr.shape != (model.K,):
        raise DomainError(f"joint action has shape {arr.shape}, expected ({model.K},)")
    if arr.min(initial=0) < 0 or arr.max(initial=0) >= model.A:
        raise DomainError(f"action indices out of range [0, {model.A}): {arr.tolist()}")
    return arr


def mean_reward(model: RewardModel, a) -> float:
    """Expected team reward f(a)."""
    arr = _check_action(model, a)
    total = float(model.phi[np.arange(model.K), arr].sum())
    if model.lambda_int != 0.0 and model.g.shape[0]:
        pair_sum = 0.0
        for p, (k, l) in enumerate(model.pairs):
            pair_sum += model.g[p, arr[k], arr[l]]
        total += model.lambda_int * float(pair_sum)
    return total


def mean_rewards(model: RewardModel, actions: np.ndarray) -> np.ndarray:
    """Vectorized f over an (M, K) array of joint actions."""
    acts = np.asarray(actions, dtype=np.int64)
    if acts.ndim != 2 or acts.shape[1] != model.K:
        raise DomainError(f"actions must be (M, {model.K}), got {acts.shape}")
    if acts.size and (acts.min() < 0 or acts.max() >= model.A):
        raise DomainError(f"action indices out of range [0, {model.A})")
    total = model.phi[np.arange(model.K)[None, :], acts].sum(axis=1)
    if model.lambda_int != 0.0 and model.g.shape[0]:
        pair_sum = np.zeros(acts.shape[0])
        for p, (k, l) in enumerate(model.pairs):
            pair_sum += model.g[p, acts[:, k], acts[:, l]]
        total = total + model.lambda_int * pair_sum
    return total


def sample_reward(model: RewardModel, a, rng: np.random.Generator) -> float:
    """One noisy reward observation R = f(a) + sigma * Z."""
    return mean_reward(model, a) + model.sigma * float(rng.standard_normal())


def sample_rewards(model: RewardModel, actions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized noisy rewards for an (M, K) array of joint actions."""
    means = mean_rewards(model, actions)
    return means + model.sigma * rng.standard_normal(means.shape[0])


def enumerate_actions(K: int, A: int) -> np.ndarray:
    """All A^K joint actions as an (A^K, K) array, agent 0 slowest."""
    grids = np.indices((A,) * K).reshape(K, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


def _enumeration_guard(model: RewardModel, what: str) -> None:
    bits = model.K * math.log2(model.A)
    if bits > ENUMERATION_BITS:
        raise CapabilityError(
            f"{what} needs enumeration of A^K = {model.A}^{model.K} joint actions "
            f"({bits:.1f} bits > {ENUMERATION_BITS:.0f}); unavailable at this K"
        )


def optimal_value(model: RewardModel) -> float:
    """Max of f over all joint actions (exhaustive; guarded by ENUMERATION_BITS)."""
    if model.lambda_int == 0.0 or model.g.shape[0] == 0:
        return float(model.phi.max(axis=1).sum())
    _enumeration_guard(model, "optimal_value")
    total = model.A ** model.K
    best = -math.inf
    # enumerate in chunks: decode row index -> joint action digits
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        acts = np.empty((idx.size, model.K), dtype=np.int64)
        rem = idx
        for k in range(model.K - 1, -1, -1):
            acts[:, k] = rem % model.A
            rem = rem // model.A
        best = max(best, float(mean_rewards(model, acts).max()))
    return best


def uniform_value(model: RewardModel) -> float:
    """Expected f under independent uniform actions (normalizer for regret)."""
    total = float(model.phi.mean(axis=1).sum())
    if model.lambda_int != 0.0 and model.g.shape[0]:
        total += model.lambda_int * float(model.g.mean(axis=(1, 2)).sum())
    return total
