"""Exact quantities under the Markov-1 chain policy.

Everything here is deterministic: marginal and pairwise laws by forward
propagation, conditional reward expectations by chain dynamic
programming (O(K^2 A^2) per query, usable at K=16), and enumeration
utilities for the small instances used by the theorem verifiers. The
learnability functional, baseline-optimality grid, factoredness check,
and bias-bound evaluator all live here because they are defined purely
in terms of exact expectations.

Observation noise never enters these computations: conditional means
and learnability are properties of f, the noiseless expected reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, DataError, DomainError
from .policies import ChainPolicy, total_variation_drift
from .rewards import RewardModel, enumerate_actions, mean_rewards

# enumeration-based verifiers refuse instances larger than this
ENUMERATION_LIMIT = 1_000_000

# near-ties in sign comparisons are treated as exact ties
TIE_BAND = 1e-12


@dataclass(frozen=True, eq=False)
class ChainLaw:
    """Marginals P(a_k) and pairwise joints P(a_i, a_j) under the chain.

    With an anchor (k, a_k), marginals cover agents >= k (point mass at
    the anchor) and pairwise joints cover pairs i < j with i >= k;
    entries for agents before the anchor are zero and carry no meaning.
    """

    marginals: np.ndarray  # (K, A)
    pairs: dict = field(default_factory=dict)  # {(i, j): (A, A) joint}, i < j
    anchor: tuple | None = None


def chain_law(
    policy: ChainPolicy, condition: tuple | None = None, with_pairs: bool = True
) -> ChainLaw:
    """Forward-propagated law of the chain, optionally anchored at (k, a_k)."""
    K, A = policy.K, policy.A
    marg = np.zeros((K, A))
    if condition is None:
        marg[0] = policy.probs_first
        start = 0
    else:
        k0, a0 = condition
        if not 0 <= k0 < K:
            raise DomainError(f"anchor agent {k0} out of range for K={K}")
        if not 0 <= a0 < A:
            raise DomainError(f"anchor action {a0} out of range for A={A}")
        marg[k0, a0] = 1.0
        start = k0
    for j in range(start + 1, K):
        marg[j] = marg[j - 1] @ policy.probs_cond[j - 1]
    pairs: dict = {}
    if with_pairs:
        for i in range(start, K):
            step = np.eye(A)
            for j in range(i + 1, K):
                step = step @ policy.probs_cond[j - 1]
                pairs[(i, j)] = marg[i][:, None] * step
    return ChainLaw(marginals=marg, pairs=pairs, anchor=condition)


def policy_value(model: RewardModel, policy: ChainPolicy) -> float:
    """Exact expected team reward V = E_pi[f]."""
    need_pairs = model.lambda_int != 0.0 and model.g.shape[0] > 0
    law = chain_law(policy, with_pairs=need_pairs)
    total = float((law.marginals * model.phi).sum())
    if need_pairs:
        for p, (i, j) in enumerate(model.pairs):
            total += model.lambda_int * float((law.pairs[(i, j)] * model.g[p]).sum())
    return total


def _validate_conditioning(model: RewardModel, prefix, focal) -> list[int]:
    realized = [int(a) for a in prefix]
    if focal is not None:
        realized.append(int(focal))
    if len(realized) > model.K:
        raise DomainError(
            f"conditioning on {len(realized)} actions exceeds K={model.K}"
        )
    for a in realized:
        if not 0 <= a < model.A:
            raise DomainError(f"action {a} out of range [0, {model.A})")
    return realized


def exact_conditional_mean(
    model: RewardModel, policy: ChainPolicy, prefix, focal: int | None = None
) -> float:
    """E[f | realized prefix (and focal action, if given)] by chain DP.

    Agents 0..len(prefix)-1 are fixed at the prefix values; with a focal
    action, agent len(prefix) is fixed too; all later agents follow the
    chain law seeded at the last realized action.
    """
    if (policy.K, policy.A) != (model.K, model.A):
        raise DomainError("model and policy shapes differ")
    realized = _validate_conditioning(model, prefix, focal)
    K, A, m = model.K, model.A, len(realized)

    # downstream marginals P(a_j | realized), j >= m
    marg = np.zeros((K, A))
    prev = None
    for j in range(m, K):
        if j == 0:
            row = policy.probs_first
        elif j == m:
            row = policy.probs_cond[j - 1][realized[-1]]
        else:
            row = prev @ policy.probs_cond[j - 1]
        marg[j] = row
        prev = row

    total = sum(float(model.phi[j, realized[j]]) for j in range(m))
    for j in range(m, K):
        total += float(marg[j] @ model.phi[j])

    if model.lambda_int != 0.0 and model.g.shape[0]:
        acc = 0.0
        for p, (i, j) in enumerate(model.pairs):
            if j < m:
                acc += float(model.g[p, realized[i], realized[j]])
            elif i < m:
                acc += float(model.g[p, realized[i]] @ marg[j])
            else:
                step = np.eye(A)
                for t in range(i + 1, j + 1):
                    step = step @ policy.probs_cond[t - 1]
                joint = marg[i][:, None] * step
                acc += float((joint * model.g[p]).sum())
        total += model.lambda_int * acc
    return total


def seqau_advantage(model: RewardModel, policy: ChainPolicy, prefix, focal: int) -> float:
    """Ground-truth counterfactual advantage E[f | prefix, focal] - E[f | prefix]."""
    return exact_conditional_mean(model, policy, prefix, focal) - exact_conditional_mean(
        model, policy, prefix, None
    )


def dstar_baseline(model: RewardModel, policy: ChainPolicy, prefix, kernel) -> float:
    """Learnability-optimal baseline: kernel-average of the focal conditional means."""
    rho = np.asarray(kernel, dtype=np.float64)
    if rho.shape != (model.A,):
        raise DomainError(f"kernel must have shape ({model.A},), got {rho.shape}")
    if abs(float(rho.sum()) - 1.0) > 1e-9 or (rho < -1e-15).any():
        raise DomainError("kernel must be a distribution over actions")
    return float(
        sum(rho[a] * exact_conditional_mean(model, policy, prefix, a) for a in range(model.A))
    )


# ---------------------------------------------------------------------------
# enumeration utilities (small instances only)
# ---------------------------------------------------------------------------


def _enumeration_guard(K: int, A: int) -> None:
    if A**K > ENUMERATION_LIMIT:
        raise CapabilityError(
            f"instance with A^K = {A}^{K} joint actions exceeds the enumeration "
            f"limit {ENUMERATION_LIMIT}"
        )


def joint_probabilities(policy: ChainPolicy) -> tuple[np.ndarray, np.ndarray]:
    """All joint actions and their chain probabilities; (A^K, K) and (A^K,)."""
    _enumeration_guard(policy.K, policy.A)
    acts = enumerate_actions(policy.K, policy.A)
    probs = policy.probs_first[acts[:, 0]].astype(np.float64)
    for k in range(1, policy.K):
        probs = probs * policy.probs_cond[k - 1][acts[:, k - 1], acts[:, k]]
    return acts, probs


def prefix_probabilities(policy: ChainPolicy, k: int) -> tuple[np.ndarray, np.ndarray]:
    """All length-k prefixes (agents 0..k-1) and their probabilities."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64), np.ones(1)
    _enumeration_guard(k, policy.A)
    acts = enumerate_actions(k, policy.A)
    probs = policy.probs_first[acts[:, 0]].astype(np.float64)
    for j in range(1, k):
        probs = probs * policy.probs_cond[j - 1][acts[:, j - 1], acts[:, j]]
    return acts, probs


def _suffix_weights(policy: ChainPolicy, k: int) -> np.ndarray:
    """(A, S) matrix: probability of each suffix a_{>k} given a_k, S = A^(K-1-k)."""
    A = policy.A
    width = policy.K - 1 - k
    S = A**width
    w = np.ones((A, S))
    if width == 0:
        return w
    suffix_digits = enumerate_actions(width, A)  # (S, width)
    prev = np.broadcast_to(np.arange(A)[:, None], (A, S))
    for t in range(width):
        dig = suffix_digits[:, t]
        w = w * policy.probs_cond[k + t][prev, dig[None, :]]
        prev = np.broadcast_to(dig[None, :], (A, S))
    return w


def _encode_prefix(prefix, A: int) -> int:
    pid = 0
    for a in prefix:
        pid = pid * A + int(a)
    return pid


def suffix_reward_stats(
    model: RewardModel, policy: ChainPolicy, k: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Suffix-averaged means and variances of f at the split after agent k.

    Returns (R_bar, V_suffix, prefix_probs): R_bar[pid, a] is
    E[f | prefix pid, a_k = a], V_suffix[pid, a] the suffix variance of f
    under the same conditioning, and prefix_probs the chain law of the
    A^k prefixes in enumeration order.
    """
    _enumeration_guard(model.K, model.A)
    K, A = model.K, model.A
    P, S = A**k, A ** (K - 1 - k)
    f_all = mean_rewards(model, enumerate_actions(K, A)).reshape(P, A, S)
    w = _suffix_weights(policy, k)  # (A, S)
    r_bar = np.einsum("pas,as->pa", f_all, w)
    second = np.einsum("pas,as->pa", f_all**2, w)
    v_suffix = np.maximum(second - r_bar**2, 0.0)
    _, prefix_probs = prefix_probabilities(policy, k)
    return r_bar, v_suffix, prefix_probs


def _kernel_rows(policy: ChainPolicy, k: int, rho, n_prefixes: int) -> np.ndarray:
    """Reference kernel as a (n_prefixes, A) matrix; None means the policy's own pi_k."""
    A = policy.A
    if rho is None:
        if k == 0:
            return np.broadcast_to(policy.probs_first, (n_prefixes, A)).copy()
        prefixes, _ = prefix_probabilities(policy, k)
        return policy.probs_cond[k - 1][prefixes[:, -1]]
    if callable(rho):
        prefixes, _ = prefix_probabilities(policy, k)
        rows = np.stack([np.asarray(rho(tuple(p)), dtype=np.float64) for p in prefixes])
    else:
        rows = np.broadcast_to(np.asarray(rho, dtype=np.float64), (n_prefixes, A)).copy()
    if rows.shape != (n_prefixes, A):
        raise DomainError(f"kernel rows must have shape ({n_prefixes}, {A})")
    if np.abs(rows.sum(axis=1) - 1.0).max() > 1e-9:
        raise DomainError("kernel rows must each sum to 1")
    return rows


def _baseline_values(D, prefixes: np.ndarray) -> np.ndarray:
    if callable(D):
        return np.array([float(D(tuple(p))) for p in prefixes])
    vals = np.asarray(D, dtype=np.float64)
    if vals.shape != (prefixes.shape[0],):
        raise DomainError(
            f"baseline array must have shape ({prefixes.shape[0]},), got {vals.shape}"
        )
    return vals


def sequential_learnability(
    model: RewardModel,
    policy: ChainPolicy,
    k: int,
    D,
    rho=None,
    pair: tuple[int, int] = (0, 1),
    prefix=None,
) -> float:
    """Signal-to-noise ratio of the utility f - D(prefix) for agent k.

    The numerator is the suffix-averaged utility difference between the
    two focal actions of `pair`; the denominator is the square root of
    the kernel-weighted second moment of the utility's fluctuation
    around D under teammate randomness, decomposed as
    (R_bar - D)^2 + suffix variance. With `prefix` given, both pieces
    are evaluated at that prefix alone; with prefix=None they are
    averaged over the chain law of prefixes.
    """
    a1, a2 = pair
    if not (0 <= a1 < model.A and 0 <= a2 < model.A):
        raise DomainError(f"pair {pair} out of range [0, {model.A})")
    r_bar, v_suffix, prefix_probs = suffix_reward_stats(model, policy, k)
    prefixes, _ = prefix_probabilities(policy, k)
    d_vals = _baseline_values(D, prefixes)
    rho_rows = _kernel_rows(policy, k, rho, prefixes.shape[0])

    u_bar = r_bar - d_vals[:, None]  # suffix-averaged utility
    num_per_prefix = u_bar[:, a1] - u_bar[:, a2]
    den2_per_prefix = (rho_rows * ((r_bar - d_vals[:, None]) ** 2 + v_suffix)).sum(axis=1)

    if prefix is None:
        num = float(prefix_probs @ num_per_prefix)
        den2 = float(prefix_probs @ den2_per_prefix)
    else:
        pid = _encode_prefix(prefix, model.A)
        num = float(num_per_prefix[pid])
        den2 = float(den2_per_prefix[pid])
    if den2 <= 0.0:
        raise DataError("degenerate learnability denominator (no teammate randomness)")
    return num / np.sqrt(den2)


def check_factoredness(model: RewardModel, policy: ChainPolicy, k: int, D) -> bool:
    """Sign agreement between suffix-averaged utility and reward rankings.

    D is called as D(prefix_tuple, a_k); prefix-only baselines simply
    ignore the second argument. Ties within TIE_BAND count as sign 0 and
    must match on both sides.
    """
    r_bar, _, _ = suffix_reward_stats(model, policy, k)
    prefixes, _ = prefix_probabilities(policy, k)
    A = model.A
    for pid in range(prefixes.shape[0]):
        p = tuple(prefixes[pid])
        d_row = np.array([float(D(p, a)) for a in range(A)])
        g_bar = r_bar[pid] - d_row
        for a1 in range(A):
            for a2 in range(a1 + 1, A):
                dg = g_bar[a1] - g_bar[a2]
                dr = r_bar[pid, a1] - r_bar[pid, a2]
                sg = 0 if abs(dg) <= TIE_BAND else (1 if dg > 0 else -1)
                sr = 0 if abs(dr) <= TIE_BAND else (1 if dr > 0 else -1)
                if sg != sr:
                    return False
    return True


def _fit_as_model(model: RewardModel, phi_hat: np.ndarray) -> RewardModel:
    """Wrap fitted per-agent tables as a purely additive reward model."""
    n_pairs = model.K * (model.K - 1) // 2
    return RewardModel(
        K=model.K,
        A=model.A,
        phi=phi_hat.reshape(model.K, model.A),
        g=np.zeros((n_pairs, model.A, model.A)),
        lambda_int=0.0,
        sigma=0.0,
    )


def bias_bound_check(
    model: RewardModel,
    policy_pi: ChainPolicy,
    policy_mu: ChainPolicy,
    fit,
    k: int,
    prefix=None,
    focal: int = 0,
    factored: bool = False,
) -> tuple[float, float]:
    """Both sides of the advantage-bias bound at one query.

    lhs is the gap between the fitted-model advantage and the ground-truth
    advantage, both exact under policy_pi. In the general form (factored=False)
    the gap is pointwise at (prefix, focal) and rhs is the two-channel bound:
    the expected focal-sensitivity of the residual under the downstream law,
    plus the residual sup-norm times the largest L1 distance between suffix
    laws at different focal actions.

    With factored=True the guarantee holds for the bias averaged over
    prefixes drawn from policy_pi (the pointwise version fails at the last
    agent, where no averaging is left to exploit the residual's mean-zero
    structure). lhs is then |E_prefix[signed bias at focal]|, the prefix
    argument is ignored, and rhs is 2 (K-1) * drift(pi, mu) * sup-norm of
    the residual. That form relies on fit being the exact least-squares
    solution under a factored policy_mu, which makes the residual mean-zero
    under mu conditionally on each single coordinate.
    """
    _enumeration_guard(model.K, model.A)
    K, A = model.K, model.A
    phi_hat = np.asarray(fit.phi_hat, dtype=np.float64)
    fit_model = _fit_as_model(model, phi_hat)

    acts = enumerate_actions(K, A)
    eps = mean_rewards(fit_model, acts) - mean_rewards(model, acts)
    eps_inf = float(np.abs(eps).max())

    if factored:
        r_true, _, pre_probs = suffix_reward_stats(model, policy_pi, k)
        r_fit, _, _ = suffix_reward_stats(fit_model, policy_pi, k)
        if k == 0:
            rows = policy_pi.probs_first[None, :]
        else:
            rows = policy_pi.probs_cond[k - 1][np.arange(A**k) % A]
        diff = r_fit - r_true  # (P, A) conditional-mean residual per prefix
        gap = diff - (rows * diff).sum(axis=1, keepdims=True)
        lhs = abs(float(pre_probs @ gap[:, focal]))
        drift = total_variation_drift(policy_pi, policy_mu)
        return lhs, 2.0 * (K - 1) * drift * eps_inf

    a_ls = seqau_advantage(fit_model, policy_pi, prefix, focal)
    a_true = seqau_advantage(model, policy_pi, prefix, focal)
    lhs = abs(a_ls - a_true)

    P, S = A**k, A ** (K - 1 - k)
    eps_cube = eps.reshape(P, A, S)
    pid = _encode_prefix(prefix, A)
    # focal-sensitivity of the residual at each suffix: max over pairs = max - min
    delta = eps_cube[pid].max(axis=0) - eps_cube[pid].min(axis=0)  # (S,)
    w = _suffix_weights(policy_pi, k)  # (A, S)
    pi_row = (
        policy_pi.probs_first
        if k == 0
        else policy_pi.probs_cond[k - 1][int(prefix[-1])]
    )
    channel1 = float(pi_row @ (w @ delta))
    l1 = 0.0
    for a1 in range(A):
        for a2 in range(a1 + 1, A):
            l1 = max(l1, float(np.abs(w[a1] - w[a2]).sum()))
    channel2 = eps_inf * l1
    return lhs, channel1 + channel2
