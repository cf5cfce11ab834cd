"""Numerical verification suite for the package's structural claims.

Each check draws randomized small instances where everything is
enumerable, computes both sides of a claimed identity or bound by
independent routes, and reports the worst margin observed. A margin is
signed so that zero is the pass boundary: positive means the claim held
with room to spare, negative is a violation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attribution import (
    AttributionFit,
    additive_predict,
    build_features,
    fit_batch,
    sampled_population_gram,
)
from .estimators import (
    capo_decomposed_exact,
    capo_direct,
    capo_fictitious,
    downstream_component_sums,
)
from .oracle import (
    bias_bound_check,
    check_factoredness,
    dstar_baseline,
    exact_conditional_mean,
    prefix_probabilities,
    seqau_advantage,
    sequential_learnability,
    suffix_reward_stats,
)
from .policies import (
    ChainPolicy,
    RolloutBatch,
    init_policy,
    log_softmax,
    sample_joint_batch,
)
from .rewards import RewardModel, enumerate_actions, mean_rewards, sample_reward_model
from .seeding import derive_rng, derive_seed
from .training import collect_rollouts

DEFAULT_MASTER_SEED = 1729

# (K, A) pairs small enough to enumerate every prefix and joint action
_SIZE_GRID = ((2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (3, 4), (4, 2), (4, 3))


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one verification suite."""

    name: str
    passed: bool
    n_cases: int
    margin: float  # smallest signed pass margin; negative = worst violation
    detail: str

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: {self.n_cases} cases, "
            f"worst margin {self.margin:.3e} ({self.detail})"
        )


def _draw_instance(
    check: str, idx: int, master_seed: int, sigma: float = 0.0
) -> tuple[RewardModel, ChainPolicy]:
    """Random enumerable instance: sizes, interaction weight, model, policy."""
    rng = derive_rng(master_seed, check, "instance", idx)
    K, A = _SIZE_GRID[int(rng.integers(len(_SIZE_GRID)))]
    lambda_int = 0.0 if rng.random() < 0.25 else float(rng.uniform(0.1, 1.0))
    model = sample_reward_model(
        seed=derive_seed(master_seed, check, "model", idx),
        K=K,
        A=A,
        lambda_int=lambda_int,
        sigma=sigma,
    )
    policy = init_policy(derive_seed(master_seed, check, "policy", idx), K, A, rho=0.0)
    return model, policy


def _decode_prefix(pid: int, k: int, A: int) -> tuple[int, ...]:
    return tuple((pid // A ** (k - 1 - j)) % A for j in range(k))


def _fitted_model(model: RewardModel, fit: AttributionFit) -> RewardModel:
    """Additive reward model whose per-agent tables are the fitted ones."""
    n_pairs = model.K * (model.K - 1) // 2
    return RewardModel(
        K=model.K,
        A=model.A,
        phi=fit.per_agent(model.K, model.A),
        g=np.zeros((n_pairs, model.A, model.A)),
        lambda_int=0.0,
        sigma=0.0,
    )


def check_upstream_cancellation(
    n_instances: int = 100, master_seed: int = DEFAULT_MASTER_SEED
) -> CheckResult:
    """Two-term advantage of the fitted model == direct + indirect form.

    The left route evaluates the fitted additive model's conditional
    means by chain marginalization; the right route is the closed-form
    decomposition that never touches upstream components. Agreement at
    every enumerable (prefix, action) query shows the upstream terms
    cancel identically, not just in expectation.
    """
    tol = 1e-10
    worst = np.inf
    cases = 0
    for idx in range(n_instances):
        model, policy = _draw_instance("cancel", idx, master_seed)
        rng = derive_rng(master_seed, "cancel", "batch", idx)
        batch = collect_rollouts(model, policy, N=24, rng=rng)
        fit = fit_batch(batch, model.K, model.A, ridge_lambda=1e-3)
        fm = _fitted_model(model, fit)
        for k in range(model.K):
            prefixes, _ = prefix_probabilities(policy, k)
            for pid in range(prefixes.shape[0]):
                prefix = tuple(prefixes[pid])
                base = exact_conditional_mean(fm, policy, prefix, None)
                for focal in range(model.A):
                    lhs = exact_conditional_mean(fm, policy, prefix, focal) - base
                    rhs = capo_decomposed_exact(fit, policy, prefix, focal)
                    worst = min(worst, tol - abs(lhs - rhs))
                    cases += 1
    return CheckResult(
        name="upstream_cancellation",
        passed=worst >= 0.0,
        n_cases=cases,
        margin=float(worst),
        detail=f"|two-term - (direct+indirect)| <= {tol:g}",
    )


def _factored_pair(seed: int, K: int, A: int) -> tuple[ChainPolicy, ChainPolicy]:
    """A factored behavior policy and a small factored perturbation of it."""
    rng = np.random.default_rng(seed)
    first = log_softmax(np.log(rng.dirichlet(np.ones(A))))
    cond = np.zeros((K - 1, A, A))
    for j in range(K - 1):
        row = log_softmax(np.log(rng.dirichlet(np.ones(A))))
        cond[j] = np.broadcast_to(row, (A, A))
    mu = ChainPolicy(K, A, first, cond)
    first_pi = log_softmax(first + 0.3 * rng.standard_normal(A))
    cond_pi = np.zeros_like(cond)
    for j in range(K - 1):
        row = log_softmax(cond[j, 0] + 0.3 * rng.standard_normal(A))
        cond_pi[j] = np.broadcast_to(row, (A, A))
    return mu, ChainPolicy(K, A, first_pi, cond_pi)


def _population_fit(model: RewardModel, mu: ChainPolicy, ridge_lambda: float = 0.0) -> AttributionFit:
    """Least-squares fit against the exact behavior distribution instead of a sample.

    With ridge_lambda == 0 the (singular) normal equations are solved exactly via
    lstsq, which keeps the residual orthogonal to every feature under mu.
    """
    from .oracle import joint_probabilities

    acts, probs = joint_probabilities(mu)
    f_vals = mean_rewards(model, acts)
    psi = build_features(acts, model.K, model.A)
    gram = psi.T @ (probs[:, None] * psi)
    rhs = psi.T @ (probs * f_vals)
    d = model.K * model.A
    if ridge_lambda > 0.0:
        phi_hat = np.linalg.solve(gram + ridge_lambda * np.eye(d), rhs)
    else:
        phi_hat = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    return AttributionFit(
        phi_hat=phi_hat,
        ridge_lambda=ridge_lambda,
        gram_min_eig=float(np.linalg.eigvalsh(gram)[0]),
        N=0,
    )


def check_bias_bound(
    n_instances: int = 100, master_seed: int = DEFAULT_MASTER_SEED
) -> CheckResult:
    """Advantage bias of the fitted model stays inside the two-channel bound.

    General case: sample-ridge fit, randomized queries, slack 1e-9.
    Factored case: factored behavior policy with a factored perturbation
    and an exact population least-squares fit, where the prefix-averaged
    bias collapses to drift times residual sup-norm; slack 1e-6 covers
    the lstsq solve of the singular normal equations.
    """
    tol_general = 1e-9
    tol_factored = 1e-6
    worst = np.inf
    cases = 0
    for idx in range(n_instances):
        model, policy = _draw_instance("bias", idx, master_seed)
        K, A = model.K, model.A
        rng = derive_rng(master_seed, "bias", "batch", idx)
        batch = collect_rollouts(model, policy, N=24, rng=rng)
        fit = fit_batch(batch, K, A, ridge_lambda=1e-3)
        qrng = derive_rng(master_seed, "bias", "queries", idx)
        for k in range(K):
            n_prefixes = A**k
            chosen = qrng.choice(n_prefixes, size=min(n_prefixes, 3), replace=False)
            for pid in chosen:
                prefix = _decode_prefix(int(pid), k, A)
                for focal in range(A):
                    lhs, rhs = bias_bound_check(
                        model, policy, policy, fit, k, prefix, focal
                    )
                    worst = min(worst, rhs + tol_general - lhs)
                    cases += 1

        mu, pi = _factored_pair(derive_seed(master_seed, "bias", "factored", idx), K, A)
        pop_fit = _population_fit(model, mu)
        for k in range(K):
            for focal in range(A):
                lhs, rhs = bias_bound_check(
                    model, pi, mu, pop_fit, k, focal=focal, factored=True
                )
                worst = min(worst, rhs + tol_factored - lhs)
                cases += 1
    return CheckResult(
        name="bias_bound",
        passed=worst >= 0.0,
        n_cases=cases,
        margin=float(worst),
        detail="lhs <= rhs + slack on general and factored queries",
    )


def check_dstar_optimality(
    n_instances: int = 100, master_seed: int = DEFAULT_MASTER_SEED
) -> CheckResult:
    """The kernel-averaged conditional mean maximizes learnability pointwise.

    For sampled prefixes, a 21-point grid of baseline candidates around
    the claimed optimum must peak exactly at the center. Also verifies
    the optimum value itself by two routes (conditional-mean chain
    versus kernel-weighted suffix means) and the learnability score by
    direct enumeration of the tilted second moment.
    """
    tie_band = 1e-12
    route_tol = 1e-10
    worst = np.inf
    cases = 0
    offsets = np.linspace(-1.0, 1.0, 21)
    center = 10
    for idx in range(n_instances):
        model, policy = _draw_instance("dstar", idx, master_seed)
        K, A = model.K, model.A
        qrng = derive_rng(master_seed, "dstar", "queries", idx)
        for k in range(K):
            r_bar, v_suffix, _ = suffix_reward_stats(model, policy, k)
            rows = policy.agent_probs(k)
            n_prefixes = A**k
            chosen = qrng.choice(n_prefixes, size=min(n_prefixes, 3), replace=False)
            d_star_all = np.array(
                [
                    rows[0 if k == 0 else pid % A] @ r_bar[pid]
                    for pid in range(n_prefixes)
                ]
            )
            for pid in chosen:
                pid = int(pid)
                prefix = _decode_prefix(pid, k, A)
                row = rows[0 if k == 0 else pid % A]
                # route agreement on the optimum's value
                via_cond = dstar_baseline(model, policy, prefix, row)
                if abs(via_cond - d_star_all[pid]) > route_tol:
                    worst = min(worst, route_tol - abs(via_cond - d_star_all[pid]))
                spread = float(r_bar[pid].max() - r_bar[pid].min())
                if spread <= 1e-9:
                    continue
                pair = (int(np.argmax(r_bar[pid])), int(np.argmin(r_bar[pid])))
                span = spread + 1.0
                scores = np.empty(21)
                for i, off in enumerate(offsets):
                    d_vals = d_star_all.copy()
                    d_vals[pid] += off * span
                    scores[i] = sequential_learnability(
                        model, policy, k, d_vals, rho=None, pair=pair, prefix=prefix
                    )
                others = np.delete(scores, center)
                worst = min(worst, float(scores[center] - others.max() + tie_band))
                cases += 1
        # independent evaluation of the learnability score at one query
        model2, policy2 = model, policy
        k2 = idx % model2.K
        r_bar2, _, _ = suffix_reward_stats(model2, policy2, k2)
        pid2 = 0
        prefix2 = _decode_prefix(pid2, k2, model2.A)
        row2 = policy2.agent_probs(k2)[0 if k2 == 0 else pid2 % model2.A]
        d0 = float(row2 @ r_bar2[pid2]) + 0.37
        pair2 = (int(np.argmax(r_bar2[pid2])), int(np.argmin(r_bar2[pid2])))
        if r_bar2[pid2, pair2[0]] - r_bar2[pid2, pair2[1]] > 1e-9:
            d_arr = np.full(model2.A**k2, d0)
            via_op = sequential_learnability(
                model2, policy2, k2, d_arr, rho=None, pair=pair2, prefix=prefix2
            )
            via_enum = _learnability_by_enumeration(
                model2, policy2, k2, prefix2, d0, row2, pair2
            )
            worst = min(worst, route_tol - abs(via_op - via_enum))
            cases += 1
    return CheckResult(
        name="dstar_learnability",
        passed=worst >= 0.0,
        n_cases=cases,
        margin=float(worst),
        detail="grid peak at kernel-averaged mean; dual-route score agreement",
    )


def _learnability_by_enumeration(
    model: RewardModel,
    policy: ChainPolicy,
    k: int,
    prefix: tuple,
    d0: float,
    kernel_row: np.ndarray,
    pair: tuple[int, int],
) -> float:
    """Learnability from a brute-force pass over all completions."""
    K, A = model.K, model.A
    S = A ** (K - 1 - k)
    pid = 0
    for a in prefix:
        pid = pid * A + int(a)
    f_all = mean_rewards(model, enumerate_actions(K, A)).reshape(A**k, A, S)
    from .oracle import _suffix_weights

    w = _suffix_weights(policy, k)  # (A, S)
    mean_by_focal = (f_all[pid] * w).sum(axis=1)
    num = float(mean_by_focal[pair[0]] - mean_by_focal[pair[1]])
    den2 = float((kernel_row[:, None] * w * (f_all[pid] - d0) ** 2).sum())
    return num / np.sqrt(den2)


def check_factoredness_ranking(
    n_instances: int = 100, master_seed: int = DEFAULT_MASTER_SEED
) -> CheckResult:
    """Prefix-only baselines preserve action rankings; action-dependent ones break them."""
    worst = 1.0
    cases = 0
    for idx in range(n_instances):
        model, policy = _draw_instance("factored", idx, master_seed)
        rng = derive_rng(master_seed, "factored", "baseline", idx)
        for k in range(model.K):
            r_bar, _, _ = suffix_reward_stats(model, policy, k)
            const = float(rng.normal())
            random_table = rng.normal(size=model.A**k)

            def d_zero(p, a):
                return 0.0

            def d_const(p, a):
                return const

            def d_random_prefix(p, a):
                pid = 0
                for x in p:
                    pid = pid * model.A + int(x)
                return float(random_table[pid])

            for d_fn in (d_zero, d_const, d_random_prefix):
                if not check_factoredness(model, policy, k, d_fn):
                    worst = -1.0
                cases += 1

            # action-dependent baseline engineered to flip every ranking
            def d_flip(p, a):
                pid = 0
                for x in p:
                    pid = pid * model.A + int(x)
                return 2.0 * float(r_bar[pid, a])

            spread = float((r_bar.max(axis=1) - r_bar.min(axis=1)).max())
            if spread > 1e-9:
                if check_factoredness(model, policy, k, d_flip):
                    worst = -1.0
                cases += 1
    return CheckResult(
        name="factoredness",
        passed=worst >= 0.0,
        n_cases=cases,
        margin=float(worst),
        detail="prefix-only baselines factored, ranking-flipping baseline rejected",
    )


def check_tower_property(
    n_instances: int = 100, master_seed: int = DEFAULT_MASTER_SEED
) -> CheckResult:
    """Advantages average to zero under the agent's own action law."""
    tol = 1e-10
    worst = np.inf
    cases = 0
    for idx in range(n_instances):
        model, policy = _draw_instance("tower", idx, master_seed)
        for k in range(model.K):
            prefixes, _ = prefix_probabilities(policy, k)
            rows = policy.agent_probs(k)
            for pid in range(prefixes.shape[0]):
                prefix = tuple(prefixes[pid])
                row = rows[0 if k == 0 else prefix[-1]]
                total = sum(
                    row[a] * seqau_advantage(model, policy, prefix, a)
                    for a in range(model.A)
                )
                worst = min(worst, tol - abs(total))
                cases += 1
    return CheckResult(
        name="tower_property",
        passed=worst >= 0.0,
        n_cases=cases,
        margin=float(worst),
        detail=f"|sum_a pi(a) A(prefix, a)| <= {tol:g}",
    )


def check_gradient_mse(
    n_instances: int = 100,
    master_seed: int = DEFAULT_MASTER_SEED,
    reps: int = 2000,
    L_values: tuple[int, ...] = (8, 64),
) -> CheckResult:
    """Monte Carlo gradient MSE stays under the variance-plus-bias bound.

    The exact per-agent gradient, the variance of the advantage-weighted
    score, and the worst-case advantage bias are all enumerated; the
    left side is estimated from `reps` independent L-sample gradient
    estimates per instance.
    """
    worst = np.inf
    cases = 0
    for idx in range(n_instances):
        model, mu = _draw_instance("gradmse", idx, master_seed)
        K, A = model.K, model.A
        pi = init_policy(derive_seed(master_seed, "gradmse", "pi", idx), K, A, rho=0.0)
        k = idx % K
        rng = derive_rng(master_seed, "gradmse", "batch", idx)
        batch = collect_rollouts(model, mu, N=32, rng=rng)
        fit = fit_batch(batch, K, A, ridge_lambda=1e-3)

        r_bar, _, prefix_probs = suffix_reward_stats(model, pi, k)
        n_prefixes = A**k
        rows_c = 1 if k == 0 else A
        probs_k = pi.agent_probs(k)  # (rows_c, A)
        cvec = np.zeros(n_prefixes, dtype=np.int64) if k == 0 else (
            np.arange(n_prefixes) % A
        )
        a_true = r_bar - (probs_k[cvec] * r_bar).sum(axis=1, keepdims=True)

        tabs = fit.per_agent(K, A)
        S = downstream_component_sums(fit, pi)
        bundle = tabs[k] + S[k]
        a_hat = bundle[None, :] - (probs_k @ bundle)[:, None]  # (rows_c, A)

        bias_cap = float(np.abs(a_hat[cvec] - a_true).max())
        sn2 = 1.0 - 2.0 * probs_k + (probs_k**2).sum(axis=1, keepdims=True)
        weights = prefix_probs[:, None] * probs_k[cvec]  # (P, A)

        g_star = np.zeros((rows_c, A))
        for pid in range(n_prefixes):
            c = cvec[pid]
            wa = weights[pid] * a_true[pid]
            g_star[c] += wa
            g_star[c] -= wa.sum() * probs_k[c]
        e_as2 = float((weights * a_true**2 * sn2[cvec]).sum())
        var_as = e_as2 - float((g_star**2).sum())
        e_s2 = float((weights * sn2[cvec]).sum())

        mc_rng = derive_rng(master_seed, "gradmse", "mc", idx)
        for L in L_values:
            acts = sample_joint_batch(pi, reps * L, mc_rng)
            c = np.zeros(reps * L, dtype=np.int64) if k == 0 else acts[:, k - 1]
            a = acts[:, k]
            vals = a_hat[c, a] / L
            rep = np.arange(reps * L) // L
            flat = (rep * rows_c + c) * A + a
            g1 = np.bincount(flat, weights=vals, minlength=reps * rows_c * A).reshape(
                reps, rows_c, A
            )
            wsum = np.bincount(
                rep * rows_c + c, weights=vals, minlength=reps * rows_c
            ).reshape(reps, rows_c)
            g_hat = g1 - wsum[:, :, None] * probs_k[None, :, :]
            lhs = float(((g_hat - g_star[None]) ** 2).sum(axis=(1, 2)).mean())
            rhs = 2.0 / L * var_as + 2.0 * bias_cap**2 * e_s2
            worst = min(worst, rhs - lhs)
            cases += 1
    return CheckResult(
        name="gradient_mse",
        passed=worst >= 0.0,
        n_cases=cases,
        margin=float(worst),
        detail=f"E||ghat - g*||^2 <= 2/L Var + 2 B^2 E||s||^2 at L in {L_values}",
    )


def check_variance_bound(
    master_seed: int = DEFAULT_MASTER_SEED,
    n_batches: int = 500,
    slack: float = 0.5,
    N: int = 16,
    ridge_lambda: float = 1e-3,
) -> CheckResult:
    """Direct-effect variance across resampled batches respects the coverage bound.

    Additive noiseless instances; the bound's coverage constant is the
    smallest eigenvalue of the behavior Gram matrix estimated from 1e6
    samples. With more than one agent that eigenvalue is zero by the
    one-hot block dependency, making the bound loose but still valid;
    the single-agent instance exercises it meaningfully.
    """
    worst = np.inf
    cases = 0
    details = []
    for tag, K, A in (("K1", 1, 4), ("K4", 4, 3)):
        model = sample_reward_model(
            seed=derive_seed(master_seed, "varbound", "model", tag),
            K=K,
            A=A,
            lambda_int=0.0,
            sigma=0.0,
        )
        mu = init_policy(derive_seed(master_seed, "varbound", "policy", tag), K, A, 0.0)
        gram_rng = derive_rng(master_seed, "varbound", "gram", tag)
        gram = sampled_population_gram(mu, 10**6, gram_rng)
        kappa = max(float(np.linalg.eigvalsh(gram)[0]), 0.0)
        r_max = float(np.abs(mean_rewards(model, enumerate_actions(K, A))).max())
        bound = 2.0 * r_max**2 / (ridge_lambda + N * kappa) * (1.0 + slack)

        rows_c = np.array([1 if k == 0 else A for k in range(K)])
        d_samples = np.empty((n_batches, int((rows_c * A).sum())))
        batch_rng = derive_rng(master_seed, "varbound", "batches", tag)
        for b in range(n_batches):
            batch = collect_rollouts(model, mu, N=N, rng=batch_rng)
            fit = fit_batch(batch, K, A, ridge_lambda)
            tabs = fit.per_agent(K, A)
            pieces = []
            for k in range(K):
                probs_k = mu.agent_probs(k)
                pieces.append(
                    (tabs[k][None, :] - (probs_k @ tabs[k])[:, None]).ravel()
                )
            d_samples[b] = np.concatenate(pieces)
        max_var = float(d_samples.var(axis=0, ddof=1).max())
        worst = min(worst, bound - max_var)
        cases += d_samples.shape[1]
        details.append(f"{tag}: kappa={kappa:.4g}, maxVar={max_var:.3e}, bound={bound:.3e}")
    return CheckResult(
        name="variance_bound",
        passed=worst >= 0.0,
        n_cases=cases,
        margin=float(worst),
        detail="; ".join(details),
    )


def check_fictitious_unbiasedness(
    master_seed: int = DEFAULT_MASTER_SEED, streams: int = 1000, L: int = 64
) -> CheckResult:
    """Sampled indirect effect is an unbiased estimate of the exact one."""
    model = sample_reward_model(
        seed=derive_seed(master_seed, "fict", "model"), K=4, A=4, lambda_int=0.6, sigma=0.5
    )
    mu = init_policy(derive_seed(master_seed, "fict", "policy"), 4, 4, 0.0)
    rng = derive_rng(master_seed, "fict", "batch")
    batch = collect_rollouts(model, mu, N=16, rng=rng)
    fit = fit_batch(batch, 4, 4, ridge_lambda=1e-3)

    k = 1
    row = batch.actions[0]
    prefix = tuple(row[:k])
    replicated = RolloutBatch(
        actions=np.tile(row, (streams, 1)),
        rewards=np.full(streams, batch.rewards[0]),
        logp=np.tile(batch.logp[0], (streams, 1)),
    )
    direct = capo_direct(fit, mu, replicated, k)[0]
    exact_indirect = capo_decomposed_exact(fit, mu, prefix, int(row[k])) - direct
    draw_rng = derive_rng(master_seed, "fict", "draws")
    samples = capo_fictitious(fit, mu, replicated, k, L, draw_rng) - direct
    se = float(samples.std(ddof=1) / np.sqrt(streams))
    gap = abs(float(samples.mean()) - exact_indirect)
    margin = 4.0 * se - gap
    return CheckResult(
        name="fictitious_unbiasedness",
        passed=margin >= 0.0,
        n_cases=streams,
        margin=float(margin),
        detail=f"|mean - exact| = {gap:.3e} vs 4 SE = {4 * se:.3e}",
    )


def check_gauge_invariance(
    master_seed: int = DEFAULT_MASTER_SEED,
) -> CheckResult:
    """Per-agent constant shifts of the fitted tables leave advantages unchanged."""
    tol = 1e-12
    model = sample_reward_model(
        seed=derive_seed(master_seed, "gauge", "model"), K=3, A=3, lambda_int=0.8, sigma=0.5
    )
    policy = init_policy(derive_seed(master_seed, "gauge", "policy"), 3, 3, 0.0)
    rng = derive_rng(master_seed, "gauge", "batch")
    batch = collect_rollouts(model, policy, N=12, rng=rng)
    fit = fit_batch(batch, 3, 3, ridge_lambda=1e-3)
    shift_rng = derive_rng(master_seed, "gauge", "shifts")
    shifts = shift_rng.normal(size=3)
    shifted = AttributionFit(
        phi_hat=fit.phi_hat + np.repeat(shifts, 3),
        ridge_lambda=fit.ridge_lambda,
        gram_min_eig=fit.gram_min_eig,
        N=fit.N,
    )
    worst = 0.0
    cases = 0
    for k in range(3):
        prefixes, _ = prefix_probabilities(policy, k)
        for pid in range(prefixes.shape[0]):
            prefix = tuple(prefixes[pid])
            for focal in range(3):
                d1 = capo_decomposed_exact(fit, policy, prefix, focal)
                d2 = capo_decomposed_exact(shifted, policy, prefix, focal)
                worst = max(worst, abs(d1 - d2))
                cases += 1
        worst = max(
            worst,
            float(
                np.abs(
                    capo_direct(fit, policy, batch, k)
                    - capo_direct(shifted, policy, batch, k)
                ).max()
            ),
        )
        rng_a = derive_rng(master_seed, "gauge", "fict", k)
        rng_b = derive_rng(master_seed, "gauge", "fict", k)
        fa = capo_fictitious(fit, policy, batch, k, 16, rng_a)
        fb = capo_fictitious(shifted, policy, batch, k, 16, rng_b)
        worst = max(worst, float(np.abs(fa - fb).max()))
        cases += 2 * batch.N
    pred_gap = additive_predict(shifted, batch.actions[0]) - additive_predict(
        fit, batch.actions[0]
    )
    worst = max(worst, abs(pred_gap - shifts.sum()))
    cases += 1
    return CheckResult(
        name="gauge_invariance",
        passed=worst <= tol,
        n_cases=cases,
        margin=float(tol - worst),
        detail=f"largest advantage change {worst:.3e} under per-agent shifts",
    )


def run_all_checks(
    n_instances: int = 100,
    master_seed: int = DEFAULT_MASTER_SEED,
    reps: int = 2000,
) -> list[CheckResult]:
    """Full verification suite in a fixed order."""
    return [
        check_upstream_cancellation(n_instances, master_seed),
        check_bias_bound(n_instances, master_seed),
        check_dstar_optimality(n_instances, master_seed),
        check_factoredness_ranking(n_instances, master_seed),
        check_tower_property(n_instances, master_seed),
        check_gradient_mse(n_instances, master_seed, reps=reps),
        check_variance_bound(master_seed),
        check_fictitious_unbiasedness(master_seed),
        check_gauge_invariance(master_seed),
    ]
