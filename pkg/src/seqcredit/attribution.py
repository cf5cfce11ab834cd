"""Ridge-fit additive reward decomposition.

The team reward is regressed onto concatenated per-agent one-hot
features, giving one fitted table per agent. The Gram matrix's smallest
eigenvalue is kept as a coverage diagnostic: the concatenated one-hot
design has K-1 exact linear dependencies for K >= 2 (each agent's block
sums to one), so the ridge term carries the conditioning there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DataError, DomainError
from .policies import ChainPolicy, RolloutBatch, sample_joint_batch


@dataclass(frozen=True, eq=False)
class AttributionFit:
    """Fitted per-agent components with Gram diagnostics."""

    phi_hat: np.ndarray  # (d,) with d = K * A, agent blocks concatenated
    ridge_lambda: float
    gram_min_eig: float
    N: int

    @property
    def d(self) -> int:
        return self.phi_hat.shape[0]

    def per_agent(self, K: int, A: int) -> np.ndarray:
        """Fitted tables as a (K, A) array."""
        if K * A != self.d:
            raise DomainError(f"cannot reshape d={self.d} coefficients to ({K}, {A})")
        return self.phi_hat.reshape(K, A)


def build_features(batch, K: int, A: int) -> np.ndarray:
    """One-hot block feature matrix: row n has a 1 at column k*A + a_k^(n)."""
    actions = batch.actions if isinstance(batch, RolloutBatch) else np.asarray(batch)
    if actions.ndim != 2 or actions.shape[1] != K:
        raise DomainError(f"actions must be (N, {K}), got {actions.shape}")
    if actions.size and (actions.min() < 0 or actions.max() >= A):
        raise DomainError(f"action indices out of range [0, {A})")
    n = actions.shape[0]
    psi = np.zeros((n, K * A))
    cols = actions + np.arange(K)[None, :] * A
    psi[np.arange(n)[:, None], cols] = 1.0
    return psi


def ridge_fit(psi: np.ndarray, r: np.ndarray, ridge_lambda: float) -> AttributionFit:
    """Solve (lambda I + Psi^T Psi) phi = Psi^T r by dense Cholesky."""
    if ridge_lambda <= 0:
        raise ConfigurationError(f"ridge lambda must be positive, got {ridge_lambda}")
    rewards = np.asarray(r, dtype=np.float64)
    if not np.isfinite(rewards).all():
        raise DataError("rewards contain non-finite values")
    if psi.shape[0] != rewards.shape[0]:
        raise DataError(
            f"feature matrix has {psi.shape[0]} rows but rewards have {rewards.shape[0]}"
        )
    d = psi.shape[1]
    gram = psi.T @ psi
    system = gram + ridge_lambda * np.eye(d)
    rhs = psi.T @ rewards
    chol = scipy.linalg.cho_factor(system, lower=True)
    phi_hat = scipy.linalg.cho_solve(chol, rhs)
    return AttributionFit(
        phi_hat=phi_hat,
        ridge_lambda=float(ridge_lambda),
        gram_min_eig=gram_smallest_eigenvalue(psi),
        N=psi.shape[0],
    )


def fit_batch(batch: RolloutBatch, K: int, A: int, ridge_lambda: float) -> AttributionFit:
    """Convenience: features from the batch, then the ridge solve."""
    return ridge_fit(build_features(batch, K, A), batch.rewards, ridge_lambda)


def additive_predict(fit: AttributionFit, a) -> float:
    """Fitted reward prediction: sum of the K selected coefficients."""
    arr = np.asarray(a, dtype=np.int64)
    K = arr.shape[0]
    if K == 0 or fit.d % K != 0:
        raise DomainError(f"action length {K} incompatible with d={fit.d}")
    A = fit.d // K
    if arr.min(initial=0) < 0 or arr.max(initial=0) >= A:
        raise DomainError(f"action indices out of range [0, {A})")
    return float(fit.phi_hat[arr + np.arange(K) * A].sum())


def gram_smallest_eigenvalue(psi: np.ndarray) -> float:
    """Smallest eigenvalue of Psi^T Psi / N (symmetric eigensolve)."""
    if psi.shape[0] < 1:
        raise DataError("need at least one row to form a Gram matrix")
    gram = psi.T @ psi / psi.shape[0]
    return float(np.linalg.eigvalsh(gram)[0])


def sampled_population_gram(
    policy: ChainPolicy, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Monte Carlo estimate of G = E_mu[psi psi^T] from chain samples."""
    K, A = policy.K, policy.A
    acts = sample_joint_batch(policy, n_samples, rng)
    d = K * A
    gram = np.zeros((d, d))
    for k in range(K):
        for j in range(K):
            counts = np.bincount(acts[:, k] * A + acts[:, j], minlength=A * A)
            gram[k * A : (k + 1) * A, j * A : (j + 1) * A] = (
                counts.reshape(A, A) / n_samples
            )
    return gram


def exact_population_gram(policy: ChainPolicy) -> np.ndarray:
    """Exact G = E_mu[psi psi^T] from the chain's marginals and pairwise joints."""
    from .oracle import chain_law  # local import keeps module dependencies one-way

    K, A = policy.K, policy.A
    law = chain_law(policy, with_pairs=True)
    d = K * A
    gram = np.zeros((d, d))
    for k in range(K):
        blk = slice(k * A, (k + 1) * A)
        gram[blk, blk] = np.diag(law.marginals[k])
        for j in range(k + 1, K):
            joint = law.pairs[(k, j)]
            gram[blk, j * A : (j + 1) * A] = joint
            gram[j * A : (j + 1) * A, blk] = joint.T
    return gram
