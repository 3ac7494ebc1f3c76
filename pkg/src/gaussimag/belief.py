"""Gaussian (imaginary) and Beta (real) posterior beliefs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .envs import EnvSpec, History

# Full re-inversion of the precision matrix after this many rank-1 updates.
RESYNC_EVERY = 256


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def spd_inverse(matrix: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric PD matrix via Cholesky; result is symmetrised."""
    factor = cho_factor(matrix, lower=True)
    inv = cho_solve(factor, np.eye(matrix.shape[0]))
    return 0.5 * (inv + inv.T)


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """Posterior N(mean, cov) over the imaginary mean-reward vector.

    ``precision`` is kept alongside ``cov`` so that each observation costs a
    rank-1 update. ``n_updates`` counts observations since the prior.
    """

    mean: np.ndarray
    cov: np.ndarray
    precision: np.ndarray
    noise_var: float
    n_updates: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mean", _readonly(self.mean))
        object.__setattr__(self, "cov", _readonly(self.cov))
        object.__setattr__(self, "precision", _readonly(self.precision))

    @classmethod
    def from_prior(cls, mu0, sigma0, noise_var: float) -> "GaussianBelief":
        sigma0 = np.asarray(sigma0, dtype=float)
        return cls(np.asarray(mu0, dtype=float), sigma0, spd_inverse(sigma0), float(noise_var))

    @classmethod
    def prior(cls, spec: EnvSpec) -> "GaussianBelief":
        return cls(spec.mu0, spec.sigma0, spd_inverse(spec.sigma0), spec.noise_var)

    @property
    def num_arms(self) -> int:
        return self.mean.shape[0]

    def check(self, tol: float = 1e-8) -> None:
        """Raise ``ValueError`` if the belief violates its invariants."""
        if not np.allclose(self.cov, self.cov.T, atol=1e-12):
            raise ValueError("covariance is not symmetric")
        try:
            np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        err = np.linalg.norm(self.precision @ self.cov - np.eye(self.num_arms))
        if err > tol:
            raise ValueError(f"precision and covariance disagree (Frobenius error {err:.3g})")


def update_gaussian(belief: GaussianBelief, arm: int, reward: float) -> GaussianBelief:
    """Condition ``belief`` on one observation ``reward`` of ``arm``.

    Uses the Sherman-Morrison form of
    ``cov' = (precision + e_a e_a^T / noise_var)^{-1}``, which costs O(A^2).
    """
    if not 0 <= arm < belief.num_arms:
        raise IndexError(f"arm {arm} out of range for {belief.num_arms} arms")
    reward = float(reward)
    if not np.isfinite(reward):
        raise ValueError("reward must be finite")
    s2 = belief.noise_var
    col = belief.cov[:, arm]
    denom = s2 + col[arm]
    mean = belief.mean + col * ((reward - belief.mean[arm]) / denom)
    precision = belief.precision.copy()
    precision[arm, arm] += 1.0 / s2
    n_updates = belief.n_updates + 1
    if n_updates % RESYNC_EVERY == 0:
        cov = spd_inverse(precision)
    else:
        cov = belief.cov - np.outer(col, col) / denom
        cov = 0.5 * (cov + cov.T)
    return GaussianBelief(mean, cov, precision, s2, n_updates)


def batch_posterior(spec: EnvSpec, history: History) -> GaussianBelief:
    """Posterior given a whole history, by a direct solve.

    Covariance ``(Sigma0^{-1} + Lambda / noise_var)^{-1}`` where ``Lambda``
    is the diagonal matrix of pull counts; mean
    ``cov @ (Sigma0^{-1} mu0 + sum_i e_{A_i} R_i / noise_var)``.
    """
    history.check_arms(spec.num_arms)
    if len(history) == 0:
        return GaussianBelief.prior(spec)
    s2 = spec.noise_var
    prior_precision = spd_inverse(spec.sigma0)
    counts = np.bincount(history.arms, minlength=spec.num_arms)
    reward_sums = np.bincount(history.arms, weights=history.rewards, minlength=spec.num_arms)
    precision = prior_precision + np.diag(counts / s2)
    factor = cho_factor(precision, lower=True)
    cov = cho_solve(factor, np.eye(spec.num_arms))
    cov = 0.5 * (cov + cov.T)
    mean = cho_solve(factor, prior_precision @ spec.mu0 + reward_sums / s2)
    return GaussianBelief(mean, cov, precision, s2, len(history))


def update_gaussian_batch(means, covs, arms, rewards, noise_var: float):
    """Vectorised :func:`update_gaussian` over a stack of beliefs.

    ``means`` has shape (B, A), ``covs`` (B, A, A); returns new arrays.
    """
    idx = np.arange(means.shape[0])
    col = covs[idx, :, arms]
    denom = noise_var + col[idx, arms]
    means = means + col * ((rewards - means[idx, arms]) / denom)[:, None]
    covs = covs - col[:, :, None] * col[:, None, :] / denom[:, None, None]
    covs = 0.5 * (covs + covs.swapaxes(1, 2))
    return means, covs


def update_diagonal_batch(means, variances, arms, rewards, noise_var: float):
    """Batched update when every covariance is diagonal (stored as (B, A) variances)."""
    idx = np.arange(means.shape[0])
    v = variances[idx, arms]
    denom = noise_var + v
    means = means.copy()
    variances = variances.copy()
    means[idx, arms] += v * (rewards - means[idx, arms]) / denom
    variances[idx, arms] = v * noise_var / denom
    return means, variances


def posterior_cov_from_counts(spec: EnvSpec, counts: np.ndarray) -> np.ndarray:
    """Posterior covariance(s) for pull-count vector(s) ``counts`` of shape (..., A)."""
    counts = np.asarray(counts, dtype=float)
    precision = spd_inverse(spec.sigma0) + counts[..., :, None] * np.eye(spec.num_arms) / spec.noise_var
    cov = np.linalg.inv(precision)
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


@dataclass(frozen=True, eq=False)
class BetaBelief:
    """Independent per-arm Beta(alpha, beta) posterior over the real means."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha, beta = _readonly(self.alpha), _readonly(self.beta)
        if alpha.shape != beta.shape or np.any(alpha <= 0) or np.any(beta <= 0):
            raise ValueError("Beta parameters must be positive and of equal length")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def prior(cls, spec: EnvSpec) -> "BetaBelief":
        return cls(spec.alpha, spec.beta)

    @property
    def mean(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)


def update_beta(belief: BetaBelief, arm: int, reward: int) -> BetaBelief:
    if not 0 <= arm < belief.alpha.shape[0]:
        raise IndexError(f"arm {arm} out of range for {belief.alpha.shape[0]} arms")
    if reward not in (0, 1):
        raise ValueError("reward must be 0 or 1")
    alpha, beta = belief.alpha.copy(), belief.beta.copy()
    if reward == 1:
        alpha[arm] += 1
    else:
        beta[arm] += 1
    return BetaBelief(alpha, beta)


def beta_posterior(spec: EnvSpec, history: History) -> BetaBelief:
    """Beta posterior from success/failure counts of ``history``."""
    history.check_arms(spec.num_arms)
    ones = np.bincount(history.arms, weights=history.rewards, minlength=spec.num_arms)
    pulls = np.bincount(history.arms, minlength=spec.num_arms)
    return BetaBelief(spec.alpha + ones, spec.beta + (pulls - ones))


def target_joint_covariance(spec: EnvSpec) -> np.ndarray:
    """Covariance of the stacked vector (target, imaginary means).

    The target is the imaginary mean vector minus independent
    N(0, delta_sq * Sigma0) noise, so every block but the bottom-right one is
    ``(1 - delta_sq) * Sigma0``.
    """
    shrunk = (1.0 - spec.delta_sq) * spec.sigma0
    return np.block([[shrunk, shrunk], [shrunk, spec.sigma0]])


def target_conditional_covs(spec: EnvSpec, counts: np.ndarray, delta_sq: float | None = None):
    """Posterior covariances of the imaginary means, without and with the target known.

    Conditions the stacked Gaussian of :func:`target_joint_covariance` on
    observations with pull counts ``counts`` (shape (..., A)). Returns
    ``(cov, cov_given_target)``, each of shape (..., A, A).
    """
    if delta_sq is not None:
        spec = spec.replace(delta_sq=delta_sq)
    n = spec.num_arms
    counts = np.asarray(counts, dtype=float)
    joint_precision = spd_inverse(target_joint_covariance(spec))
    obs = np.zeros(counts.shape[:-1] + (2 * n, 2 * n))
    obs[..., n:, n:] = counts[..., :, None] * np.eye(n) / spec.noise_var
    joint = np.linalg.inv(joint_precision + obs)
    joint = 0.5 * (joint + np.swapaxes(joint, -1, -2))
    s11, s12 = joint[..., :n, :n], joint[..., :n, n:]
    s21, s22 = joint[..., n:, :n], joint[..., n:, n:]
    given = s22 - s21 @ np.linalg.solve(s11, s12)
    return s22, 0.5 * (given + np.swapaxes(given, -1, -2))
