"""Entropies, divergences and mutual informations (all in nats)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, digamma

LN_2PIE = math.log(2.0 * math.pi * math.e)


class UnsupportedPriorError(ValueError):
    """The requested quantity needs a product (diagonal) imaginary prior."""


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Finite distribution: distinct real ``support`` atoms with ``probs``."""

    support: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        support = tuple(float(x) for x in self.support)
        probs = tuple(float(p) for p in self.probs)
        if len(support) != len(probs):
            raise ValueError("support and probs must have the same length")
        if len(set(support)) != len(support):
            raise ValueError("support values must be distinct")
        if any(p < 0 for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("probs must be non-negative and sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def bernoulli(cls, p: float) -> "DiscreteDist":
        return cls((0.0, 1.0), (1.0 - p, p))

    @classmethod
    def point(cls, x: float) -> "DiscreteDist":
        return cls((x,), (1.0,))

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.support, self.probs))

    def mean(self) -> float:
        return math.fsum(x * p for x, p in zip(self.support, self.probs))


def gaussian_entropy(cov) -> float:
    """Differential entropy ``0.5 ln|cov| + (n/2) ln(2 pi e)`` of N(., cov)."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance must be positive definite") from None
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return 0.5 * logdet + 0.5 * cov.shape[0] * LN_2PIE


def target_mutual_information(num_arms: int, delta_sq: float) -> float:
    """Information ``(A/2) ln(1/delta_sq)`` the imaginary environment holds about the target."""
    if not 0.0 < delta_sq < 1.0:
        raise ValueError("delta_sq must lie strictly inside (0, 1)")
    return 0.5 * num_arms * math.log(1.0 / delta_sq)


def kl_gaussian(mu1, cov1, mu2, cov2) -> float:
    """KL divergence between N(mu1, cov1) and N(mu2, cov2)."""
    mu1, mu2 = np.atleast_1d(np.asarray(mu1, float)), np.atleast_1d(np.asarray(mu2, float))
    cov1, cov2 = np.atleast_2d(np.asarray(cov1, float)), np.atleast_2d(np.asarray(cov2, float))
    n = mu1.shape[0]
    if mu2.shape != (n,) or cov1.shape != (n, n) or cov2.shape != (n, n):
        raise ValueError("dimension mismatch")
    try:
        l1 = np.linalg.cholesky(cov1)
        l2 = np.linalg.cholesky(cov2)
    except np.linalg.LinAlgError:
        raise ValueError("covariances must be positive definite") from None
    inv2 = np.linalg.inv(cov2)
    diff = mu2 - mu1
    logdet_ratio = 2.0 * (np.sum(np.log(np.diag(l2))) - np.sum(np.log(np.diag(l1))))
    return 0.5 * (np.trace(inv2 @ cov1) + diff @ inv2 @ diff - n + logdet_ratio)


def beta_entropy(alpha: float, beta: float) -> float:
    return (
        betaln(alpha, beta)
        - (alpha - 1.0) * digamma(alpha)
        - (beta - 1.0) * digamma(beta)
        + (alpha + beta - 2.0) * digamma(alpha + beta)
    )


def kl_beta_gaussian(alpha: float, beta: float, mu: float, var: float) -> float:
    """KL divergence from Beta(alpha, beta) to N(mu, var), in closed form.

    Equals ``-H(Beta) + 0.5 ln(2 pi var) + E[(X - mu)^2] / (2 var)`` with the
    second moment taken from the Beta distribution.
    """
    if alpha <= 0 or beta <= 0 or var <= 0:
        raise ValueError("alpha, beta and var must be positive")
    total = alpha + beta
    mean = alpha / total
    variance = alpha * beta / (total * total * (total + 1.0))
    second = variance + (mean - mu) ** 2
    return -beta_entropy(alpha, beta) + 0.5 * math.log(2.0 * math.pi * var) + second / (2.0 * var)


def kl_beta_product_gaussian(alpha, beta, mu0, sigma0) -> float:
    """KL from independent Beta arms to N(mu0, sigma0); ``sigma0`` must be diagonal."""
    sigma0 = np.asarray(sigma0, dtype=float)
    if np.any(sigma0 != np.diag(np.diag(sigma0))):
        raise UnsupportedPriorError("KL to a correlated Gaussian prior is not supported")
    return math.fsum(
        kl_beta_gaussian(a, b, m, v) for a, b, m, v in zip(alpha, beta, mu0, np.diag(sigma0))
    )


def _aligned(p: DiscreteDist, q: DiscreteDist):
    pd, qd = p.as_dict(), q.as_dict()
    atoms = sorted(set(pd) | set(qd))
    return [pd.get(x, 0.0) for x in atoms], [qd.get(x, 0.0) for x in atoms]


def tv_distance(p: DiscreteDist, q: DiscreteDist) -> float:
    """Total variation ``0.5 * sum |p - q|`` over the merged support."""
    pp, qq = _aligned(p, q)
    return 0.5 * math.fsum(abs(a - b) for a, b in zip(pp, qq))


def kl_discrete(p: DiscreteDist, q: DiscreteDist) -> float:
    """KL divergence ``sum p ln(p/q)``; ``math.inf`` when p is not dominated by q."""
    total = []
    for a, b in zip(*_aligned(p, q)):
        if a == 0.0:
            continue
        if b == 0.0:
            return math.inf
        total.append(a * math.log(a / b))
    return max(math.fsum(total), 0.0)
