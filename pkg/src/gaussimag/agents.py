"""Gaussian Thompson sampling, Gaussian IDS and a uniform baseline.

All agents act on a :class:`~gaussimag.belief.GaussianBelief`, i.e. they
treat the (binary) history as if it came from the imaginary Gaussian bandit.
The batched helpers (``*_batch``) are what the simulation harness uses; the
single-belief functions wrap them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from numba import njit
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .belief import GaussianBelief, target_conditional_covs
from .envs import EnvSpec, argmax_random_tiebreak

AGENTS = ("gaussian-ts", "gaussian-ids", "uniform")

QMC_POINTS = 2**14
ORACLE_SAMPLES = 10**7
MIN_GAIN = 1e-15

# Breakpoints (in standard deviations) splitting the integration range so
# that each panel lies inside one smooth region of every arm's cdf.
_BREAKS = np.array([-7.0, -3.5, -1.5, 0.0, 1.5, 3.5, 7.0])
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class ActionDist:
    """A probability vector over arms."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or np.any(probs < -1e-15) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("action distribution must lie on the simplex")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def support_size(self) -> int:
        return int(np.sum(self.probs > 1e-12))


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    """Per-step quantities behind an agent's choice.

    ``expected_regret_per_arm[a]`` is ``E[max theta] - mean[a]`` under the
    belief and ``info_gain_per_arm[a]`` the information one pull of ``a``
    carries about the imaginary means. ``ratio_value`` is the squared
    expected regret of ``chosen_dist`` over its expected information gain.
    """

    expected_regret_per_arm: np.ndarray
    info_gain_per_arm: np.ndarray
    chosen_dist: ActionDist
    ratio_value: float
    degenerate: bool = False


# --------------------------------------------------------------------------
# E[max] of a Gaussian vector and the distribution of its argmax
# --------------------------------------------------------------------------


def _clark(means, c11, c22, c12):
    """Exact E[max] and P(argmax = 0) for bivariate Gaussians."""
    spread = np.sqrt(np.maximum(c11 + c22 - 2.0 * c12, 0.0))
    diff = means[:, 0] - means[:, 1]
    tiny = spread <= 1e-300
    safe = np.where(tiny, 1.0, spread)
    z = diff / safe
    pdf = np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
    emax = means[:, 0] * ndtr(z) + means[:, 1] * ndtr(-z) + spread * pdf
    p0 = ndtr(z)
    emax = np.where(tiny, np.maximum(means[:, 0], means[:, 1]), emax)
    p0 = np.where(tiny, np.where(diff > 0, 1.0, np.where(diff < 0, 0.0, 0.5)), p0)
    return emax, np.stack([p0, 1.0 - p0], axis=1)


@njit(cache=True)
def _diag_kernel(means, sds, breaks, nodes, weights, emax, probs):
    batch, n = means.shape
    nk = breaks.size
    bp = np.empty(n * nk)
    cdf = np.empty(n)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    inv_sqrt_2pi = 1.0 / math.sqrt(2.0 * math.pi)
    for i in range(batch):
        lo = -np.inf
        hi = -np.inf
        for a in range(n):
            lo = max(lo, means[i, a] + breaks[0] * sds[i, a])
            hi = max(hi, means[i, a] + breaks[nk - 1] * sds[i, a])
            for k in range(nk):
                bp[a * nk + k] = means[i, a] + sds[i, a] * breaks[k]
            probs[i, a] = 0.0
        bp.sort()
        acc = 0.0
        for p in range(n * nk - 1):
            # below lo the max cdf is negligible, above hi its complement is
            left = max(bp[p], lo)
            right = min(bp[p + 1], hi)
            if right <= left:
                continue
            half = 0.5 * (right - left)
            mid = left + half
            for q in range(nodes.size):
                x = mid + half * nodes[q]
                wq = half * weights[q]
                total = 1.0
                for a in range(n):
                    c = 0.5 * math.erfc(-(x - means[i, a]) / sds[i, a] * inv_sqrt2)
                    cdf[a] = c
                    total *= c
                acc += wq * (1.0 - total)
                if total <= 0.0:
                    continue
                for a in range(n):
                    z = (x - means[i, a]) / sds[i, a]
                    probs[i, a] += wq * inv_sqrt_2pi * math.exp(-0.5 * z * z) / sds[i, a] * total / cdf[a]
        emax[i] = lo + acc
        norm = 0.0
        for a in range(n):
            norm += probs[i, a]
        for a in range(n):
            probs[i, a] /= norm


def _diag_quadrature(means, sds):
    """E[max] and argmax probabilities for independent Gaussians.

    Uses ``E[max] = lo + int_lo^hi (1 - prod_a Phi((x - m_a)/s_a)) dx`` and
    ``P(argmax = a) = int phi_a(x) prod_{b != a} Phi_b(x) dx`` with
    composite Gauss-Legendre rules on panels between per-arm breakpoints.
    Absolute error is around 1e-8 in units of the largest sd.
    """
    means = np.ascontiguousarray(means, dtype=float)
    sds = np.ascontiguousarray(sds, dtype=float)
    emax = np.empty(means.shape[0])
    probs = np.empty_like(means)
    _diag_kernel(means, sds, _BREAKS, _GL_NODES, _GL_WEIGHTS, emax, probs)
    return np.maximum(emax, means.max(axis=1)), probs


@lru_cache(maxsize=None)
def _qmc_normals(dim: int, n: int = QMC_POINTS) -> np.ndarray:
    points = qmc.Sobol(d=dim, scramble=True, seed=20240531).random(n)
    z = ndtri(np.clip(points, 1e-16, 1 - 1e-16))
    z.setflags(write=False)
    return z


def _qmc(means, covs):
    z = _qmc_normals(means.shape[1])
    emax = np.empty(means.shape[0])
    probs = np.empty_like(means)
    for i, (m, c) in enumerate(zip(means, covs)):
        samples = m + z @ np.linalg.cholesky(c).T
        emax[i] = samples.max(axis=1).mean()
        probs[i] = np.bincount(samples.argmax(axis=1), minlength=means.shape[1]) / z.shape[0]
    return np.maximum(emax, means.max(axis=1)), probs


def max_stats_batch(means, covs=None, variances=None):
    """E[max_a X_a] and P(argmax = a) for a stack of Gaussian vectors X.

    Pass either full covariances ``covs`` (B, A, A) or, for independent
    coordinates, ``variances`` (B, A). Two arms are handled in closed form,
    independent arms by quadrature, and correlated arms by quasi-Monte Carlo
    with a fixed point set, so results are deterministic.
    """
    means = np.asarray(means, dtype=float)
    batch, n = means.shape
    if n == 1:
        return means[:, 0].copy(), np.ones((batch, 1))
    if variances is None:
        covs = np.asarray(covs, dtype=float)
        if n == 2:
            return _clark(means, covs[:, 0, 0], covs[:, 1, 1], covs[:, 0, 1])
        off = covs - np.einsum("bii->bi", covs)[:, :, None] * np.eye(n)
        if np.any(off != 0.0):
            return _qmc(means, covs)
        variances = np.einsum("bii->bi", covs)
    variances = np.asarray(variances, dtype=float)
    if n == 2:
        return _clark(means, variances[:, 0], variances[:, 1], np.zeros(batch))
    return _diag_quadrature(means, np.sqrt(variances))


def _monte_carlo_max(mean, cov, n_samples, seed):
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(cov)
    total = 0.0
    counts = np.zeros(mean.shape[0])
    chunk = 10**6
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        samples = mean + rng.standard_normal((k, mean.shape[0])) @ chol.T
        total += samples.max(axis=1).sum()
        counts += np.bincount(samples.argmax(axis=1), minlength=mean.shape[0])
        done += k
    return total / n_samples, counts / n_samples


def max_stats(mean, cov, quality: str = "fast", seed: int = 0):
    """Single-belief version of :func:`max_stats_batch`.

    ``quality="oracle"`` switches to plain Monte Carlo with 10^7 samples;
    it is meant for checking the fast path, not for simulation loops.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if quality == "oracle":
        return _monte_carlo_max(mean, cov, ORACLE_SAMPLES, seed)
    if quality != "fast":
        raise ValueError(f"unknown quality {quality!r}")
    emax, probs = max_stats_batch(mean[None], covs=cov[None])
    return float(emax[0]), probs[0]


def expected_max_gaussian(mean, cov, quality: str = "fast") -> float:
    """E[max_a X_a] for X ~ N(mean, cov)."""
    return float(max_stats(mean, cov, quality)[0])


# --------------------------------------------------------------------------
# Information gains
# --------------------------------------------------------------------------


def info_gain_per_arm(belief: GaussianBelief) -> np.ndarray:
    """Mutual information between the imaginary means and one pull of each arm."""
    return 0.5 * np.log1p(np.diag(belief.cov) / belief.noise_var)


def target_info_gain_per_arm(spec: EnvSpec, counts, delta_sq: float | None = None) -> np.ndarray:
    """Information one pull of each arm carries about the perturbed target.

    ``0.5 ln((v_a + s2) / (w_a + s2))`` where ``v_a`` is the posterior
    variance of arm ``a`` and ``w_a`` the same variance when the target is
    known. ``counts`` may carry leading batch axes.
    """
    d2 = spec.delta_sq if delta_sq is None else delta_sq
    counts = np.asarray(counts, dtype=float)
    s2 = spec.noise_var
    if spec.sigma0_is_diagonal:
        prior = np.diag(spec.sigma0)
        var = 1.0 / (1.0 / prior + counts / s2)
        var_given = 1.0 / (1.0 / (d2 * prior) + counts / s2)
    else:
        cov, cov_given = target_conditional_covs(spec, counts, d2)
        var = np.einsum("...ii->...i", cov)
        var_given = np.einsum("...ii->...i", cov_given)
    return 0.5 * np.log((var + s2) / (var_given + s2))


# --------------------------------------------------------------------------
# Information-directed sampling
# --------------------------------------------------------------------------


def _ratio(num_root, gain):
    with np.errstate(divide="ignore", invalid="ignore"):
        value = num_root * num_root / gain
    value = np.where(num_root <= 0.0, 0.0, value)
    return np.where((gain <= 0.0) & (num_root > 0.0), np.inf, value)


def information_ratio(dist, regrets, gains):
    """``(dist . regrets)^2 / (dist . gains)``, zero when the regret is zero."""
    dist = np.asarray(dist, float)
    return _ratio(np.sum(dist * np.clip(regrets, 0.0, None), -1), np.sum(dist * gains, -1))


@lru_cache(maxsize=None)
def _pairs(n: int):
    idx = np.array(list(combinations(range(n), 2)), dtype=int).reshape(-1, 2)
    return idx[:, 0], idx[:, 1]


def ids_distribution_batch(regrets, gains):
    """Minimise ``(pi . regrets)^2 / (pi . gains)`` over the simplex.

    The ratio is convex along the segment between two vertices, and the
    optimum over the simplex sits on such a segment, so every arm pair is
    solved in closed form and the best pair is kept. Rows whose gains are
    all below ``MIN_GAIN`` put all mass on the arm with the largest mean,
    i.e. the smallest regret, and are flagged.

    Returns ``(probs, ratio, degenerate)``.
    """
    regrets = np.clip(np.asarray(regrets, dtype=float), 0.0, None)
    gains = np.asarray(gains, dtype=float)
    batch, n = regrets.shape
    degenerate = np.all(gains <= MIN_GAIN, axis=1)
    fallback = np.zeros((batch, n))
    fallback[np.arange(batch), np.argmin(regrets, axis=1)] = 1.0
    if n == 1:
        return np.ones((batch, 1)), np.zeros(batch), degenerate
    first, second = _pairs(n)
    di, dj = regrets[:, first], regrets[:, second]
    gi, gj = gains[:, first], gains[:, second]
    d_reg, d_gain = di - dj, gi - gj
    with np.errstate(divide="ignore", invalid="ignore"):
        stationary = dj / d_reg - 2.0 * gj / d_gain
    stationary = np.where(np.isfinite(stationary), np.clip(stationary, 0.0, 1.0), 0.0)
    flat = (np.abs(d_reg) <= 1e-12 * np.maximum(np.abs(di), 1e-300)) & (
        np.abs(d_gain) <= 1e-12 * np.maximum(np.abs(gi), 1e-300)
    )
    candidates = np.stack([np.zeros_like(di), np.ones_like(di), stationary], axis=-1)
    values = _ratio(dj[..., None] + candidates * d_reg[..., None], gj[..., None] + candidates * d_gain[..., None])
    pick = np.argmin(values, axis=-1)
    q = np.take_along_axis(candidates, pick[..., None], -1)[..., 0]
    best = np.take_along_axis(values, pick[..., None], -1)[..., 0]
    q = np.where(flat, 0.5, q)
    pair = np.argmin(best, axis=1)
    rows = np.arange(batch)
    probs = np.zeros((batch, n))
    probs[rows, first[pair]] += q[rows, pair]
    probs[rows, second[pair]] += 1.0 - q[rows, pair]
    ratio = best[rows, pair]
    probs = np.where(degenerate[:, None], fallback, probs)
    ratio = np.where(degenerate, 0.0, ratio)
    return probs, ratio, degenerate


def sample_from_dist(probs, u):
    """Inverse-cdf draw of one arm per row of ``probs`` using uniforms ``u``."""
    cdf = np.cumsum(probs, axis=-1)
    arms = (np.asarray(u)[..., None] >= cdf).sum(axis=-1)
    return np.minimum(arms, probs.shape[-1] - 1)


# --------------------------------------------------------------------------
# Single-belief agent API
# --------------------------------------------------------------------------


def _diagnostics(belief, dist, emax, degenerate=False):
    regrets = emax - belief.mean
    gains = info_gain_per_arm(belief)
    return StepDiagnostics(
        expected_regret_per_arm=regrets,
        info_gain_per_arm=gains,
        chosen_dist=ActionDist(dist),
        ratio_value=float(information_ratio(dist, regrets, gains)),
        degenerate=bool(degenerate),
    )


def ts_action(belief: GaussianBelief, rng: np.random.Generator):
    """Thompson sampling: play the argmax of one draw from the belief."""
    chol = np.linalg.cholesky(belief.cov)
    draw = belief.mean + chol @ rng.standard_normal(belief.num_arms)
    arm = int(argmax_random_tiebreak(draw, rng.random()))
    emax, probs = max_stats(belief.mean, belief.cov)
    return arm, _diagnostics(belief, probs, emax)


def ids_action(belief: GaussianBelief, rng: np.random.Generator):
    """Information-directed sampling with the imaginary means as learning target."""
    emax, _ = max_stats(belief.mean, belief.cov)
    regrets = emax - belief.mean
    probs, _, degenerate = ids_distribution_batch(regrets[None], info_gain_per_arm(belief)[None])
    arm = int(sample_from_dist(probs[0], rng.random()))
    return arm, _diagnostics(belief, probs[0], emax, degenerate[0])


def uniform_action(num_arms: int, rng: np.random.Generator) -> int:
    return int(rng.integers(num_arms))
