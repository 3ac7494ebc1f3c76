"""Monte Carlo engine: regret traces, information-ratio estimates, optimism checks.

Each replication owns one random stream (see
:func:`~gaussimag.envs.replication_rng`) from which its whole randomness is
drawn up front: the real environment, one standard-normal vector per step
for Thompson draws, and one uniform per step each for the reward and the
action. Replications are then advanced together as a batch, so results do
not depend on how replications are chunked or scheduled.
"""

from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import (
    AGENTS,
    ids_distribution_batch,
    max_stats,
    max_stats_batch,
    sample_from_dist,
    target_info_gain_per_arm,
)
from .belief import (
    RESYNC_EVERY,
    batch_posterior,
    beta_posterior,
    posterior_cov_from_counts,
    update_diagonal_batch,
    update_gaussian_batch,
)
from .bounds import bound_curves, check_optimism_conditions, epsilon_for_delta, ir_cap
from .envs import EnvSpec, History, argmax_random_tiebreak, replication_rng, sample_real_env
from .infotheory import target_mutual_information

CSV_HEADER = "t,mean_regret,se_regret,mean_imag_regret,mean_info_gain,bound_gauss,bound_total"
TARGETS = ("theta-tilde", "theta-hat")
MIN_DENOMINATOR = 1e-12
CHUNK = 1000


class OptimismPreconditionError(RuntimeError):
    """The sufficient conditions for optimism do not hold for the spec."""


@dataclass(frozen=True)
class RunConfig:
    """One Monte Carlo experiment.

    ``realized=True`` accumulates ``R* - R_{t+1}`` with the sampled binary
    reward instead of the pseudo-regret ``R* - theta[A_t]``.
    """

    spec: EnvSpec
    agent: str = "gaussian-ts"
    replications: int = 1000
    master_seed: int | None = None
    record_diagnostics: bool = False
    output_path: str | None = None
    realized: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.agent not in AGENTS:
            raise ValueError(f"unknown agent {self.agent!r}; expected one of {AGENTS}")
        if int(self.replications) < 1:
            raise ValueError("replications must be at least 1")
        if self.master_seed is None:
            object.__setattr__(self, "master_seed", self.spec.seed)

    def echo(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "agent": self.agent,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "realized": self.realized,
        }


@dataclass
class RegretTrace:
    """Per-step aggregates over replications; entry ``k`` refers to ``t = k + 1``.

    ``mean_info_gain`` is the per-step (not cumulative) information gain of
    the played arm about the imaginary means.
    """

    mean_cum_regret: np.ndarray
    se_cum_regret: np.ndarray
    mean_cum_imaginary_regret: np.ndarray
    se_cum_imaginary_regret: np.ndarray
    mean_info_gain: np.ndarray
    bound_gaussian_curve: np.ndarray
    bound_total_curve: np.ndarray
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    per_replication: dict | None = None

    @property
    def horizon(self) -> int:
        return self.mean_cum_regret.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(CSV_HEADER + "\n")
        columns = [
            self.mean_cum_regret,
            self.se_cum_regret,
            self.mean_cum_imaginary_regret,
            self.mean_info_gain,
            self.bound_gaussian_curve,
            self.bound_total_curve,
        ]
        for k in range(self.horizon):
            buf.write(",".join([str(k + 1)] + [repr(float(col[k])) for col in columns]) + "\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        def clean(arr):
            return [None if not math.isfinite(x) else float(x) for x in arr]

        return {
            "config": self.config,
            "t": list(range(1, self.horizon + 1)),
            "mean_regret": clean(self.mean_cum_regret),
            "se_regret": clean(self.se_cum_regret),
            "mean_imag_regret": clean(self.mean_cum_imaginary_regret),
            "se_imag_regret": clean(self.se_cum_imaginary_regret),
            "mean_info_gain": clean(self.mean_info_gain),
            "bound_gauss": clean(self.bound_gaussian_curve),
            "bound_total": clean(self.bound_total_curve),
        }


@dataclass
class IREstimate:
    """Empirical information ratio along simulated real histories.

    ``numerator[k]`` and ``denominator[k]`` are averages over replications at
    step ``t = k``; ``ratio_sup_estimate`` is the largest per-cell ratio, a
    lower estimate of the true supremum over histories.
    """

    target: str
    delta_sq: float | None
    epsilon: float
    numerator: np.ndarray
    denominator: np.ndarray
    ratio_sup_estimate: float
    cap: float
    argmax_cell: tuple | None
    degenerate: bool = False

    @property
    def within_cap(self) -> bool:
        return self.ratio_sup_estimate <= self.cap

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "delta_sq": self.delta_sq,
            "epsilon": self.epsilon,
            "ratio_sup_estimate": self.ratio_sup_estimate,
            "cap": self.cap,
            "within_cap": self.within_cap,
            "argmax_cell": None if self.argmax_cell is None else list(self.argmax_cell),
            "degenerate": self.degenerate,
            "numerator": self.numerator.tolist(),
            "denominator": self.denominator.tolist(),
        }


# --------------------------------------------------------------------------
# Batched simulation core
# --------------------------------------------------------------------------


def _draw_streams(spec: EnvSpec, master_seed: int, reps):
    """Pre-draw every replication's randomness in a fixed order."""
    T, n = spec.horizon, spec.num_arms
    theta = np.empty((len(reps), n))
    z = np.empty((len(reps), T, n))
    u_reward = np.empty((len(reps), T))
    u_action = np.empty((len(reps), T))
    for i, rep in enumerate(reps):
        rng = replication_rng(master_seed, rep)
        theta[i] = sample_real_env(spec, rng).theta
        z[i] = rng.standard_normal((T, n))
        u_reward[i] = rng.random(T)
        u_action[i] = rng.random(T)
    return theta, z, u_reward, u_action


def simulate_replications(spec, agent, reps, master_seed, realized=False, ir_target=None, ir_delta_sq=None):
    """Run replications ``reps`` in lockstep and return per-replication arrays.

    Returns a dict of (R, T) arrays: ``regret`` (per step), ``imag_regret``,
    ``info_gain`` and ``arms``/``rewards``; plus ``ir_num``/``ir_den`` when
    ``ir_target`` is given.
    """
    reps = list(reps)
    T, n, s2 = spec.horizon, spec.num_arms, spec.noise_var
    B = len(reps)
    theta, z, u_reward, u_action = _draw_streams(spec, master_seed, reps)
    optimal = theta.max(axis=1)
    diagonal = spec.sigma0_is_diagonal
    means = np.tile(spec.mu0, (B, 1))
    if diagonal:
        variances = np.tile(np.diag(spec.sigma0), (B, 1))
    else:
        covs = np.tile(spec.sigma0, (B, 1, 1))
    counts = np.zeros((B, n))
    out = {key: np.zeros((B, T)) for key in ("regret", "imag_regret", "info_gain", "rewards")}
    out["arms"] = np.zeros((B, T), dtype=np.int64)
    if ir_target is not None:
        out["ir_num"] = np.zeros((B, T))
        out["ir_den"] = np.zeros((B, T))
        if ir_target == "theta-hat":
            eps = epsilon_for_delta(math.sqrt(ir_delta_sq), n, spec.sigma0)
        else:
            eps = 0.0
    rows = np.arange(B)
    for t in range(T):
        var = variances if diagonal else np.einsum("bii->bi", covs)
        gains = 0.5 * np.log1p(var / s2)
        if diagonal:
            emax, argmax_probs = max_stats_batch(means, variances=variances)
        else:
            emax, argmax_probs = max_stats_batch(means, covs=covs)
        policy = None
        if agent == "gaussian-ts":
            if diagonal:
                draws = means + np.sqrt(variances) * z[:, t]
            else:
                draws = means + np.einsum("bij,bj->bi", np.linalg.cholesky(covs), z[:, t])
            arms = argmax_random_tiebreak(draws, u_action[:, t])
            policy = argmax_probs
        elif agent == "gaussian-ids":
            policy, _, _ = ids_distribution_batch(emax[:, None] - means, gains)
            arms = sample_from_dist(policy, u_action[:, t])
        else:
            arms = np.minimum((u_action[:, t] * n).astype(np.int64), n - 1)

        if ir_target is not None and policy is not None:
            if ir_target == "theta-hat":
                target_gains = target_info_gain_per_arm(spec, counts, ir_delta_sq)
            else:
                target_gains = gains
            gap = emax - np.sum(policy * means, axis=1) - eps
            out["ir_num"][:, t] = np.maximum(gap, 0.0) ** 2
            out["ir_den"][:, t] = np.sum(policy * target_gains, axis=1)

        rewards = (u_reward[:, t] < theta[rows, arms]).astype(float)
        chosen_mean = theta[rows, arms]
        out["regret"][:, t] = optimal - (rewards if realized else chosen_mean)
        out["imag_regret"][:, t] = emax - means[rows, arms]
        out["info_gain"][:, t] = gains[rows, arms]
        out["arms"][:, t] = arms
        out["rewards"][:, t] = rewards
        counts[rows, arms] += 1.0
        if diagonal:
            means, variances = update_diagonal_batch(means, variances, arms, rewards, s2)
        else:
            means, covs = update_gaussian_batch(means, covs, arms, rewards, s2)
            if (t + 1) % RESYNC_EVERY == 0:
                covs = posterior_cov_from_counts(spec, counts)
    return out


def _chunk_job(args):
    return simulate_replications(*args)


def _run_chunks(config: RunConfig, **kwargs):
    reps = range(config.replications)
    chunks = [list(reps[i : i + CHUNK]) for i in range(0, config.replications, CHUNK)]
    jobs = [
        (config.spec, config.agent, chunk, config.master_seed, config.realized,
         kwargs.get("ir_target"), kwargs.get("ir_delta_sq"))
        for chunk in chunks
    ]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_chunk_job, jobs))
    else:
        parts = [_chunk_job(job) for job in jobs]
    # concatenation in replication order keeps the reduction deterministic
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def _mean_se(x: np.ndarray):
    m = x.shape[0]
    mean = x.mean(axis=0)
    if m < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, x.std(axis=0, ddof=1) / math.sqrt(m)


def run_experiment(config: RunConfig) -> RegretTrace:
    """Simulate ``config`` and aggregate regret, imaginary regret and information."""
    start = time.perf_counter()
    spec = config.spec
    T = spec.horizon
    if T == 0:
        empty = np.zeros(0)
        trace = RegretTrace(*(empty.copy() for _ in range(7)), config=config.echo())
    else:
        runs = _run_chunks(config)
        cum_regret = np.cumsum(runs["regret"], axis=1)
        cum_imag = np.cumsum(runs["imag_regret"], axis=1)
        mean_regret, se_regret = _mean_se(cum_regret)
        mean_imag, se_imag = _mean_se(cum_imag)
        gauss, total = bound_curves(spec, np.arange(1, T + 1))
        trace = RegretTrace(
            mean_cum_regret=mean_regret,
            se_cum_regret=se_regret,
            mean_cum_imaginary_regret=mean_imag,
            se_cum_imaginary_regret=se_imag,
            mean_info_gain=runs["info_gain"].mean(axis=0),
            bound_gaussian_curve=gauss,
            bound_total_curve=total,
            config=config.echo(),
            per_replication=runs if config.record_diagnostics else None,
        )
    trace.wall_time = time.perf_counter() - start
    if config.output_path is not None:
        write_trace(trace, config.output_path)
    return trace


def write_trace(trace: RegretTrace, path, fmt: str = "csv") -> None:
    text = trace.to_csv() if fmt == "csv" else json.dumps(trace.to_dict(), indent=2) + "\n"
    with open(Path(path), "w", newline="") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# Information ratio, imaginary regret, optimism
# --------------------------------------------------------------------------


def estimate_information_ratio(config: RunConfig, target: str = "theta-hat", delta_sq: float | None = None) -> IREstimate:
    """Empirical information ratio of the agent with respect to ``target``.

    For ``theta-hat`` the tolerance is ``epsilon_for_delta(sqrt(delta_sq))``
    and ``delta_sq`` defaults to the spec's; for ``theta-tilde`` it is zero.
    Cells whose denominator is below ``MIN_DENOMINATOR`` are skipped.
    """
    if config.agent not in ("gaussian-ts", "gaussian-ids"):
        raise ValueError("information ratios are defined for gaussian-ts and gaussian-ids only")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    spec = config.spec
    d2 = spec.delta_sq if delta_sq is None else float(delta_sq)
    eps = epsilon_for_delta(math.sqrt(d2), spec.num_arms, spec.sigma0) if target == "theta-hat" else 0.0
    cap = ir_cap(spec.num_arms, spec.noise_var)
    if spec.horizon == 0:
        return IREstimate(target, d2, eps, np.zeros(0), np.zeros(0), 0.0, cap, None, True)
    runs = _run_chunks(config, ir_target=target, ir_delta_sq=d2)
    num, den = runs["ir_num"], runs["ir_den"]
    valid = den >= MIN_DENOMINATOR
    ratios = np.where(valid, num / np.where(valid, den, 1.0), -np.inf)
    if not np.any(valid):
        sup, cell, degenerate = 0.0, None, True
    else:
        flat = int(np.argmax(ratios))
        rep, t = np.unravel_index(flat, ratios.shape)
        sup, cell, degenerate = float(max(ratios[rep, t], 0.0)), (int(t), int(rep)), False
    return IREstimate(
        target=target,
        delta_sq=d2 if target == "theta-hat" else None,
        epsilon=eps,
        numerator=num.mean(axis=0),
        denominator=den.mean(axis=0),
        ratio_sup_estimate=sup,
        cap=cap,
        argmax_cell=cell,
        degenerate=degenerate,
    )


@dataclass
class ImaginaryRegretReport:
    """Mean cumulative imaginary regret against its information-theoretic bound."""

    mean: np.ndarray
    se: np.ndarray
    bound: np.ndarray
    delta_sq: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "delta_sq": self.delta_sq,
            "holds": self.holds,
            "mean": self.mean.tolist(),
            "se": self.se.tolist(),
            "bound": self.bound.tolist(),
        }


def imaginary_regret_bound(spec: EnvSpec, horizons, delta_sq: float) -> np.ndarray:
    """``sqrt(MI * 2 A s2 * t) + epsilon * t`` for a fixed target perturbation ``delta_sq``."""
    t = np.asarray(horizons, dtype=float)
    mi = target_mutual_information(spec.num_arms, delta_sq)
    eps = epsilon_for_delta(math.sqrt(delta_sq), spec.num_arms, spec.sigma0)
    return np.sqrt(mi * ir_cap(spec.num_arms, spec.noise_var) * t) + eps * t


def estimate_imaginary_regret(config: RunConfig, delta_sq: float | None = None) -> ImaginaryRegretReport:
    """Compare the cumulative imaginary regret with its bound at every ``t``.

    ``delta_sq`` defaults to the tuning ``A / T`` when ``T > A`` (otherwise
    the spec's value). The check is ``mean + 3 se <= bound`` at every step.
    """
    if config.agent not in ("gaussian-ts", "gaussian-ids"):
        raise ValueError("the imaginary-regret bound applies to gaussian-ts and gaussian-ids only")
    spec = config.spec
    T, n = spec.horizon, spec.num_arms
    if delta_sq is None:
        delta_sq = n / T if T > n else spec.delta_sq
    trace = run_experiment(RunConfig(spec, config.agent, config.replications, config.master_seed, workers=config.workers))
    bound = imaginary_regret_bound(spec, np.arange(1, T + 1), delta_sq)
    se = np.nan_to_num(trace.se_cum_imaginary_regret)
    holds = bool(np.all(trace.mean_cum_imaginary_regret + 3.0 * se <= bound))
    return ImaginaryRegretReport(trace.mean_cum_imaginary_regret, trace.se_cum_imaginary_regret, bound, delta_sq, holds)


@dataclass
class OptimismReport:
    """Imagined minus real expected optimal reward at sampled histories."""

    margins: np.ndarray
    standard_errors: np.ndarray
    times: np.ndarray
    min_margin: float
    flagged: int

    @property
    def passed(self) -> bool:
        return self.flagged == 0

    def to_dict(self) -> dict:
        worst = int(np.argmin(self.margins)) if self.margins.size else None
        return {
            "num_histories": int(self.margins.size),
            "min_margin": self.min_margin,
            "worst_se": None if worst is None else float(self.standard_errors[worst]),
            "worst_t": None if worst is None else int(self.times[worst]),
            "flagged": self.flagged,
            "passed": self.passed,
        }


def validate_optimism(
    config: RunConfig,
    num_history_samples: int = 200,
    max_t: int = 50,
    n_beta_draws: int = 10**5,
) -> OptimismReport:
    """Check ``E[imagined max | h] >= E[real max | h]`` on histories sampled by TS.

    One history per replication is taken at a uniformly chosen ``t`` in
    ``[0, max_t]``. The imagined side is evaluated by quadrature, the real
    side by Monte Carlo over the Beta posterior. A sample is flagged when the
    margin falls below ``-3`` standard errors.
    """
    spec = config.spec
    passes, violations = check_optimism_conditions(spec)
    if not passes:
        raise OptimismPreconditionError("optimism conditions fail: " + "; ".join(violations))
    sim_spec = spec.replace(horizon=max_t)
    runs = simulate_replications(sim_spec, "gaussian-ts", range(num_history_samples), config.master_seed)
    margins = np.empty(num_history_samples)
    ses = np.empty(num_history_samples)
    times = np.empty(num_history_samples, dtype=int)
    for rep in range(num_history_samples):
        aux = replication_rng(config.master_seed, rep, stream=1)
        t = int(aux.integers(0, max_t + 1))
        history = History.from_arrays(runs["arms"][rep, :t], runs["rewards"][rep, :t].astype(int))
        belief = batch_posterior(spec, history)
        imagined, _ = max_stats(belief.mean, belief.cov)
        beta = beta_posterior(spec, history)
        best = aux.beta(beta.alpha, beta.beta, size=(n_beta_draws, spec.num_arms)).max(axis=1)
        margins[rep] = imagined - best.mean()
        ses[rep] = best.std(ddof=1) / math.sqrt(n_beta_draws)
        times[rep] = t
    flagged = int(np.sum(margins < -3.0 * ses))
    return OptimismReport(margins, ses, times, float(margins.min()), flagged)
