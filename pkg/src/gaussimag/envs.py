"""Real (Bernoulli) and imaginary (Gaussian) bandit environments."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MIN_NOISE_VAR = 1e-12


class SpecError(ValueError):
    """Raised when an experiment specification is invalid."""


def _as_vector(values, name: str, length: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape != (length,):
        raise SpecError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EnvSpec:
    """Configuration of one real/imaginary bandit pair.

    Parameters
    ----------
    num_arms : int
        Number of actions.
    alpha, beta : array_like
        Per-arm Beta prior parameters of the real mean rewards.
    mu0 : array_like
        Prior mean of the imaginary mean-reward vector.
    sigma0 : array_like
        Prior covariance of the imaginary mean-reward vector (symmetric PD).
    noise_var : float
        Imaginary reward noise variance.
    horizon : int
        Number of timesteps T.
    delta_sq : float
        Perturbation variance of the learning target, inside (0, 1).
    seed : int
        Default master seed for experiments built from this spec.
    """

    num_arms: int
    alpha: np.ndarray
    beta: np.ndarray
    mu0: np.ndarray
    sigma0: np.ndarray
    noise_var: float
    horizon: int
    delta_sq: float = 0.5
    seed: int = 0
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.num_arms)
        if n < 1 or n != self.num_arms:
            raise SpecError("num_arms must be a positive integer")
        object.__setattr__(self, "num_arms", n)
        alpha = _as_vector(self.alpha, "alpha", n)
        beta = _as_vector(self.beta, "beta", n)
        if np.any(alpha <= 0) or np.any(beta <= 0):
            raise SpecError("Beta parameters must be strictly positive")
        mu0 = _as_vector(self.mu0, "mu0", n)
        sigma0 = np.array(self.sigma0, dtype=float)
        if sigma0.shape != (n, n):
            raise SpecError(f"sigma0 must be a {n}x{n} matrix")
        if not np.all(np.isfinite(sigma0)):
            raise SpecError("sigma0 must be finite")
        if np.max(np.abs(sigma0 - sigma0.T), initial=0.0) > 1e-12:
            raise SpecError("sigma0 must be symmetric")
        sigma0 = 0.5 * (sigma0 + sigma0.T)
        try:
            chol = np.linalg.cholesky(sigma0)
        except np.linalg.LinAlgError:
            raise SpecError("sigma0 must be positive definite") from None
        sigma0.setflags(write=False)
        chol.setflags(write=False)
        noise_var = float(self.noise_var)
        if not np.isfinite(noise_var) or noise_var < MIN_NOISE_VAR:
            raise SpecError(f"noise_var must be finite and at least {MIN_NOISE_VAR}")
        horizon = int(self.horizon)
        if horizon < 0 or horizon != self.horizon:
            raise SpecError("horizon must be a non-negative integer")
        delta_sq = float(self.delta_sq)
        if not 0.0 < delta_sq < 1.0:
            raise SpecError("delta_sq must lie strictly inside (0, 1)")
        for name, value in [
            ("alpha", alpha),
            ("beta", beta),
            ("mu0", mu0),
            ("sigma0", sigma0),
            ("noise_var", noise_var),
            ("horizon", horizon),
            ("delta_sq", delta_sq),
            ("seed", int(self.seed)),
            ("_chol", chol),
        ]:
            object.__setattr__(self, name, value)

    @property
    def sigma0_is_diagonal(self) -> bool:
        return bool(np.all(self.sigma0 == np.diag(np.diag(self.sigma0))))

    def replace(self, **changes) -> "EnvSpec":
        doc = self.to_dict()
        doc.update(changes)
        return EnvSpec.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "num_arms": self.num_arms,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "mu0": self.mu0.tolist(),
            "sigma0": self.sigma0.tolist(),
            "noise_var": self.noise_var,
            "horizon": self.horizon,
            "delta_sq": self.delta_sq,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EnvSpec":
        known = {"num_arms", "alpha", "beta", "mu0", "sigma0", "noise_var", "horizon", "delta_sq", "seed"}
        unknown = set(doc) - known
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        missing = {"num_arms", "alpha", "beta", "mu0", "sigma0", "noise_var", "horizon"} - set(doc)
        if missing:
            raise SpecError(f"missing config keys: {sorted(missing)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EnvSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise SpecError("config must be a JSON object")
        return cls.from_dict(doc)


def load_spec(path: str | Path) -> EnvSpec:
    return EnvSpec.from_json(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class RealEnvDraw:
    """One draw of the real environment: arm means and the optimal arm."""

    theta: np.ndarray
    optimal_arm: int
    optimal_mean: float


@dataclass(frozen=True)
class History:
    """Ordered (arm, reward) pairs with binary rewards."""

    steps: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        steps = tuple((int(a), int(r)) for a, r in self.steps)
        for (a, r), (a_raw, r_raw) in zip(steps, self.steps):
            if a != a_raw or a < 0:
                raise ValueError(f"invalid arm index {a_raw!r}")
            if r not in (0, 1) or r != r_raw:
                raise ValueError(f"rewards must be exactly 0 or 1, got {r_raw!r}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def from_arrays(cls, arms: Iterable[int], rewards: Iterable[int]) -> "History":
        return cls(tuple(zip(arms, rewards)))

    def __len__(self) -> int:
        return len(self.steps)

    def append(self, arm: int, reward: int) -> "History":
        return History(self.steps + ((arm, reward),))

    @property
    def arms(self) -> np.ndarray:
        return np.array([a for a, _ in self.steps], dtype=int)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r for _, r in self.steps], dtype=float)

    def check_arms(self, num_arms: int) -> None:
        if any(a >= num_arms for a, _ in self.steps):
            raise ValueError(f"history contains an arm outside [0, {num_arms})")

    def counts(self, num_arms: int) -> np.ndarray:
        self.check_arms(num_arms)
        return np.bincount(self.arms, minlength=num_arms).astype(float)


def replication_rng(master_seed: int, replication: int, stream: int = 0) -> np.random.Generator:
    """Counter-based random stream keyed on ``(master_seed, replication)``.

    Streams for different replications are independent of each other and
    of the order in which they are created. ``stream > 0`` selects an
    auxiliary stream for the same replication (used by validation oracles).
    """
    key = (int(replication),) if stream == 0 else (int(replication), int(stream))
    seq = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def argmax_random_tiebreak(values: np.ndarray, u: np.ndarray | float) -> np.ndarray:
    """Argmax along the last axis, ties broken by the uniform draw(s) ``u``.

    Among the ``k`` tied maximisers the ``floor(u * k)``-th is returned, so a
    uniform ``u`` gives a uniform choice.
    """
    values = np.asarray(values, dtype=float)
    is_max = values == values.max(axis=-1, keepdims=True)
    n_ties = is_max.sum(axis=-1)
    pick = np.minimum((np.asarray(u) * n_ties).astype(int), n_ties - 1)
    rank = np.cumsum(is_max, axis=-1) - 1
    hit = is_max & (rank == pick[..., None])
    return np.argmax(hit, axis=-1)


def sample_real_env(spec: EnvSpec, rng: np.random.Generator) -> RealEnvDraw:
    theta = rng.beta(spec.alpha, spec.beta)
    arm = int(argmax_random_tiebreak(theta, rng.random()))
    return RealEnvDraw(theta=theta, optimal_arm=arm, optimal_mean=float(theta[arm]))


def _check_arm(arm: int, num_arms: int) -> None:
    if not 0 <= arm < num_arms:
        raise IndexError(f"arm {arm} out of range for {num_arms} arms")


def step_real(theta: Sequence[float], arm: int, rng: np.random.Generator) -> int:
    _check_arm(arm, len(theta))
    return int(rng.random() < theta[arm])


def step_imaginary(theta_tilde: Sequence[float], arm: int, noise_var: float, rng: np.random.Generator) -> float:
    _check_arm(arm, len(theta_tilde))
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    return float(theta_tilde[arm] + np.sqrt(noise_var) * rng.standard_normal())
