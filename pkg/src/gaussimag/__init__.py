"""Bandit agents with Gaussian beliefs acting on Bernoulli bandits.

Modules: ``envs`` (environments and histories), ``belief`` (posteriors),
``infotheory`` (entropies and divergences), ``agents`` (TS, IDS, uniform),
``bounds`` (analytic regret bounds) and ``harness`` (Monte Carlo checks).
"""

from .agents import ids_action, ts_action, uniform_action
from .belief import BetaBelief, GaussianBelief, batch_posterior, update_gaussian
from .bounds import BoundReport, tuned_bound
from .envs import EnvSpec, History, load_spec
from .harness import RunConfig, run_experiment

__all__ = [
    "BetaBelief",
    "BoundReport",
    "EnvSpec",
    "GaussianBelief",
    "History",
    "RunConfig",
    "batch_posterior",
    "ids_action",
    "load_spec",
    "run_experiment",
    "ts_action",
    "tuned_bound",
    "uniform_action",
    "update_gaussian",
]

__version__ = "0.1.0"
