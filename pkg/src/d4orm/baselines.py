"""MPPI and CEM over the same joint control space, reward and rollout.

Both share the denoiser's machinery: per-sample noise streams, the
projection of samples onto the control box, batched evaluation and the
batch-standardised softmax weights (MPPI).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import run_chunked
from .denoiser import evaluate_controls, fill_noise, mc_average, project_samples, score_weights
from .dynamics import DynamicsModel, rollout
from .errors import ConfigError
from .optimizer import AnytimeLoop, SolveResult, zero_controls

# stream tags keep the baselines' noise independent of the optimizer's
_MPPI_TAG = 1
_CEM_TAG = 2


@dataclass(frozen=True)
class MppiConfig:
    M: int = 2048
    lambda_: float = 0.3
    sigma: float = 1.0
    iterations: int = 1000
    seed: int = 0
    deadline: float | None = None
    stop_on_success: bool = True
    clip_samples: bool = True

    def __post_init__(self):
        if self.M < 2:
            raise ConfigError("M must be >= 2")
        if not self.sigma > 0:
            raise ConfigError("sigma must be > 0")
        if not self.lambda_ > 0:
            raise ConfigError("lambda must be > 0")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")


@dataclass(frozen=True)
class CemConfig:
    M: int = 2048
    elite_fraction: float = 0.1
    initial_std: float = 1.0
    min_std: float = 0.05
    iterations: int = 1000
    seed: int = 0
    deadline: float | None = None
    stop_on_success: bool = True
    clip_samples: bool = True

    def __post_init__(self):
        if self.M < 2:
            raise ConfigError("M must be >= 2")
        if not 0.0 < self.elite_fraction < 1.0:
            raise ConfigError("elite_fraction must lie in (0, 1)")
        if self.n_elites < 1:
            raise ConfigError("elite_fraction * M must be at least 1")
        if self.initial_std < 0 or self.min_std < 0:
            raise ConfigError("standard deviations must be >= 0")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")

    @property
    def n_elites(self) -> int:
        return int(np.floor(self.elite_fraction * self.M))


def gaussian_batch(mean, std, M: int, seed: int, stream: tuple, workers: int = 1) -> np.ndarray:
    """``M`` draws of ``mean + std * z`` with per-sample noise streams."""
    out = np.empty((M, *np.shape(mean)))

    def work(lo, hi):
        fill_noise(out, seed, stream, 0, lo, hi)
        out[lo:hi] *= std
        out[lo:hi] += mean

    run_chunked(work, M, workers)
    return out


def mppi_update(samples, rewards, lambda_: float) -> np.ndarray:
    """New mean: softmax-weighted average of the samples, no schedule scaling."""
    return mc_average(samples, score_weights(rewards, lambda_))


def select_elites(rewards, n_elites: int) -> np.ndarray:
    """Indices of the ``n_elites`` highest rewards; ties go to the lower index."""
    order = np.argsort(-np.asarray(rewards), kind="stable")
    return order[:n_elites]


def cem_update(samples, rewards, n_elites: int, min_std: float):
    """Refit a diagonal Gaussian to the elites; returns ``(mean, std)``."""
    elites = np.asarray(samples)[select_elites(rewards, n_elites)]
    return elites.mean(axis=0), np.maximum(elites.std(axis=0), min_std)


def _check_model(scenario, model):
    if model.kind != scenario.model_kind:
        raise ConfigError(f"model {model.kind.value} does not match scenario "
                          f"{scenario.model_kind.value}")


def mppi_solve(scenario, model: DynamicsModel, config: MppiConfig | None = None,
               workers: int = 1, callback=None) -> SolveResult:
    config = config or MppiConfig()
    _check_model(scenario, model)
    loop = AnytimeLoop("mppi", scenario, config.iterations, config.deadline,
                       config.stop_on_success, 1, config.M)
    mean = zero_controls(scenario, model)
    for it in loop.iterations():
        samples = gaussian_batch(mean, config.sigma, config.M, config.seed,
                                 (_MPPI_TAG, it), workers)
        if config.clip_samples:
            samples = project_samples(samples, None, model)
        rewards = evaluate_controls(samples, scenario, model, workers)
        mean = mppi_update(samples, rewards, config.lambda_)
        traj = rollout(model, scenario.starts, mean, scenario.dt)
        rec = loop.record(traj)
        if callback is not None:
            callback(rec, traj)
    return loop.result()


def cem_solve(scenario, model: DynamicsModel, config: CemConfig | None = None,
              workers: int = 1, callback=None) -> SolveResult:
    config = config or CemConfig()
    _check_model(scenario, model)
    loop = AnytimeLoop("cem", scenario, config.iterations, config.deadline,
                       config.stop_on_success, 1, config.M)
    mean = zero_controls(scenario, model)
    std = np.full_like(mean, config.initial_std)
    for it in loop.iterations():
        samples = gaussian_batch(mean, std, config.M, config.seed, (_CEM_TAG, it), workers)
        if config.clip_samples:
            samples = project_samples(samples, None, model)
        rewards = evaluate_controls(samples, scenario, model, workers)
        mean, std = cem_update(samples, rewards, config.n_elites, config.min_std)
        traj = rollout(model, scenario.starts, mean, scenario.dt)
        rec = loop.record(traj)
        if callback is not None:
            callback(rec, traj)
    return loop.result()
