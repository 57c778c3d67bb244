"""Monte Carlo score denoising over joint control trajectories.

One pass runs ``i = N .. 1``::

    samples  ~ N(U_i / sqrt(abar_i), (1/abar_i - 1) I)
    rewards  = r(rollout(start, base + samples))      # base = 0 from scratch
    weights  = softmax(zscore(rewards) / lambda)
    U_{i-1}  = sqrt(abar_{i-1}) * sum_m weights[m] * samples[m]

Every sample draws its Gaussian noise from its own stream keyed by
``(seed, *stream, i, m)``, so a batch is reproducible bitwise regardless of
how many workers evaluate it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from ._parallel import run_chunked
from .dynamics import DynamicsModel, check_finite, rollout_arrays
from .errors import ConfigError
from .reward import batch_total_reward
from .schedule import DEFAULT_ALPHA_BAR_FINAL, NoiseSchedule, sampling_spread

UNIFORM_STD_FLOOR = 1e-8


class Mode(str, enum.Enum):
    FROM_SCRATCH = "from_scratch"
    DEFORMATION = "deformation"


@dataclass(frozen=True)
class DenoiserConfig:
    N: int = 100
    M: int = 2048
    lambda_: float = 0.3
    seed: int = 0
    mode: Mode = Mode.DEFORMATION
    alpha_bar_final: float = DEFAULT_ALPHA_BAR_FINAL
    clip_samples: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.M < 2:
            raise ConfigError("M must be >= 2")
        if not self.lambda_ > 0:
            raise ConfigError("lambda must be > 0")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")


class StepRecord(NamedTuple):
    step: int
    best_reward: float
    mean_reward: float
    weight_entropy: float


@dataclass
class DenoiseTrace:
    records: list[StepRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def standard_normal(seed: int, stream: tuple, i: int, m: int, shape) -> np.ndarray:
    return np.random.default_rng([seed, *stream, i, m]).standard_normal(shape)


def fill_noise(out: np.ndarray, seed: int, stream: tuple, i: int, lo: int, hi: int) -> None:
    shape = out.shape[1:]
    for m in range(lo, hi):
        out[m] = standard_normal(seed, stream, i, m, shape)


def sample_batch(current, schedule: NoiseSchedule, i: int, M: int, seed: int,
                 stream: tuple = (), workers: int = 1) -> np.ndarray:
    """``M`` samples around ``current / sqrt(abar_i)`` with std ``sqrt(1/abar_i - 1)``."""
    mean_scale, std = sampling_spread(schedule, i)
    current = np.asarray(current, dtype=np.float64)
    out = np.empty((M, *current.shape))
    centre = mean_scale * current

    def work(lo, hi):
        fill_noise(out, seed, stream, i, lo, hi)
        out[lo:hi] *= std
        out[lo:hi] += centre

    run_chunked(work, M, workers)
    return out


def score_weights(rewards, lambda_: float) -> np.ndarray:
    """Softmax of batch-standardised rewards at temperature ``lambda_``."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("need a 1-D batch of at least two rewards")
    finite = np.isfinite(r)
    if not finite.all():
        raise FloatingPointError(f"non-finite reward for sample {int(np.argmin(finite))}")
    std = r.std()
    if std < UNIFORM_STD_FLOOR:
        return np.full(r.size, 1.0 / r.size)
    logits = (r - r.mean()) / std / lambda_
    w = np.exp(logits - logits.max())
    return w / w.sum()


def mc_average(samples, weights) -> np.ndarray:
    """Weighted mean over the leading axis, summed in ascending sample order."""
    samples = np.asarray(samples, dtype=np.float64)
    acc = np.zeros(samples.shape[1:])
    for w, s in zip(weights, samples):
        acc += w * s
    return acc


def denoise_step(mean, schedule: NoiseSchedule, i: int) -> np.ndarray:
    if not 1 <= i <= schedule.N:
        raise IndexError(f"denoising step {i} outside 1..{schedule.N}")
    return math.sqrt(schedule.alpha_bar[i - 1]) * np.asarray(mean)


def weight_entropy(weights) -> float:
    w = np.asarray(weights)
    nz = w[w > 0]
    return float(-(nz * np.log(nz)).sum())


@njit(cache=True, nogil=True)
def _project_kernel(samples, offset, lower, upper):
    M, n, H, du = samples.shape
    for m in range(M):
        for k in range(n):
            for t in range(H):
                for j in range(du):
                    c = samples[m, k, t, j] + offset[k, t, j]
                    if c < lower[j]:
                        samples[m, k, t, j] = lower[j] - offset[k, t, j]
                    elif c > upper[j]:
                        samples[m, k, t, j] = upper[j] - offset[k, t, j]


def project_samples(samples, offset, model: DynamicsModel) -> np.ndarray:
    """Shift samples so that ``offset + sample`` lies inside the control box.

    Weighted averages of projected samples stay feasible, which keeps the
    denoised variable out of the saturated region where small perturbations
    no longer change the executed controls. Works in place when possible.
    """
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if offset is None:
        offset = np.zeros(samples.shape[1:])
    _project_kernel(samples, np.ascontiguousarray(offset, dtype=np.float64),
                    model.lower, model.upper)
    return samples


def evaluate_controls(controls, scenario, model: DynamicsModel, workers: int = 1) -> np.ndarray:
    """Roll out ``(M, n, H, d_u)`` controls and return their team rewards."""
    M = controls.shape[0]
    rewards = np.empty(M)

    def work(lo, hi):
        states, _ = rollout_arrays(model, scenario.starts, controls[lo:hi], scenario.dt)
        check_finite(states, offset=lo)
        rewards[lo:hi] = batch_total_reward(states, scenario)

    run_chunked(work, M, workers)
    return rewards


def run_denoising(base, scenario, model: DynamicsModel, schedule: NoiseSchedule,
                  config: DenoiserConfig, stream: tuple = (), workers: int = 1):
    """Run one full denoising pass.

    ``base`` is a joint control trajectory ``(n, H, d_u)``. In deformation
    mode the variable is an additive correction to ``base`` starting from
    zero; from scratch the variable is the control trajectory itself,
    starting from a standard normal draw and ignoring ``base`` values.

    Returns ``(variable, DenoiseTrace)``.
    """
    base = np.asarray(base, dtype=np.float64)
    shape = (scenario.n, scenario.horizon, model.control_dim)
    if base.shape != shape:
        raise ValueError(f"base controls must have shape {shape}, got {base.shape}")
    if config.mode is Mode.DEFORMATION:
        U = np.zeros(shape)
        offset = base
    else:
        # step index 0 never labels a sampling stream, so it is free for the init
        U = standard_normal(config.seed, stream, 0, 0, shape)
        offset = None
    trace = DenoiseTrace()
    for i in range(schedule.N, 0, -1):
        samples = sample_batch(U, schedule, i, config.M, config.seed, stream, workers)
        if config.clip_samples:
            samples = project_samples(samples, offset, model)
        controls = samples if offset is None else samples + offset
        rewards = evaluate_controls(controls, scenario, model, workers)
        weights = score_weights(rewards, config.lambda_)
        U = denoise_step(mc_average(samples, weights), schedule, i)
        trace.records.append(StepRecord(i, float(rewards.max()), float(rewards.mean()),
                                        weight_entropy(weights)))
    return U, trace
