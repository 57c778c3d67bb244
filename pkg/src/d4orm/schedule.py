"""Geometric noise schedule for the denoising loop.

``alpha_bar[i] = alpha_bar_final ** (i / N)`` for ``i = 0..N``, so every
per-step ``alpha[i]`` equals ``alpha_bar_final ** (1 / N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_ALPHA_BAR_FINAL = 0.95


@dataclass(frozen=True)
class NoiseSchedule:
    alpha: np.ndarray       # index 1..N used; alpha[0] is unused and set to 1
    alpha_bar: np.ndarray   # index 0..N, alpha_bar[0] == 1

    @property
    def N(self) -> int:
        return len(self.alpha_bar) - 1

    def sampling_spread(self, i: int) -> tuple[float, float]:
        return sampling_spread(self, i)


def make_schedule(N: int, alpha_bar_final: float = DEFAULT_ALPHA_BAR_FINAL) -> NoiseSchedule:
    if int(N) != N or N < 1:
        raise ConfigError(f"N must be a positive integer, got {N}")
    if not 0.0 < alpha_bar_final < 1.0:
        raise ConfigError(f"alpha_bar_final must lie in (0, 1), got {alpha_bar_final}")
    N = int(N)
    step = alpha_bar_final ** (1.0 / N)
    alpha = np.full(N + 1, step)
    alpha[0] = 1.0
    alpha_bar = np.empty(N + 1)
    alpha_bar[0] = 1.0
    for i in range(1, N + 1):
        alpha_bar[i] = alpha_bar_final ** (i / N)
    alpha_bar[N] = alpha_bar_final
    alpha.flags.writeable = False
    alpha_bar.flags.writeable = False
    return NoiseSchedule(alpha, alpha_bar)


def sampling_spread(schedule: NoiseSchedule, i: int) -> tuple[float, float]:
    """``(1/sqrt(abar_i), sqrt(1/abar_i - 1))`` for the sampling distribution at step i."""
    if not 1 <= i <= schedule.N:
        raise IndexError(f"denoising step {i} outside 1..{schedule.N}")
    return spread_for(float(schedule.alpha_bar[i]))


def spread_for(alpha_bar: float) -> tuple[float, float]:
    return 1.0 / math.sqrt(alpha_bar), math.sqrt(max(1.0 / alpha_bar - 1.0, 0.0))
