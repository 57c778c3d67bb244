"""Anytime iterative deformation loop.

Starting from the rollout of all-zero controls, every iteration denoises a
deformation ``dU`` against the current trajectory and replaces the
trajectory with ``rollout(start, controls + dU)``. The noise schedule is
reset for each iteration. The best-reward iterate seen so far is returned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .denoiser import DenoiserConfig, DenoiseTrace, Mode, run_denoising
from .dynamics import DynamicsModel, JointTrajectory, rollout
from .errors import ConfigError
from .reward import check_success, total_reward
from .schedule import NoiseSchedule, make_schedule


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 10
    deadline: float | None = None
    stop_on_success: bool = True
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.deadline is not None and self.deadline < 0:
            raise ConfigError("deadline must be >= 0")


class IterationRecord(NamedTuple):
    iteration: int          # 1-based
    reward: float
    success: bool
    wall_time: float        # seconds since the solve started
    cumulative_steps: int
    cumulative_rollouts: int


@dataclass
class SolveResult:
    """Outcome of one solver run.

    ``total_steps`` counts denoising steps for the deformation optimizer and
    iterations for the baselines; each step evaluates ``batch_size`` rollouts.
    ``success`` is the success check of ``best_trajectory``.
    """

    solver: str
    best_trajectory: JointTrajectory
    best_reward: float
    success: bool
    iterations_used: int
    total_steps: int
    steps_per_iteration: int
    batch_size: int
    wall_time: float
    per_iteration: list[IterationRecord] = field(default_factory=list)
    traces: list[DenoiseTrace] = field(default_factory=list)

    @property
    def total_rollouts(self) -> int:
        return self.total_steps * self.batch_size

    @property
    def first_success(self) -> IterationRecord | None:
        return next((r for r in self.per_iteration if r.success), None)

    @property
    def best_so_far(self) -> list[float]:
        return list(np.maximum.accumulate([r.reward for r in self.per_iteration]))


def zero_controls(scenario, model: DynamicsModel) -> np.ndarray:
    return np.zeros((scenario.n, scenario.horizon, model.control_dim))


class AnytimeLoop:
    """Shared bookkeeping for iterative solvers: timing, records, best tracking."""

    def __init__(self, solver, scenario, max_iterations, deadline, stop_on_success,
                 steps_per_iteration, batch_size):
        self.solver = solver
        self.scenario = scenario
        self.max_iterations = max_iterations
        self.deadline = deadline
        self.stop_on_success = stop_on_success
        self.steps_per_iteration = steps_per_iteration
        self.batch_size = batch_size
        self.records: list[IterationRecord] = []
        self.best: JointTrajectory | None = None
        self.best_reward = -np.inf
        self.t0 = time.perf_counter()

    def iterations(self):
        """Yield iteration indices until the budget, deadline or success stops the run.

        The deadline is only checked between iterations and never before the
        first one.
        """
        for it in range(self.max_iterations):
            if it > 0:
                if self.stop_on_success and self.records[-1].success:
                    return
                if self.deadline is not None and self.elapsed() >= self.deadline:
                    return
            yield it

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def record(self, traj: JointTrajectory) -> IterationRecord:
        reward = total_reward(traj, self.scenario)
        ok = check_success(traj, self.scenario).success
        it = len(self.records) + 1
        steps = it * self.steps_per_iteration
        rec = IterationRecord(it, reward, ok, self.elapsed(), steps, steps * self.batch_size)
        self.records.append(rec)
        if reward > self.best_reward:
            self.best, self.best_reward = traj, reward
        return rec

    def result(self, traces=()) -> SolveResult:
        used = len(self.records)
        return SolveResult(
            solver=self.solver,
            best_trajectory=self.best,
            best_reward=float(self.best_reward),
            success=check_success(self.best, self.scenario).success,
            iterations_used=used,
            total_steps=used * self.steps_per_iteration,
            steps_per_iteration=self.steps_per_iteration,
            batch_size=self.batch_size,
            wall_time=self.elapsed(),
            per_iteration=list(self.records),
            traces=list(traces),
        )


def iterate(base: JointTrajectory, scenario, model: DynamicsModel, schedule: NoiseSchedule,
            config: DenoiserConfig, iteration: int = 0, workers: int = 1):
    """One deformation iteration; returns ``(new_trajectory, trace)``."""
    if config.mode is not Mode.DEFORMATION:
        config = DenoiserConfig(**{**config.__dict__, "mode": Mode.DEFORMATION})
    delta, trace = run_denoising(base.controls, scenario, model, schedule, config,
                                 stream=(iteration,), workers=workers)
    return rollout(model, scenario.starts, base.controls + delta, scenario.dt), trace


def solve(scenario, model: DynamicsModel, config: OptimizerConfig | None = None,
          workers: int = 1, callback=None) -> SolveResult:
    """Run the anytime deformation optimizer on ``scenario``.

    ``callback(record, trajectory)`` is invoked after every iteration.
    """
    config = config or OptimizerConfig()
    if model.kind != scenario.model_kind:
        raise ConfigError(f"model {model.kind.value} does not match scenario "
                          f"{scenario.model_kind.value}")
    dcfg = config.denoiser
    schedule = make_schedule(dcfg.N, dcfg.alpha_bar_final)
    loop = AnytimeLoop("d4orm", scenario, config.max_iterations, config.deadline,
                       config.stop_on_success, dcfg.N, dcfg.M)
    base = rollout(model, scenario.starts, zero_controls(scenario, model), scenario.dt)
    traces = []
    for it in loop.iterations():
        base, trace = iterate(base, scenario, model, schedule, dcfg, it, workers)
        traces.append(trace)
        rec = loop.record(base)
        if callback is not None:
            callback(rec, base)
    return loop.result(traces)
