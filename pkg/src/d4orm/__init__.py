"""Gradient-free multi-robot trajectory optimization by iterative denoising.

Each iteration denoises an additive deformation of the current joint control
trajectory with a Monte Carlo score estimate built from batched rollouts.
"""

from .baselines import CemConfig, MppiConfig, cem_solve, mppi_solve
from .bench import SolverSpec, TrialRecord, aggregate, run_trial, sensitivity_grid
from .denoiser import DenoiserConfig, Mode, run_denoising, sample_batch, score_weights
from .dynamics import DynamicsModel, JointTrajectory, ModelKind, batch_rollout, rollout
from .errors import ConfigError, ContractError, NumericFailure, ScenarioError
from .optimizer import OptimizerConfig, SolveResult, solve
from .reward import ObstacleSet, RewardConfig, check_success, total_reward
from .scenarios import Scenario, antipodal_circle, antipodal_sphere, random_square
from .schedule import NoiseSchedule, make_schedule

__all__ = [
    "CemConfig", "ConfigError", "ContractError", "DenoiserConfig", "DynamicsModel",
    "JointTrajectory", "Mode", "ModelKind", "MppiConfig", "NoiseSchedule", "NumericFailure",
    "ObstacleSet", "OptimizerConfig", "RewardConfig", "Scenario", "ScenarioError",
    "SolveResult", "SolverSpec", "TrialRecord", "aggregate", "antipodal_circle",
    "antipodal_sphere", "batch_rollout", "cem_solve", "check_success", "make_schedule",
    "mppi_solve", "random_square", "rollout", "run_denoising", "run_trial", "sample_batch",
    "score_weights", "sensitivity_grid", "solve", "total_reward",
]

__version__ = "0.1.0"
