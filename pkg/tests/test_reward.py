import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d4orm.dynamics import JointTrajectory
from d4orm.errors import ConfigError, ContractError
from d4orm.reward import (ObstacleSet, RewardConfig, batch_total_reward, check_success,
                          goal_reward, objective, obstacle_penalty, safety_reward, total_reward)
from d4orm.scenarios import Scenario

RC = RewardConfig()


def parked(positions, H=10):
    """Holo2D trajectory that sits at ``positions`` (n, 2) for all H+1 states."""
    p = np.asarray(positions, dtype=float)
    states = np.zeros((len(p), H + 1, 4))
    states[:, :, :2] = p[:, None, :]
    return JointTrajectory(states, np.zeros((len(p), H, 2)), 0.1)


def from_path(path):
    """Single-robot Holo2D trajectory along an explicit (H+1, 2) position path."""
    path = np.asarray(path, dtype=float)
    states = np.zeros((1, len(path), 4))
    states[0, :, :2] = path
    return JointTrajectory(states, np.zeros((1, len(path) - 1, 2)), 0.1)


def scenario(starts, goals, **kw):
    starts = np.asarray(starts, dtype=float)
    full = np.column_stack([starts, np.zeros_like(starts)])
    return Scenario("holo2d", full, goals, **kw)


def naive_reward(traj, sc, cfg):
    """Direct transcription of the team reward with per-term helpers."""
    n, H1 = traj.positions.shape[:2]
    total = 0.0
    for t in range(1, H1):
        for k in range(n):
            r = goal_reward(traj.positions[k], t, sc.start_positions[k], sc.goals[k])
            r += cfg.safety_weight * safety_reward(traj.positions[:, t], k, cfg)
            r += cfg.obstacle_w * obstacle_penalty(traj.positions[k, t], cfg.robot_radius,
                                                   sc.obstacles)
            total += r
    return total / (n * (H1 - 1))


def test_goal_reward_examples():
    path = np.array([[2.0, 0.0], [-2.0, 0.0], [1.0, 0.0]])
    start, goal = [-2.0, 0.0], [2.0, 0.0]
    assert goal_reward(path, 0, start, goal) == 1.0
    assert goal_reward(path, 1, start, goal) == 0.0
    assert goal_reward(path, 2, start, goal) == pytest.approx(0.75)
    assert goal_reward([[-3.0, 0.0]], 0, start, goal) < 0


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(-10, 10), st.floats(-10, 10))
def test_goal_reward_translation_invariant(v, dx, dy):
    p, s, g = np.array(v[:2]), np.array(v[2:4]), np.array(v[4:])
    if np.linalg.norm(s - g) < 1e-3:
        return
    shift = np.array([dx, dy])
    a = goal_reward([p], 0, s, g)
    b = goal_reward([p + shift], 0, s + shift, g + shift)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


def test_safety_reward_examples():
    assert safety_reward([[0.0, 0.0]], 0, RC) == 0.0
    boundary = RC.safe_distance
    assert safety_reward([[0.0, 0.0], [boundary, 0.0]], 0, RC) == -1.0
    assert safety_reward([[0.0, 0.0], [0.26, 0.0]], 1, RC) == 0.0


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1), st.integers(2, 6))
def test_safety_reward_symmetric_under_relabelling(seed, n):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-0.5, 0.5, size=(n, 2))
    perm = rng.permutation(n)
    values = [safety_reward(p, k, RC) for k in range(n)]
    permuted = [safety_reward(p[perm], k, RC) for k in range(n)]
    assert permuted == [values[j] for j in perm]


def test_obstacle_penalty_examples():
    assert obstacle_penalty([0.0, 0.0], 0.1, ObstacleSet.empty()) == 0.0
    obs = ObstacleSet.from_list([((0.0, 0.0), 0.5)])
    assert obstacle_penalty([0.1, 0.0], 0.1, obs) == -1.0
    assert obstacle_penalty([0.59, 0.0], 0.1, obs) == -1.0
    assert obstacle_penalty([0.61, 0.0], 0.1, obs) == 0.0
    with pytest.raises(ContractError):
        obstacle_penalty([0.0, 0.0, 0.0], 0.1, obs)


def test_total_reward_examples():
    sc = scenario([[-2, 0]], [[2, 0]])
    assert total_reward(parked([[2, 0]]), sc) == pytest.approx(1.0)
    assert total_reward(parked([[-2, 0]]), sc) == pytest.approx(0.0)
    # two robots parked at goals 0.22 m apart, inside the padded margin
    sc2 = scenario([[-2, 0.11], [-2, -0.5]], [[2, 0.11], [2, -0.11]])
    assert total_reward(parked(sc2.goals), sc2) == pytest.approx(-1.0)


def test_total_reward_matches_naive_oracle_with_obstacles():
    rng = np.random.default_rng(5)
    sc = scenario([[-2, 0], [0, -2], [2, 0.3]], [[2, 0], [0, 2], [-2, 0.3]],
                  obstacles=ObstacleSet.from_list([((0.0, 0.0), 0.3), ((1.0, 1.0), 0.2)]))
    for _ in range(5):
        path = np.cumsum(rng.normal(0, 0.3, size=(3, 21, 2)), axis=1) + sc.start_positions[:, None]
        path[:, 0] = sc.start_positions
        states = np.zeros((3, 21, 4))
        states[..., :2] = path
        traj = JointTrajectory(states, np.zeros((3, 20, 2)), 0.1)
        assert total_reward(traj, sc) == pytest.approx(naive_reward(traj, sc, sc.reward_config),
                                                       abs=1e-12)


def test_zero_safety_weight_gives_mean_goal_reward():
    sc = scenario([[-2, 0], [-2, 0.5]], [[2, 0], [2, 0.5]],
                  reward_config=RewardConfig(safety_weight=0.0))
    traj = parked([[0.0, 0.0], [0.0, 0.1]])
    expected = np.mean([goal_reward(traj.positions[k], t, sc.start_positions[k], sc.goals[k])
                        for k in range(2) for t in range(1, 11)])
    assert total_reward(traj, sc) == pytest.approx(expected)


def test_batch_reward_rejects_nonfinite_states():
    sc = scenario([[-2, 0]], [[2, 0]])
    states = np.zeros((2, 1, 4, 4))
    states[1, 0, 2, 0] = np.nan
    with pytest.raises(FloatingPointError, match="sample 1"):
        batch_total_reward(states, sc)


def test_objective_examples():
    sc = scenario([[-2, 0]], [[2, 0]])
    assert objective(parked([[-2, 0]], H=100), sc) == 0.0
    assert objective(parked([[2, 0]], H=100), sc) == 1.0
    path = np.zeros((101, 2))
    path[:51] = [-2, 0]
    path[51:] = [2, 0]
    assert objective(from_path(path), sc) == pytest.approx(0.5)


@given(st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_objective_monotone_in_tolerance(tol, shrink):
    sc = scenario([[-2, 0]], [[2, 0]])
    path = np.column_stack([np.linspace(-2, 2.3, 51), np.zeros(51)])
    traj = from_path(path)
    big = objective(traj, sc, RewardConfig(goal_tolerance=tol))
    small = objective(traj, sc, RewardConfig(goal_tolerance=max(tol * shrink, 1e-6)))
    assert small <= big


def test_check_success_examples():
    sc = scenario([[-2, 0], [-2, 0.5]], [[2, 0], [2, 0.5]])
    touching = np.array([[0.0, 0.0], [0.2, 0.0]])
    report = check_success(parked(touching), sc)
    assert not report.success and report.kind == "safety" and report.step == 0

    one = scenario([[-2, 0]], [[2, 0]])
    path = np.column_stack([np.linspace(-2, 1.95, 11), np.zeros(11)])
    assert check_success(from_path(path), one).success

    path = np.column_stack([np.linspace(-2, 1.8, 11), np.zeros(11)])
    report = check_success(from_path(path), one)
    assert not report.success and report.kind == "terminal"
    assert "terminal" in report.first_violation


def test_check_success_obstacle_and_strict_margin():
    obs = ObstacleSet.from_list([((0.0, 0.3), 0.3)])
    sc = scenario([[-2, 0]], [[2, 0]], obstacles=obs)
    path = np.column_stack([np.linspace(-2, 2, 11), np.zeros(11)])
    report = check_success(from_path(path), sc)
    assert report.kind == "obstacle" and report.step == 5
    # exactly 2 R_a apart is a violation, just above is fine
    sc2 = scenario([[-2, 0], [-2, 1]], [[0, 0], [0, 0.2 + 1e-9]])
    assert check_success(parked(sc2.goals), sc2).success
    sc3 = scenario([[-2, 0], [-2, 1]], [[0, 0], [0, 0.3]])
    assert check_success(parked([[0, 0], [0, 0.2]]), sc3).kind == "safety"


@settings(max_examples=40)
@given(st.integers(0, 2**31 - 1))
def test_success_implies_no_penalties_without_margin(seed):
    rng = np.random.default_rng(seed)
    starts = rng.uniform(-2, 2, size=(3, 2))
    goals = rng.uniform(-2, 2, size=(3, 2))
    try:
        sc = scenario(starts, goals, reward_config=RewardConfig(epsilon=0.0))
    except ConfigError:
        return
    t = np.linspace(0, 1, 21)[None, :, None]
    path = starts[:, None] + t * (goals - starts)[:, None]
    states = np.zeros((3, 21, 4))
    states[..., :2] = path
    traj = JointTrajectory(states, np.zeros((3, 20, 2)), 0.1)
    if check_success(traj, sc).success:
        cfg = sc.reward_config
        for tt in range(1, 21):
            for k in range(3):
                assert safety_reward(traj.positions[:, tt], k, cfg) == 0.0


def test_reward_config_validation():
    with pytest.raises(ConfigError):
        RewardConfig(epsilon=-1)
    with pytest.raises(ConfigError):
        RewardConfig(robot_radius=0)
    with pytest.raises(ConfigError):
        RewardConfig(goal_tolerance=0)
    assert RewardConfig().obstacle_w == 2.0
    assert RewardConfig(obstacle_weight=5.0).obstacle_w == 5.0
    assert RewardConfig().safe_distance == pytest.approx(0.25)
    assert math.isclose(RewardConfig(robot_radius=0.2, epsilon=0).safe_distance, 0.4)
