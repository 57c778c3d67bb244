"""Team reward, obstacle penalty, flowtime objective and success check.

The shaped reward averaged over robots ``k`` and steps ``t = 1..H`` is::

    r_goal(k, t) + safety_weight * r_safe(k, t) + obstacle_weight * r_obs(k, t)

with ``r_goal = 1 - |p_k[t] - g_k| / |p_k[0] - g_k|``, ``r_safe = -1`` when
any other robot is within ``2 R_a + epsilon`` (inclusive) and ``r_obs = -1``
when the robot overlaps an obstacle.

Success is stricter about geometry than the reward: pairwise distances must
*exceed* ``2 R_a`` (no epsilon) at every step including the start, and only
the final position has to lie in the goal ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, ContractError


@dataclass(frozen=True)
class RewardConfig:
    safety_weight: float = 2.0
    epsilon: float = 0.05
    robot_radius: float = 0.1
    goal_tolerance: float = 0.1
    obstacle_weight: float | None = None  # None -> same as safety_weight

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.robot_radius <= 0:
            raise ConfigError("robot_radius must be > 0")
        if self.goal_tolerance <= 0:
            raise ConfigError("goal_tolerance must be > 0")

    @property
    def obstacle_w(self) -> float:
        return self.safety_weight if self.obstacle_weight is None else self.obstacle_weight

    @property
    def safe_distance(self) -> float:
        return 2.0 * self.robot_radius + self.epsilon


@dataclass(frozen=True)
class ObstacleSet:
    """Spherical (circular in 2-D) obstacles."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        radii = np.array(self.radii, dtype=np.float64).reshape(-1)
        centers = np.array(self.centers, dtype=np.float64)
        if radii.size == 0:
            centers = centers.reshape(0, centers.shape[-1] if centers.ndim == 2 else 2)
        if centers.ndim != 2 or centers.shape[0] != radii.size:
            raise ContractError("obstacle centers must have shape (K, dim) matching radii")
        if np.any(radii <= 0):
            raise ContractError("obstacle radii must be > 0")
        centers.flags.writeable = False
        radii.flags.writeable = False
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @classmethod
    def empty(cls, dim: int = 2) -> "ObstacleSet":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def from_list(cls, items) -> "ObstacleSet":
        items = list(items)
        if not items:
            return cls.empty()
        return cls([c for c, _ in items], [r for _, r in items])

    def __len__(self) -> int:
        return len(self.radii)

    def to_list(self) -> list:
        return [{"center": c.tolist(), "radius": float(r)} for c, r in zip(self.centers, self.radii)]


def goal_reward(positions, t: int, start_pos, goal_pos) -> float:
    """Dense progress reward of one robot at step ``t``.

    ``positions`` is that robot's ``(H+1, pos_dim)`` position sequence.
    """
    goal_pos = np.asarray(goal_pos, dtype=np.float64)
    d0 = np.linalg.norm(np.asarray(start_pos, dtype=np.float64) - goal_pos)
    return 1.0 - np.linalg.norm(np.asarray(positions)[t] - goal_pos) / d0


def safety_reward(joint_positions, k: int, config: RewardConfig) -> float:
    p = np.asarray(joint_positions, dtype=np.float64)
    d = np.linalg.norm(p - p[k], axis=-1)
    d[k] = np.inf
    return -1.0 if np.any(d <= config.safe_distance) else 0.0


def obstacle_penalty(position, robot_radius: float, obstacles: ObstacleSet) -> float:
    if len(obstacles) == 0:
        return 0.0
    position = np.asarray(position, dtype=np.float64)
    if obstacles.centers.shape[1] != position.shape[0]:
        raise ContractError("obstacle dimension does not match position dimension")
    d = np.linalg.norm(obstacles.centers - position, axis=-1)
    return -1.0 if np.any(d <= obstacles.radii + robot_radius) else 0.0


@njit(cache=True, nogil=True)
def _reward_kernel(states, pd, goals, start_dist, w_safe, safe_dist,
                   centers, radii, robot_radius, w_obs, out):
    B, n, H1, _ = states.shape
    n_obs = radii.shape[0]
    hit = np.zeros(n, dtype=np.bool_)
    for b in range(B):
        total = 0.0
        for t in range(1, H1):
            for k in range(n):
                hit[k] = False
            for k in range(n):
                for l in range(k + 1, n):
                    d2 = 0.0
                    for j in range(pd):
                        diff = states[b, k, t, j] - states[b, l, t, j]
                        d2 += diff * diff
                    if math.sqrt(d2) <= safe_dist:
                        hit[k] = True
                        hit[l] = True
            for k in range(n):
                d2 = 0.0
                for j in range(pd):
                    diff = states[b, k, t, j] - goals[k, j]
                    d2 += diff * diff
                r = 1.0 - math.sqrt(d2) / start_dist[k]
                if hit[k]:
                    r -= w_safe
                for o in range(n_obs):
                    d2 = 0.0
                    for j in range(pd):
                        diff = states[b, k, t, j] - centers[o, j]
                        d2 += diff * diff
                    if math.sqrt(d2) <= radii[o] + robot_radius:
                        r -= w_obs
                        break
                total += r
        out[b] = total / (n * (H1 - 1))


def batch_total_reward(states, scenario, config: RewardConfig | None = None) -> np.ndarray:
    """Team reward for a batch of rolled-out states ``(B, n, H+1, d_x)``."""
    config = scenario.reward_config if config is None else config
    states = np.ascontiguousarray(states, dtype=np.float64)
    goals = np.ascontiguousarray(scenario.goals, dtype=np.float64)
    pd = goals.shape[1]
    start_dist = np.linalg.norm(np.asarray(scenario.starts)[:, :pd] - goals, axis=-1)
    obstacles = scenario.obstacles
    if len(obstacles):
        centers = np.ascontiguousarray(obstacles.centers)
        radii = np.ascontiguousarray(obstacles.radii)
    else:
        centers, radii = np.zeros((0, pd)), np.zeros(0)
    out = np.empty(states.shape[0])
    _reward_kernel(states, pd, goals, start_dist, float(config.safety_weight),
                   float(config.safe_distance), centers, radii,
                   float(config.robot_radius), float(config.obstacle_w), out)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite reward for sample {int(np.argmin(np.isfinite(out)))}")
    return out


def total_reward(traj, scenario, config: RewardConfig | None = None) -> float:
    if traj.n_robots != scenario.n:
        raise ContractError(f"trajectory has {traj.n_robots} robots, scenario has {scenario.n}")
    return float(batch_total_reward(traj.states[None], scenario, config)[0])


def objective(traj, scenario, config: RewardConfig | None = None) -> float:
    """Fraction of robot-steps ``t = 1..H`` spent inside the goal ball."""
    config = scenario.reward_config if config is None else config
    p = traj.positions[:, 1:]
    d = np.linalg.norm(p - np.asarray(scenario.goals)[:, None, :], axis=-1)
    return float(np.mean(d <= config.goal_tolerance))


@dataclass(frozen=True)
class SuccessReport:
    success: bool
    first_violation: str | None = None
    kind: str | None = None  # "safety" | "obstacle" | "terminal"
    step: int | None = None
    robots: tuple[int, ...] = ()

    def __bool__(self):
        return self.success


def check_success(traj, scenario, config: RewardConfig | None = None) -> SuccessReport:
    """Check the hard conditions; violations are reported earliest step first."""
    config = scenario.reward_config if config is None else config
    pos = traj.positions
    n, H1, _ = pos.shape
    r2 = 2.0 * config.robot_radius
    obstacles = scenario.obstacles
    iu, ju = np.triu_indices(n, k=1)
    for t in range(H1):
        p = pos[:, t]
        if n > 1:
            d = np.linalg.norm(p[iu] - p[ju], axis=-1)
            bad = np.flatnonzero(d <= r2)
            if bad.size:
                a, b = int(iu[bad[0]]), int(ju[bad[0]])
                return SuccessReport(False, f"safety: robots {a} and {b} at distance "
                                     f"{d[bad[0]]:.4f} <= {r2:.4f} at step {t}",
                                     "safety", t, (a, b))
        if len(obstacles):
            d = np.linalg.norm(p[:, None, :] - obstacles.centers[None], axis=-1)
            inside = np.argwhere(d <= obstacles.radii[None] + config.robot_radius)
            if inside.size:
                k, o = (int(v) for v in inside[0])
                return SuccessReport(False, f"obstacle: robot {k} overlaps obstacle {o} at step {t}",
                                     "obstacle", t, (k,))
    d_final = np.linalg.norm(pos[:, -1] - np.asarray(scenario.goals), axis=-1)
    far = np.flatnonzero(d_final > config.goal_tolerance)
    if far.size:
        k = int(far[0])
        return SuccessReport(False, f"terminal: robot {k} ends {d_final[k]:.4f} m from its goal "
                             f"(tolerance {config.goal_tolerance})", "terminal", H1 - 1, (k,))
    return SuccessReport(True)
