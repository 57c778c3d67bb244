"""Evaluation workspaces: antipodal circle/sphere, random square, obstacles.

Scenarios serialize to JSON (``schema_version`` 1)::

    {
      "schema_version": 1,
      "name": "antipodal-circle-8",
      "model_kind": "holo2d",
      "starts": [[...d_x...], ...],
      "goals": [[...pos_dim...], ...],
      "workspace_diameter": 4.0,
      "horizon": 100,
      "dt": 0.1,
      "obstacles": [{"center": [x, y], "radius": r}, ...],
      "reward_config": {"safety_weight": 2.0, "epsilon": 0.05, "robot_radius": 0.1,
                        "goal_tolerance": 0.1, "obstacle_weight": null}
    }
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import ModelKind
from .errors import ScenarioError
from .reward import ObstacleSet, RewardConfig

SCHEMA_VERSION = 1
DEFAULT_DIAMETER = 4.0
MAX_REJECTIONS = 10_000

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class Scenario:
    model_kind: ModelKind
    starts: np.ndarray
    goals: np.ndarray
    workspace_diameter: float = DEFAULT_DIAMETER
    obstacles: ObstacleSet = field(default_factory=ObstacleSet.empty)
    reward_config: RewardConfig = field(default_factory=RewardConfig)
    horizon: int = 100
    dt: float = 0.1
    name: str = "scenario"

    def __post_init__(self):
        kind = ModelKind(self.model_kind)
        object.__setattr__(self, "model_kind", kind)
        starts = np.array(self.starts, dtype=np.float64)
        goals = np.array(self.goals, dtype=np.float64)
        starts.flags.writeable = False
        goals.flags.writeable = False
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "goals", goals)
        self.validate()

    @property
    def n(self) -> int:
        return self.starts.shape[0]

    @property
    def position_dim(self) -> int:
        return 3 if self.model_kind is ModelKind.HOLO3D else 2

    @property
    def start_positions(self) -> np.ndarray:
        return self.starts[:, : self.position_dim]

    def validate(self) -> None:
        dx = 6 if self.model_kind is ModelKind.HOLO3D else 4
        pd = self.position_dim
        if self.starts.ndim != 2 or self.starts.shape[1] != dx or self.n < 1:
            raise ScenarioError(f"starts must have shape (n>=1, {dx}), got {self.starts.shape}")
        if self.goals.shape != (self.n, pd):
            raise ScenarioError(f"goals must have shape ({self.n}, {pd}), got {self.goals.shape}")
        if not (np.all(np.isfinite(self.starts)) and np.all(np.isfinite(self.goals))):
            raise ScenarioError("starts and goals must be finite")
        if int(self.horizon) != self.horizon or self.horizon < 2:
            raise ScenarioError(f"horizon must be an integer >= 2, got {self.horizon}")
        if not self.dt > 0:
            raise ScenarioError(f"dt must be positive, got {self.dt}")
        ra = self.reward_config.robot_radius
        for what, pts in (("start", self.start_positions), ("goal", self.goals)):
            gap, pair = _min_pairwise(pts)
            if gap <= 2 * ra:
                raise ScenarioError(f"{what}s {pair} are {gap:.4f} m apart, need > {2 * ra}")
        travel = np.linalg.norm(self.start_positions - self.goals, axis=-1)
        if np.any(travel <= 0):
            raise ScenarioError(f"robot {int(np.argmin(travel))} starts at its goal")
        if len(self.obstacles):
            if self.obstacles.centers.shape[1] != pd:
                raise ScenarioError("obstacle dimension does not match the workspace")
            for what, pts in (("start", self.start_positions), ("goal", self.goals)):
                d = np.linalg.norm(pts[:, None] - self.obstacles.centers[None], axis=-1)
                bad = np.argwhere(d <= self.obstacles.radii[None] + ra)
                if bad.size:
                    k, o = bad[0]
                    raise ScenarioError(f"{what} of robot {k} lies inside inflated obstacle {o}")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "model_kind": self.model_kind.value,
            "starts": self.starts.tolist(),
            "goals": self.goals.tolist(),
            "workspace_diameter": self.workspace_diameter,
            "horizon": int(self.horizon),
            "dt": self.dt,
            "obstacles": self.obstacles.to_list(),
            "reward_config": dataclasses.asdict(self.reward_config),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported scenario schema_version {version!r}")
        try:
            obstacles = ObstacleSet.from_list(
                (o["center"], o["radius"]) for o in data.get("obstacles", []))
            return cls(
                model_kind=data["model_kind"],
                starts=data["starts"],
                goals=data["goals"],
                workspace_diameter=float(data.get("workspace_diameter", DEFAULT_DIAMETER)),
                obstacles=obstacles,
                reward_config=RewardConfig(**data.get("reward_config", {})),
                horizon=int(data.get("horizon", 100)),
                dt=float(data.get("dt", 0.1)),
                name=data.get("name", "scenario"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"malformed scenario: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _min_pairwise(pts):
    n = len(pts)
    if n < 2:
        return math.inf, ()
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    d[np.diag_indices(n)] = np.inf
    k, l = np.unravel_index(np.argmin(d), d.shape)
    return float(d[k, l]), (int(min(k, l)), int(max(k, l)))


def _full_states(kind: ModelKind, positions, goals):
    """Zero-velocity start states; diff-drive robots face their goals."""
    n = len(positions)
    if kind is ModelKind.DIFFDRIVE:
        heading = np.arctan2(goals[:, 1] - positions[:, 1], goals[:, 0] - positions[:, 0])
        return np.column_stack([positions, heading, np.zeros(n)])
    return np.column_stack([positions, np.zeros_like(positions)])


def antipodal_circle(n: int, D: float = DEFAULT_DIAMETER, model_kind="holo2d",
                     reward_config: RewardConfig | None = None, **kw) -> Scenario:
    kind = ModelKind(model_kind)
    if kind is ModelKind.HOLO3D:
        raise ScenarioError("antipodal_circle is planar; use antipodal_sphere for holo3d")
    reward_config = reward_config or RewardConfig()
    if n < 1:
        raise ScenarioError("n must be >= 1")
    ra = reward_config.robot_radius
    if n > 1 and D * math.sin(math.pi / n) <= 2 * ra:
        need = 2 * ra / math.sin(math.pi / n)
        raise ScenarioError(f"{n} robots need a circle diameter > {need:.4f} m, got {D}")
    ang = 2.0 * math.pi * np.arange(n) / n
    starts = 0.5 * D * np.column_stack([np.cos(ang), np.sin(ang)])
    goals = -starts
    kw.setdefault("name", f"antipodal-circle-{n}")
    return Scenario(kind, _full_states(kind, starts, goals), goals, D,
                    reward_config=reward_config, **kw)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Unit vectors on a Fibonacci lattice; the first and last are the poles."""
    if n == 1:
        return np.array([[0.0, 0.0, 1.0]])
    k = np.arange(n)
    z = 1.0 - 2.0 * k / (n - 1)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = _GOLDEN_ANGLE * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def antipodal_sphere(n: int, D: float = DEFAULT_DIAMETER,
                     reward_config: RewardConfig | None = None, **kw) -> Scenario:
    reward_config = reward_config or RewardConfig()
    if n < 1:
        raise ScenarioError("n must be >= 1")
    starts = 0.5 * D * fibonacci_sphere(n)
    gap, _ = _min_pairwise(starts)
    if gap <= 2 * reward_config.robot_radius:
        need = D * 2 * reward_config.robot_radius / gap
        raise ScenarioError(f"{n} robots need a sphere diameter > {need:.4f} m, got {D}")
    goals = -starts
    kw.setdefault("name", f"antipodal-sphere-{n}")
    return Scenario(ModelKind.HOLO3D, _full_states(ModelKind.HOLO3D, starts, goals), goals, D,
                    reward_config=reward_config, **kw)


def random_square(n: int, D: float = DEFAULT_DIAMETER, seed: int = 0, model_kind="holo2d",
                  reward_config: RewardConfig | None = None, **kw) -> Scenario:
    """Uniform starts and goals in ``[-D/2, D/2]^2`` by rejection sampling.

    Each goal must also be more than ``2 R_a`` away from its own start.
    """
    kind = ModelKind(model_kind)
    if kind is ModelKind.HOLO3D:
        raise ScenarioError("random_square is planar")
    if n < 1:
        raise ScenarioError("n must be >= 1")
    reward_config = reward_config or RewardConfig()
    sep = 2 * reward_config.robot_radius
    rng = np.random.default_rng(seed)

    def draw(taken, avoid=None):
        for _ in range(MAX_REJECTIONS):
            p = rng.uniform(-0.5 * D, 0.5 * D, size=2)
            if all(np.linalg.norm(p - q) > sep for q in taken) and (
                    avoid is None or np.linalg.norm(p - avoid) > sep):
                return p
        raise ScenarioError(f"{MAX_REJECTIONS} consecutive rejections placing {n} robots in a "
                            f"{D} m square; workspace too dense")

    starts, goals = [], []
    for _ in range(n):
        starts.append(draw(starts))
    for k in range(n):
        goals.append(draw(goals, avoid=starts[k]))
    starts, goals = np.array(starts), np.array(goals)
    kw.setdefault("name", f"random-square-{n}-s{seed}")
    return Scenario(kind, _full_states(kind, starts, goals), goals, D,
                    reward_config=reward_config, **kw)


def add_obstacles(scenario: Scenario, spec) -> Scenario:
    """Attach ``[(center, radius), ...]`` obstacles; invariants are rechecked."""
    spec = list(spec)
    if not spec:
        return scenario
    existing = list(zip(scenario.obstacles.centers, scenario.obstacles.radii))
    return scenario.replace(obstacles=ObstacleSet.from_list(existing + spec))


# Approximate layouts for a D = 4 antipodal circle (coordinates in metres).
OBSTACLE_PRESETS = {
    "obs1-large": [((0.0, 0.0), 0.8)],
    "obs1": [((0.0, 0.0), 0.4)],
    "obs2": [((-0.7, 0.0), 0.35), ((0.7, 0.0), 0.35)],
    "obs3": [((0.0, 0.8), 0.3), ((-0.69, -0.4), 0.3), ((0.69, -0.4), 0.3)],
    "obs4": [((0.7, 0.7), 0.3), ((-0.7, 0.7), 0.3), ((-0.7, -0.7), 0.3), ((0.7, -0.7), 0.3)],
}


def obstacle_preset(name: str, scale: float = 1.0):
    """Preset obstacle list, scaled by ``D / 4`` when used with another diameter."""
    try:
        items = OBSTACLE_PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown obstacle preset {name!r}; "
                            f"choose from {sorted(OBSTACLE_PRESETS)}") from None
    return [(tuple(scale * c for c in center), scale * r) for center, r in items]
