"""Command-line entry point.

Subcommands: ``solve``, ``bench``, ``sweep``, ``gen-scenario``. Settings come
from a JSON file of flat dotted keys (``--config``) and are overridden by
flags. Run ``d4orm <command> --help`` for the flags; the config keys are
listed in ``CONFIG_KEYS``.

Exit codes: 0 ok (``solve``: solution found), 1 configuration error,
2 ``solve`` finished without a successful trajectory.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import CemConfig, MppiConfig
from .bench import SolverSpec, aggregate, run_trial, sensitivity_grid, write_summary
from .denoiser import DenoiserConfig
from .dynamics import DynamicsModel, JointTrajectory
from .errors import ConfigError
from .optimizer import OptimizerConfig
from .reward import RewardConfig, check_success
from .scenarios import (Scenario, add_obstacles, antipodal_circle, antipodal_sphere,
                        obstacle_preset, random_square)

TRAJECTORY_SCHEMA_VERSION = 1
SOLVERS = ("d4orm", "mppi", "cem")
SCENARIO_KINDS = ("antipodal-circle", "antipodal-sphere", "random-square")


@dataclass
class RunConfig:
    scenario: str = "antipodal-circle"   # a kind from SCENARIO_KINDS or a scenario JSON path
    n: int = 8
    diameter: float = 4.0
    scenario_seed: int = 0
    obstacles: str | None = None
    model: str = "holo2d"
    solver: str = "d4orm"
    horizon: int = 100
    dt: float = 0.1
    N: int = 100
    M: int = 2048
    lambda_: float = DenoiserConfig.lambda_
    alpha_bar_final: float = DenoiserConfig.alpha_bar_final
    iterations: int = 10
    budget_steps: int | None = None      # baselines; defaults to iterations * N
    deadline: float | None = None
    stop_on_success: bool = True
    sigma: float = 1.0
    elite_fraction: float = 0.1
    initial_std: float = 1.0
    min_std: float = 0.05
    safety_weight: float = 2.0
    epsilon: float = 0.05
    robot_radius: float = 0.1
    goal_tolerance: float = 0.1
    obstacle_weight: float | None = None
    seed: int = 0
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    solvers: list[str] = field(default_factory=lambda: list(SOLVERS))
    sweep_N: list[int] = field(default_factory=lambda: [50, 100])
    sweep_iterations: list[int] = field(default_factory=lambda: [1, 5, 10])
    workers: int = 1
    out: str = "runs"

    def validate(self):
        if self.horizon < 2:
            raise ConfigError("horizon must be >= 2")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad:
            raise ConfigError(f"unknown solvers {bad}")
        if self.scenario not in SCENARIO_KINDS and not Path(self.scenario).is_file():
            raise ConfigError(f"scenario {self.scenario!r} is neither a known kind "
                              f"{SCENARIO_KINDS} nor an existing file")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")

    def reward_config(self) -> RewardConfig:
        return RewardConfig(self.safety_weight, self.epsilon, self.robot_radius,
                            self.goal_tolerance, self.obstacle_weight)

    def denoiser_config(self, seed: int) -> DenoiserConfig:
        return DenoiserConfig(N=self.N, M=self.M, lambda_=self.lambda_, seed=seed,
                              alpha_bar_final=self.alpha_bar_final)

    def solver_spec(self, name: str, seed: int) -> SolverSpec:
        budget = self.budget_steps if self.budget_steps is not None else self.iterations * self.N
        common = dict(M=self.M, seed=seed, deadline=self.deadline,
                      stop_on_success=self.stop_on_success)
        if name == "d4orm":
            return SolverSpec(name, OptimizerConfig(self.iterations, self.deadline,
                                                    self.stop_on_success,
                                                    self.denoiser_config(seed)))
        if name == "mppi":
            return SolverSpec(name, MppiConfig(lambda_=self.lambda_, sigma=self.sigma,
                                               iterations=budget, **common))
        return SolverSpec(name, CemConfig(elite_fraction=self.elite_fraction,
                                          initial_std=self.initial_std, min_std=self.min_std,
                                          iterations=budget, **common))

    def build_scenario(self) -> Scenario:
        rc = self.reward_config()
        kw = dict(reward_config=rc, horizon=self.horizon, dt=self.dt)
        if self.scenario == "antipodal-circle":
            sc = antipodal_circle(self.n, self.diameter, self.model, **kw)
        elif self.scenario == "antipodal-sphere":
            sc = antipodal_sphere(self.n, self.diameter, **kw)
        elif self.scenario == "random-square":
            sc = random_square(self.n, self.diameter, self.scenario_seed, self.model, **kw)
        else:
            sc = Scenario.load(self.scenario)
        if self.obstacles:
            sc = add_obstacles(sc, obstacle_preset(self.obstacles, self.diameter / 4.0))
            sc = sc.replace(name=f"{sc.name}-{self.obstacles}")
        return sc

    def to_flat(self) -> dict:
        return {key: getattr(self, attr) for key, attr in CONFIG_KEYS.items()}


# dotted config-file key -> RunConfig attribute
CONFIG_KEYS = {
    "scenario.kind": "scenario",
    "scenario.n": "n",
    "scenario.diameter": "diameter",
    "scenario.seed": "scenario_seed",
    "scenario.obstacles": "obstacles",
    "scenario.horizon": "horizon",
    "scenario.dt": "dt",
    "model": "model",
    "solver": "solver",
    "denoiser.N": "N",
    "denoiser.M": "M",
    "denoiser.lambda": "lambda_",
    "denoiser.alpha_bar_final": "alpha_bar_final",
    "optimizer.iterations": "iterations",
    "optimizer.deadline": "deadline",
    "optimizer.stop_on_success": "stop_on_success",
    "baseline.budget_steps": "budget_steps",
    "mppi.sigma": "sigma",
    "cem.elite_fraction": "elite_fraction",
    "cem.initial_std": "initial_std",
    "cem.min_std": "min_std",
    "reward.safety_weight": "safety_weight",
    "reward.epsilon": "epsilon",
    "reward.robot_radius": "robot_radius",
    "reward.goal_tolerance": "goal_tolerance",
    "reward.obstacle_weight": "obstacle_weight",
    "seed": "seed",
    "seeds": "seeds",
    "bench.solvers": "solvers",
    "sweep.N": "sweep_N",
    "sweep.iterations": "sweep_iterations",
    "workers": "workers",
    "out": "out",
}


def _coerce(attr: str, value):
    default = getattr(RunConfig(), attr)
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{attr} must be true or false")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{attr} must be a list")
        return [type(default[0])(v) for v in value]
    if isinstance(default, (int, float)) and not isinstance(value, (int, float)):
        raise ConfigError(f"{attr} must be a number, got {value!r}")
    if isinstance(default, int) and isinstance(value, float) and not value.is_integer():
        raise ConfigError(f"{attr} must be an integer, got {value!r}")
    return type(default)(value) if default is not None else value


def load_config_file(path) -> dict:
    """Parse a flat dotted-key JSON file into RunConfig attribute overrides."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        line = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n"
                          f"    {line}\n    {' ' * (exc.colno - 1)}^") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object of dotted keys")
    out = {}
    for key, value in data.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        attr = CONFIG_KEYS[key]
        out[attr] = _coerce(attr, value)
    return out


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_common(p):
    p.add_argument("--config", help="JSON file of flat dotted keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite an existing output directory")
    p.add_argument("--scenario", help=f"one of {', '.join(SCENARIO_KINDS)} or a scenario JSON")
    p.add_argument("--n", type=int, help="number of robots")
    p.add_argument("--diameter", type=float)
    p.add_argument("--scenario-seed", type=int, dest="scenario_seed")
    p.add_argument("--obstacles", help="obstacle preset name")
    p.add_argument("--model", choices=["diffdrive", "holo2d", "holo3d"])
    p.add_argument("--horizon", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--N", type=int, help="denoising steps per iteration")
    p.add_argument("--M", type=int, help="rollouts per batch")
    p.add_argument("--lambda", type=float, dest="lambda_")
    p.add_argument("--alpha-bar-final", type=float, dest="alpha_bar_final")
    p.add_argument("--iterations", type=int)
    p.add_argument("--budget-steps", type=int, dest="budget_steps")
    p.add_argument("--deadline", type=float)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d4orm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="solve one scenario and write the trajectory")
    _add_common(p)
    p.add_argument("--solver", choices=SOLVERS)
    p = sub.add_parser("bench", help="run solvers x seeds and aggregate")
    _add_common(p)
    p.add_argument("--solvers", type=_str_list)
    p.add_argument("--seeds", type=_int_list)
    p = sub.add_parser("sweep", help="success-rate grid over N and iterations")
    _add_common(p)
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--sweep-N", type=_int_list, dest="sweep_N")
    p.add_argument("--sweep-iterations", type=_int_list, dest="sweep_iterations")
    p = sub.add_parser("gen-scenario", help="write a scenario JSON")
    _add_common(p)
    return parser


_NOT_CONFIG = {"command", "config", "force"}


def resolve_config(args) -> RunConfig:
    values = load_config_file(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key in _NOT_CONFIG or value is None:
            continue
        values[key] = value
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def _prepare_out(path: Path, force: bool) -> None:
    if path.exists() and any(path.iterdir()) and not force:
        raise ConfigError(f"output directory {path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def trajectory_document(traj: JointTrajectory, scenario: Scenario, model: DynamicsModel,
                        cfg: RunConfig, summary: dict) -> dict:
    robots = []
    for k in range(traj.n_robots):
        steps = [{"t": round(t * traj.dt, 12), "state": traj.states[k, t].tolist(),
                  "control": traj.control_at(k, t).tolist()}
                 for t in range(traj.horizon + 1)]
        robots.append({"index": k, "steps": steps})
    return {
        "schema_version": TRAJECTORY_SCHEMA_VERSION,
        "solver": cfg.solver,
        "dt": traj.dt,
        "horizon": traj.horizon,
        "scenario": scenario.to_dict(),
        "model": model.to_dict(),
        "config": {k: v for k, v in cfg.to_flat().items() if k != "out"},
        "robots": robots,
        "summary": summary,
    }


def read_trajectory(path):
    """Load a trajectory file; returns ``(JointTrajectory, Scenario, summary)``."""
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != TRAJECTORY_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported trajectory schema_version")
    states = [[s["state"] for s in r["steps"]] for r in doc["robots"]]
    controls = [[s["control"] for s in r["steps"][:-1]] for r in doc["robots"]]
    traj = JointTrajectory(states, controls, doc["dt"])
    return traj, Scenario.from_dict(doc["scenario"]), doc["summary"]


def cmd_solve(args) -> int:
    cfg = resolve_config(args)
    scenario = cfg.build_scenario()
    model = DynamicsModel.from_kind(scenario.model_kind)
    out = Path(cfg.out)
    _prepare_out(out, args.force)
    result = cfg.solver_spec(cfg.solver, cfg.seed).run(scenario, model, cfg.workers)
    report = check_success(result.best_trajectory, scenario)
    summary = {
        "success": bool(report.success),
        "first_violation": report.first_violation,
        "reward": result.best_reward,
        "iterations": result.iterations_used,
        "steps": result.total_steps,
        "rollouts": result.total_rollouts,
    }
    doc = trajectory_document(result.best_trajectory, scenario, model, cfg, summary)
    (out / "trajectory.json").write_text(json.dumps(doc, indent=1))
    with (out / "trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        if result.traces:
            w.writerow(["iteration", "step", "best_reward", "mean_reward", "weight_entropy"])
            for it, trace in enumerate(result.traces, start=1):
                for rec in trace:
                    w.writerow([it, *rec])
        else:
            w.writerow(["iteration", "reward", "success"])
            for rec in result.per_iteration:
                w.writerow([rec.iteration, rec.reward, int(rec.success)])
    print(f"solver={cfg.solver} scenario={scenario.name} success={int(report.success)} "
          f"reward={result.best_reward:.6f} iterations={result.iterations_used} "
          f"steps={result.total_steps} wall={result.wall_time:.2f}s")
    return 0 if report.success else 2


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    scenario = cfg.build_scenario()
    model = DynamicsModel.from_kind(scenario.model_kind)
    out = Path(cfg.out)
    _prepare_out(out, args.force)
    records = []
    for name in cfg.solvers:
        for seed in cfg.seeds:
            rec = run_trial(cfg.solver_spec(name, seed), scenario, seed, model,
                            workers=cfg.workers)
            rec.write_csv(out)
            records.append(rec)
            status = "error" if rec.error else ("ok" if rec.success else "fail")
            print(f"{name} seed={seed} {status} first_success_rollouts={rec.first_success_rollouts}")
    aggs = aggregate(records)
    write_summary(aggs, out / "summary.json")
    for (solver, sc), a in aggs.items():
        print(f"{solver}/{sc}: success {a.successes}/{a.trials}")
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    scenario = cfg.build_scenario()
    out = Path(cfg.out)
    _prepare_out(out, args.force)
    rates = sensitivity_grid(scenario, cfg.sweep_N, cfg.sweep_iterations, cfg.seeds,
                             cfg.denoiser_config(0), workers=cfg.workers)
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iterations\\N", *cfg.sweep_N])
        for iters, row in zip(cfg.sweep_iterations, rates):
            w.writerow([iters, *row.tolist()])
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def cmd_gen_scenario(args) -> int:
    cfg = resolve_config(args)
    scenario = cfg.build_scenario()
    out = Path(cfg.out)
    _prepare_out(out, args.force)
    path = out / f"{scenario.name}.json"
    scenario.save(path)
    print(f"wrote {path}")
    return 0


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "sweep": cmd_sweep,
            "gen-scenario": cmd_gen_scenario}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
