"""Benchmark trials, aggregation and the sensitivity grid.

Record CSV (one row per iteration of one trial), fixed header order::

    solver,scenario,seed,iteration,cumulative_steps,cumulative_rollouts,
    reward,best_reward,success,wall_seconds

Files are named ``{solver}_{scenario}_{seed}.csv``. The summary JSON maps
``"{solver}/{scenario}"`` to the fields of :class:`Aggregate`.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import CemConfig, MppiConfig, cem_solve, mppi_solve
from .denoiser import DenoiserConfig
from .dynamics import DynamicsModel
from .optimizer import OptimizerConfig, solve

RECORD_HEADER = ("solver", "scenario", "seed", "iteration", "cumulative_steps",
                 "cumulative_rollouts", "reward", "best_reward", "success", "wall_seconds")


@dataclass(frozen=True)
class SolverSpec:
    """A solver name plus its config; the seed is filled in per trial."""

    name: str
    config: object

    def with_seed(self, seed: int) -> "SolverSpec":
        cfg = self.config
        if isinstance(cfg, OptimizerConfig):
            cfg = dataclasses.replace(cfg, denoiser=dataclasses.replace(cfg.denoiser, seed=seed))
        else:
            cfg = dataclasses.replace(cfg, seed=seed)
        return SolverSpec(self.name, cfg)

    def run(self, scenario, model, workers=1):
        if self.name == "d4orm":
            return solve(scenario, model, self.config, workers)
        if self.name == "mppi":
            return mppi_solve(scenario, model, self.config, workers)
        if self.name == "cem":
            return cem_solve(scenario, model, self.config, workers)
        raise ValueError(f"unknown solver {self.name!r}")


def default_spec(name: str, M: int = 2048, budget_steps: int = 1000, N: int = 100,
                 lambda_: float | None = None, stop_on_success: bool = True) -> SolverSpec:
    """Solver spec with a total budget of ``budget_steps`` batch evaluations."""
    if name == "d4orm":
        dcfg = DenoiserConfig(N=N, M=M) if lambda_ is None else DenoiserConfig(N=N, M=M, lambda_=lambda_)
        return SolverSpec(name, OptimizerConfig(max_iterations=max(1, budget_steps // N),
                                                stop_on_success=stop_on_success, denoiser=dcfg))
    if name == "mppi":
        kw = {} if lambda_ is None else {"lambda_": lambda_}
        return SolverSpec(name, MppiConfig(M=M, iterations=budget_steps,
                                           stop_on_success=stop_on_success, **kw))
    if name == "cem":
        return SolverSpec(name, CemConfig(M=M, iterations=budget_steps,
                                          stop_on_success=stop_on_success))
    raise ValueError(f"unknown solver {name!r}")


@dataclass
class TrialRecord:
    solver: str
    scenario: str
    seed: int
    rows: list[dict] = field(default_factory=list)
    first_success_step: int | None = None
    first_success_rollouts: int | None = None
    first_success_time: float | None = None
    error: str | None = None

    @property
    def success(self) -> bool:
        return self.first_success_step is not None

    @property
    def filename(self) -> str:
        return f"{self.solver}_{self.scenario}_{self.seed}.csv"

    def write_csv(self, directory) -> Path:
        path = Path(directory) / self.filename
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=RECORD_HEADER)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({**row, "success": int(row["success"])})
        return path

    @classmethod
    def read_csv(cls, path) -> "TrialRecord":
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != RECORD_HEADER:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            rows = [_parse_row(r) for r in reader]
        if not rows:
            raise ValueError(f"{path}: no iterations recorded")
        rec = cls(rows[0]["solver"], rows[0]["scenario"], rows[0]["seed"], rows)
        rec._mark_first_success()
        return rec

    def _mark_first_success(self):
        for row in self.rows:
            if row["success"]:
                self.first_success_step = row["cumulative_steps"]
                self.first_success_rollouts = row["cumulative_rollouts"]
                self.first_success_time = row["wall_seconds"]
                return


def _parse_row(r: dict) -> dict:
    return {
        "solver": r["solver"],
        "scenario": r["scenario"],
        "seed": int(r["seed"]),
        "iteration": int(r["iteration"]),
        "cumulative_steps": int(r["cumulative_steps"]),
        "cumulative_rollouts": int(r["cumulative_rollouts"]),
        "reward": float(r["reward"]),
        "best_reward": float(r["best_reward"]),
        "success": r["success"] in ("1", "True", "true"),
        "wall_seconds": float(r["wall_seconds"]),
    }


def run_trial(spec: SolverSpec, scenario, seed: int, model: DynamicsModel | None = None,
              scenario_id: str | None = None, workers: int = 1) -> TrialRecord:
    """Run one seeded trial; solver exceptions become a failed record."""
    model = model or DynamicsModel.from_kind(scenario.model_kind)
    record = TrialRecord(spec.name, scenario_id or scenario.name, seed)
    try:
        result = spec.with_seed(seed).run(scenario, model, workers)
    except Exception as exc:  # noqa: BLE001 - a crashing solver is a failed trial
        record.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return record
    best = -math.inf
    for it in result.per_iteration:
        best = max(best, it.reward)
        record.rows.append({
            "solver": record.solver,
            "scenario": record.scenario,
            "seed": seed,
            "iteration": it.iteration,
            "cumulative_steps": it.cumulative_steps,
            "cumulative_rollouts": it.cumulative_rollouts,
            "reward": it.reward,
            "best_reward": best,
            "success": bool(it.success),
            "wall_seconds": it.wall_time,
        })
    record._mark_first_success()
    return record


@dataclass
class Aggregate:
    solver: str
    scenario: str
    trials: int
    successes: int
    success_rate: float | None
    runtime: dict | None            # mean/median/iqr seconds over successful trials
    rollouts_to_success: dict | None
    curve_steps: list[int]
    curve_mean: list[float]
    curve_std: list[float]
    errors: int = 0


def _stats(values) -> dict | None:
    if not values:
        return None
    v = np.asarray(values, dtype=np.float64)
    q1, q3 = np.percentile(v, [25, 75])
    return {"mean": float(v.mean()), "median": float(np.median(v)), "iqr": float(q3 - q1),
            "n": int(v.size)}


def _curve(records):
    """Best-so-far reward per iteration boundary; finished trials carry their last value."""
    runs = [r.rows for r in records if r.rows]
    if not runs:
        return [], [], []
    longest = max(runs, key=len)
    steps = [row["cumulative_steps"] for row in longest]
    grid = np.full((len(runs), len(steps)), np.nan)
    for a, rows in enumerate(runs):
        vals = [row["best_reward"] for row in rows]
        grid[a, : len(vals)] = vals
        grid[a, len(vals):] = vals[-1]
    return steps, grid.mean(axis=0).tolist(), grid.std(axis=0).tolist()


def aggregate(records) -> dict[tuple[str, str], Aggregate]:
    """Group by ``(solver, scenario)``; order of ``records`` does not matter."""
    groups: dict[tuple[str, str], list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.solver, rec.scenario), []).append(rec)
    out = {}
    for key, recs in sorted(groups.items()):
        recs = sorted(recs, key=lambda r: r.seed)
        ok = [r for r in recs if r.success]
        steps, mean, std = _curve(recs)
        out[key] = Aggregate(
            solver=key[0],
            scenario=key[1],
            trials=len(recs),
            successes=len(ok),
            success_rate=len(ok) / len(recs) if recs else None,
            runtime=_stats([r.first_success_time for r in ok]),
            rollouts_to_success=_stats([r.first_success_rollouts for r in ok]),
            curve_steps=steps,
            curve_mean=mean,
            curve_std=std,
            errors=sum(r.error is not None for r in recs),
        )
    return out


def empty_aggregate(solver: str, scenario: str) -> Aggregate:
    return Aggregate(solver, scenario, 0, 0, None, None, None, [], [], [])


def summary_dict(aggs: dict) -> dict:
    return {f"{s}/{sc}": dataclasses.asdict(a) for (s, sc), a in aggs.items()}


def write_summary(aggs: dict, path) -> None:
    Path(path).write_text(json.dumps(summary_dict(aggs), indent=2))


def recompute_success_rates(directory) -> dict[str, float]:
    """Success rate per ``solver/scenario`` recomputed from record CSVs alone."""
    records = [TrialRecord.read_csv(p) for p in sorted(Path(directory).glob("*.csv"))]
    return {f"{s}/{sc}": a.success_rate for (s, sc), a in aggregate(records).items()}


def success_within(record: TrialRecord, iterations: int) -> bool:
    return any(row["success"] for row in record.rows if row["iteration"] <= iterations)


def sensitivity_grid(scenario, N_list, iteration_list, seeds,
                     denoiser: DenoiserConfig | None = None, model: DynamicsModel | None = None,
                     workers: int = 1) -> np.ndarray:
    """Success rates, rows = iteration budgets, columns = denoising steps.

    ``denoiser`` supplies every knob except ``N`` and ``seed``.

    One run per ``(N, seed)`` with the largest iteration budget covers every
    smaller budget, since iterations draw from seed- and index-keyed streams.
    """
    N_list, iteration_list, seeds = list(N_list), list(iteration_list), list(seeds)
    if not (N_list and iteration_list and seeds):
        raise ValueError("sensitivity grid axes must be non-empty")
    model = model or DynamicsModel.from_kind(scenario.model_kind)
    rates = np.zeros((len(iteration_list), len(N_list)))
    for c, N in enumerate(N_list):
        dcfg = dataclasses.replace(denoiser or DenoiserConfig(), N=N)
        spec = SolverSpec("d4orm", OptimizerConfig(max_iterations=max(iteration_list),
                                                   stop_on_success=True, denoiser=dcfg))
        trials = [run_trial(spec, scenario, s, model, workers=workers) for s in seeds]
        for r, iters in enumerate(iteration_list):
            rates[r, c] = np.mean([success_within(t, iters) for t in trials])
    return rates
