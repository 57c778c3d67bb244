"""Compare D4orm, MPPI and CEM on an antipodal circle at equal batch size.

    python3 scripts/run_baselines.py --n 8 --seeds 0-9 --M 512 --out runs/baselines
"""

import argparse
from pathlib import Path

from d4orm.bench import aggregate, default_spec, run_trial, write_summary
from d4orm.dynamics import DynamicsModel
from d4orm.scenarios import antipodal_circle


def seed_range(text):
    lo, _, hi = text.partition("-")
    return list(range(int(lo), int(hi or lo) + 1))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--diameter", type=float, default=4.0)
    p.add_argument("--model", default="holo2d")
    p.add_argument("--M", type=int, default=512)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--budget-steps", type=int, default=1000)
    p.add_argument("--seeds", type=seed_range, default=seed_range("0-9"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="runs/baselines")
    args = p.parse_args()

    sc = antipodal_circle(args.n, args.diameter, args.model)
    model = DynamicsModel.from_kind(sc.model_kind)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for name in ("d4orm", "mppi", "cem"):
        spec = default_spec(name, M=args.M, budget_steps=args.budget_steps, N=args.N)
        for seed in args.seeds:
            rec = run_trial(spec, sc, seed, model, workers=args.workers)
            rec.write_csv(out)
            records.append(rec)
            print(f"{name:6s} seed={seed} success={rec.success} "
                  f"rollouts={rec.first_success_rollouts}", flush=True)
    aggs = aggregate(records)
    write_summary(aggs, out / "summary.json")
    for (solver, _), a in aggs.items():
        med = a.rollouts_to_success["median"] if a.rollouts_to_success else None
        print(f"{solver:6s} rate={a.success_rate:.2f} median_rollouts={med}")


if __name__ == "__main__":
    main()
