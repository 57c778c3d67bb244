"""Success rate over a grid of denoising steps N and iteration budgets.

    python3 scripts/run_sensitivity.py --model diffdrive --N 25,50,100 --iterations 1,2,5,10
"""

import argparse
import csv
from pathlib import Path

from d4orm.bench import sensitivity_grid
from d4orm.denoiser import DenoiserConfig
from d4orm.scenarios import antipodal_circle


def ints(text):
    return [int(v) for v in text.split(",")]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--model", default="holo2d")
    p.add_argument("--M", type=int, default=512)
    p.add_argument("--N", type=ints, default=[25, 50, 100])
    p.add_argument("--iterations", type=ints, default=[1, 2, 5, 10])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="runs/sensitivity.csv")
    args = p.parse_args()

    sc = antipodal_circle(args.n, 4.0, args.model)
    rates = sensitivity_grid(sc, args.N, args.iterations, range(args.seeds),
                             DenoiserConfig(M=args.M), workers=args.workers)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iterations\\N", *args.N])
        for iters, row in zip(args.iterations, rates):
            w.writerow([iters, *row.tolist()])
            print(f"iters={iters:3d} " + " ".join(f"{v:.2f}" for v in row))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
