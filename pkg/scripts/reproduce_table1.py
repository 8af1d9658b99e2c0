"""Run the 3x3 size grid at R = 1 and R = 1000 and print a Markdown table.

    python scripts/reproduce_table1.py --scale 0.25 --trials 5
    python scripts/reproduce_table1.py --trials 50 --out table1.csv --format csv

Full scale with 50 trials takes hours on one core.
"""
import argparse
import os
import sys

from bifrb.bench import TABLE1_R, BenchConfig, render, run_benchmark, table1_sizes


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--scale", type=float, default=0.25)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--b-mode", default="sparse")
    ap.add_argument("--heuristic", default="divergence")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--format", default="md", choices=("csv", "json", "md"))
    ap.add_argument("--out")
    args = ap.parse_args()

    rows = []
    for R in TABLE1_R:
        cfg = BenchConfig(sizes=table1_sizes(args.scale), radius_R=R, trials=args.trials,
                          master_seed=args.seed, b_mode=args.b_mode,
                          heuristic=args.heuristic, jobs=args.jobs)
        rows += run_benchmark(cfg, log=sys.stderr)
    text = render(rows, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")


if __name__ == "__main__":
    main()
