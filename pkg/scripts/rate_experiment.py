"""Fit the geometric decay of |x_k - x_final| for BiFRB on planted instances.

    python scripts/rate_experiment.py --m 30 --n 200 --instances 10
    python scripts/rate_experiment.py --alpha nesterov --trace-dir traces/
"""
import argparse
import os

import numpy as np

from bifrb.bench import rate_fit
from bifrb.params import StepPlan
from bifrb.problems import generate_instance
from bifrb.solvers import BIFRB_KERNEL, run_solver


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--m", type=int, default=30)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--R", type=float, default=1.0)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--alpha", default="0.9", help="constant in [0, 1) or 'nesterov'")
    ap.add_argument("--tail", type=float, default=0.5)
    ap.add_argument("--b-mode", default="planted")
    ap.add_argument("--trace-dir", help="write one JSON-lines trace per instance here")
    args = ap.parse_args()

    alpha = args.alpha if args.alpha == "nesterov" else float(args.alpha)
    plan = StepPlan.bifrb_fixed(BIFRB_KERNEL, 1.0, alpha=alpha)
    print(f"lambda={plan.lambda_at(0):.6g} p_-1={plan.p_initial:.6g} alpha={args.alpha}")
    print("seed  iters  converged  F_final       Q         r2")
    qs = []
    for seed in range(args.instances):
        inst = generate_instance(args.m, args.n, radius_R=args.R, seed=seed, b_mode=args.b_mode)
        tr = run_solver(inst, "bifrb", plan=plan, store_iterates=True)
        fit = rate_fit(tr, tail_fraction=args.tail)
        qs.append(fit.Q)
        print(f"{seed:4d} {tr.iterations:6d} {str(tr.converged):>10} {tr.final_objective:10.3e} "
              f"{fit.Q:9.6f} {fit.r_squared:8.4f}")
        if args.trace_dir:
            os.makedirs(args.trace_dir, exist_ok=True)
            tr.write_jsonl(os.path.join(args.trace_dir, f"bifrb_seed{seed}.jsonl"))
    print(f"median Q {np.median(qs):.6f}")


if __name__ == "__main__":
    main()
