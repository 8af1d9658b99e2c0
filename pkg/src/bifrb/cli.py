"""``bench`` command line: ``bench run`` and ``bench table1``."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .bench import (FORMATS, TABLE1_R, BenchConfig, render, run_benchmark,
                    table1_sizes)
from .problems import B_MODES
from .solvers import HEURISTICS, METHODS


def parse_sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        try:
            m, n = tok.split("x")
            out.append((int(m), int(n)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad size {tok!r}; expected MxN") from None
    if not out:
        raise argparse.ArgumentTypeError("no sizes given")
    return out


def parse_solvers(text: str) -> tuple[str, ...]:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in names if s not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown solvers {bad}; choose from {','.join(METHODS)}")
    return names


def _common(p: argparse.ArgumentParser):
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--solvers", type=parse_solvers, default=METHODS)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10001)
    p.add_argument("--b-mode", choices=B_MODES, default="sparse")
    p.add_argument("--heuristic", choices=HEURISTICS, default="divergence",
                   help="stepsize enlargement scheme (none = certified stepsizes only)")
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker processes over trials")
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="benchmark explicit sizes")
    run.add_argument("--sizes", type=parse_sizes, required=True, help="e.g. 100x4000,200x5000")
    run.add_argument("--R", dest="radius_R", type=float, default=1.0)
    _common(run)
    t1 = sub.add_parser("table1", help="the 3x3 size grid at R = 1 and R = 1000")
    t1.add_argument("--scale", type=float, default=1.0,
                    help="multiply every dimension by this factor, rounding up")
    _common(t1)
    return parser


def _config(args, sizes, radius_R) -> BenchConfig:
    return BenchConfig(sizes=sizes, radius_R=radius_R, trials=args.trials,
                       solvers=args.solvers, master_seed=args.seed, tol=args.tol,
                       max_iter=args.max_iter, b_mode=args.b_mode, heuristic=args.heuristic,
                       out_path=args.out, format=args.format, jobs=max(1, args.jobs))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = None if args.quiet else sys.stderr
    try:
        if args.command == "run":
            configs = [_config(args, args.sizes, args.radius_R)]
        else:
            sizes = table1_sizes(args.scale)
            configs = [_config(args, sizes, R) for R in TABLE1_R]
    except ValueError as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return 2
    rows = []
    for cfg in configs:
        # the size index, not R, feeds the seed, so both R blocks share instances
        rows.extend(run_benchmark(cfg, log=log))
    text = render(rows, configs[0].format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    empty = [r for r in rows if r.trials_used == 0]
    for r in empty:
        print(f"bench: no successful trials for {r.m}x{r.n} R={r.radius_R:g} {r.solver}",
              file=sys.stderr)
    return 1 if empty else 0


if __name__ == "__main__":
    sys.exit(main())
