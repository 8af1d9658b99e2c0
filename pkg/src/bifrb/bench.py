"""Benchmark harness for the sparse feasibility experiment and the rate fit.

Each (size, trial) cell draws one instance from a seed that depends only on
(master_seed, size index, trial index) and runs every requested solver on it.
Rows report the ceiling of the mean iteration count and the smallest terminal
objective over the trials that finished without error.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .problems import B_MODES, generate_instance
from .solvers import HEURISTICS, METHODS, SolverError, TerminationSpec, Trace, run_solver

FORMATS = ("csv", "json", "md")
CSV_COLUMNS = ("m", "n", "R", "solver", "iter_mean_ceil", "fval_min", "trials_used")
TABLE1_M = (100, 200, 300)
TABLE1_N = (4000, 5000, 6000)
TABLE1_R = (1.0, 1000.0)


class EmptyInput(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass
class BenchConfig:
    sizes: list
    radius_R: float = 1.0
    trials: int = 50
    solvers: tuple = METHODS
    master_seed: int = 0
    tol: float = 1e-10
    max_iter: int = 10001
    b_mode: str = "sparse"
    heuristic: str = "divergence"
    out_path: Optional[str] = None
    format: str = "csv"
    jobs: int = 1

    def __post_init__(self):
        self.sizes = [tuple(int(v) for v in s) for s in self.sizes]
        self.solvers = tuple(self.solvers)
        if not self.sizes:
            raise ValueError("sizes must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for m, n in self.sizes:
            if not 1 <= m < n:
                raise ValueError(f"need 1 <= m < n, got {m}x{n}")
        bad = [s for s in self.solvers if s not in METHODS]
        if bad or not self.solvers:
            raise ValueError(f"unknown solvers {bad}; choose from {METHODS}")
        if self.b_mode not in B_MODES:
            raise ValueError(f"b_mode must be one of {B_MODES}")
        if self.heuristic not in HEURISTICS:
            raise ValueError(f"heuristic must be one of {HEURISTICS}")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")
        if not self.radius_R > 0:
            raise ValueError("radius_R must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        TerminationSpec(self.tol, self.max_iter)


@dataclass(frozen=True)
class BenchmarkRow:
    m: int
    n: int
    radius_R: float
    solver: str
    iter_mean_ceil: Optional[int]
    fval_min: float
    trials_used: int


@dataclass(frozen=True)
class TrialResult:
    size_idx: int
    trial_idx: int
    solver: str
    iterations: int = 0
    fval: float = math.nan
    error: Optional[str] = None


def trial_seed(master_seed: int, size_idx: int, trial_idx: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(size_idx, trial_idx))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def aggregate(iters: Sequence[int], fvals: Sequence[float]) -> tuple[int, float]:
    if len(iters) == 0 or len(fvals) == 0:
        raise EmptyInput("nothing to aggregate")
    if len(iters) != len(fvals):
        raise ValueError("iters and fvals differ in length")
    # exact integer ceiling of the mean, avoiding float round-off
    total = sum(int(i) for i in iters)
    return -(-total // len(iters)), float(min(fvals))


def _solver_kwargs(heuristic: str, solver: str) -> dict:
    if heuristic == "descent" and solver in ("dr", "itseng"):
        return {"heuristic": "none"}
    return {"heuristic": heuristic}


def _run_cell(args) -> list[TrialResult]:
    cfg, size_idx, trial_idx = args
    m, n = cfg.sizes[size_idx]
    seed = trial_seed(cfg.master_seed, size_idx, trial_idx)
    out = []
    try:
        inst = generate_instance(m, n, None, cfg.radius_R, seed, cfg.b_mode)
    except Exception as exc:  # instance failure voids every solver on this trial
        msg = f"instance: {exc}"
        return [TrialResult(size_idx, trial_idx, s, error=msg) for s in cfg.solvers]
    term = TerminationSpec(cfg.tol, cfg.max_iter)
    for solver in cfg.solvers:
        try:
            tr = run_solver(inst, solver, termination=term, diagnostics=False,
                            **_solver_kwargs(cfg.heuristic, solver))
            fval = tr.final_objective
            if not math.isfinite(fval):
                raise SolverError(f"non-finite objective {fval}")
            out.append(TrialResult(size_idx, trial_idx, solver, tr.iterations, fval))
        except (SolverError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(TrialResult(size_idx, trial_idx, solver, error=f"{type(exc).__name__}: {exc}"))
    return out


def run_trials(config: BenchConfig) -> list[TrialResult]:
    cells = [(config, i, t) for i in range(len(config.sizes)) for t in range(config.trials)]
    if config.jobs == 1:
        chunks = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_run_cell, cells))
    return [r for chunk in chunks for r in chunk]


def rows_from_trials(config: BenchConfig, results: Sequence[TrialResult]) -> list[BenchmarkRow]:
    rows = []
    for i, (m, n) in enumerate(config.sizes):
        for solver in config.solvers:
            ok = sorted((r for r in results
                         if r.size_idx == i and r.solver == solver and r.error is None),
                        key=lambda r: r.trial_idx)
            if ok:
                it, fv = aggregate([r.iterations for r in ok], [r.fval for r in ok])
            else:
                it, fv = None, math.nan
            rows.append(BenchmarkRow(m, n, config.radius_R, solver, it, fv, len(ok)))
    return rows


def run_benchmark(config: BenchConfig, log=None) -> list[BenchmarkRow]:
    t0 = time.perf_counter()
    results = run_trials(config)
    for r in results:
        if r.error is not None and log is not None:
            print(f"trial failed: size={config.sizes[r.size_idx]} trial={r.trial_idx} "
                  f"solver={r.solver}: {r.error}", file=log)
    rows = rows_from_trials(config, results)
    if log is not None:
        print(f"wall time {time.perf_counter() - t0:.2f}s", file=log)
    return rows


# ----------------------------------------------------------------- rendering

def _g6(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.6g" % v


def _row_fields(row: BenchmarkRow) -> list:
    return [row.m, row.n, row.radius_R, row.solver, row.iter_mean_ceil, row.fval_min,
            row.trials_used]


def render_csv(rows: Sequence[BenchmarkRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _g6(v) for v in _row_fields(row)])
    return buf.getvalue()


def _json_num(v):
    if v is None or isinstance(v, (int, np.integer)):
        return v
    if not math.isfinite(v):
        return None
    return float("%.6g" % v)


def render_json(rows: Sequence[BenchmarkRow]) -> str:
    objs = [{k: (v if isinstance(v, str) else _json_num(v))
             for k, v in zip(CSV_COLUMNS, _row_fields(row))} for row in rows]
    return json.dumps(objs, indent=2) + "\n"


def render_md(rows: Sequence[BenchmarkRow]) -> str:
    lines = ["| " + " | ".join(CSV_COLUMNS) + " |",
             "|" + "---|" * len(CSV_COLUMNS)]
    for row in rows:
        cells = [v if isinstance(v, str) else _g6(v) for v in _row_fields(row)]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render(rows: Sequence[BenchmarkRow], fmt: str = "csv") -> str:
    return {"csv": render_csv, "json": render_json, "md": render_md}[fmt](rows)


def write_report(rows, config: BenchConfig, stream=None) -> str:
    text = render(rows, config.format)
    if config.out_path:
        with open(config.out_path, "w") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)
    return text


def table1_sizes(scale: float = 1.0) -> list[tuple[int, int]]:
    if not scale > 0:
        raise ValueError("scale must be positive")
    return [(math.ceil(m * scale), math.ceil(n * scale)) for m in TABLE1_M for n in TABLE1_N]


# ------------------------------------------------------------------ rate fit

@dataclass(frozen=True)
class RateFit:
    Q: float
    r_squared: float
    slope: float
    n_points: int


def fit_geometric(errors, tail_fraction: float = 0.5, floor: float = 1e-14) -> RateFit:
    """Least squares fit of log e_k = c + k log Q over the last tail_fraction of k."""
    e = np.asarray(errors, dtype=float)
    if e.size < 20:
        raise InsufficientData(f"need at least 20 errors, got {e.size}")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    k = np.arange(e.size)
    start = int(math.floor(e.size * (1.0 - tail_fraction)))
    k, e = k[start:], e[start:]
    keep = e >= floor
    k, e = k[keep], e[keep]
    if k.size < 3:
        raise InsufficientData("fewer than 3 usable points in the tail")
    y = np.log(e)
    slope, icpt = np.polyfit(k, y, 1)
    resid = y - (slope * k + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(math.exp(slope)), r2, float(slope), int(k.size))


def rate_fit(trace: Trace, reference=None, tail_fraction: float = 0.5) -> RateFit:
    """Geometric fit of |x_k - x*| along a trace run with ``store_iterates=True``.

    ``reference`` defaults to the final iterate.
    """
    if trace.iterates is None:
        raise InsufficientData("trace has no stored iterates; run with store_iterates=True")
    if trace.iterations < 20:
        raise InsufficientData(f"trace too short ({trace.iterations} < 20)")
    X = np.asarray(trace.iterates, dtype=float)
    ref = X[-1] if reference is None else np.asarray(reference, dtype=float)
    return fit_geometric(np.linalg.norm(X - ref, axis=1), tail_fraction)
