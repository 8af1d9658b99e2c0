"""Iteration drivers: BiFRB, iFRB, FRB and the DR / inertial Tseng baselines.

One step of the Bregman inertial forward-reflected-backward method reads

    y_k     = x_k + lam_{k-1} (grad g(x_{k-1}) - grad g(x_k))
    omega_k = grad g(x_k) + (alpha_k / lam_k) (x_{k-1} - x_k)
    x_{k+1} = argmin f(x) + <x - y_k, omega_k> + D_h(x, y_k) / lam_k

and iFRB is the same step with the Euclidean kernel.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Optional

import numpy as np

from .kernels import EUCLIDEAN, KernelSpec, grad_h
from .params import (MeritParams, StepPlan, next_merit_params)

METHODS = ("bifrb", "ifrb", "frb", "dr", "itseng")
BIFRB_KERNEL = KernelSpec(0.1, 2.51)


class SolverError(RuntimeError):
    pass


class NonFiniteIterate(SolverError):
    pass


class SubproblemFailure(SolverError):
    pass


@dataclass(frozen=True)
class SolverState:
    x_prev: np.ndarray
    x_cur: np.ndarray
    grad_prev: np.ndarray
    grad_cur: np.ndarray
    g_cur: float
    lambda_prev: float
    lambda_cur: float
    merit: Optional[MeritParams]
    k: int = 0
    # quantities of the step that produced x_cur
    y: Optional[np.ndarray] = None
    alpha_used: float = 0.0
    x_back: Optional[np.ndarray] = None
    aux: Optional[np.ndarray] = None


@dataclass
class IterationRecord:
    k: int
    objective: float
    merit: float
    step_norm: float
    m1: float
    descent_slack: float
    stationarity_residual: float
    residual_bound: float
    ratio: float
    elapsed: float


@dataclass(frozen=True)
class TerminationSpec:
    tol: float = 1e-10
    max_iter: int = 10001

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class Trace:
    method: str
    records: list = field(default_factory=list)
    x: Optional[np.ndarray] = None
    converged: bool = False
    iterates: Optional[list] = None
    plan: Optional[StepPlan] = None
    state: Optional[SolverState] = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective if self.records else math.nan

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.records)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


def ratio_change(x_next, x_cur, x_prev) -> float:
    """Relative successive change used by the stopping rule."""
    num = max(np.linalg.norm(x_next - x_cur), np.linalg.norm(x_cur - x_prev))
    den = max(1.0, np.linalg.norm(x_cur), np.linalg.norm(x_prev))
    return float(num / den)


def merit_value(F_value: float, p: float, x_next, x_cur) -> float:
    """H_p(x_next, x_cur) = F(x_next) + p |x_next - x_cur|^2."""
    d = np.asarray(x_next, dtype=float) - np.asarray(x_cur, dtype=float)
    return float(F_value + p * np.dot(d, d))


def initial_state(problem, x0=None, x_init_prev=None, lam_init: float = 1.0,
                  p_initial: Optional[float] = None) -> SolverState:
    x0 = np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    xm = x0.copy() if x_init_prev is None else np.asarray(x_init_prev, dtype=float).copy()
    gm = problem.value_and_grad(xm)[1]
    g0, gr0 = problem.value_and_grad(x0)
    merit = None if p_initial is None else MeritParams.initial(p_initial)
    return SolverState(xm, x0, gm, gr0, g0, lam_init, lam_init, merit, 0, aux=x0.copy())


def _check_finite(x, k):
    if not np.all(np.isfinite(x)) or np.max(np.abs(x), initial=0.0) > 1e150:
        raise NonFiniteIterate(f"non-finite iterate at k={k}; stepsize likely invalid")


# -------------------------------------------------------------------- steps

def _frb_core(state: SolverState, problem, kernel: KernelSpec, lam: float,
              alpha: float, plan: Optional[StepPlan]) -> SolverState:
    x_prev, x_cur = state.x_prev, state.x_cur
    y = x_cur + state.lambda_prev * (state.grad_prev - state.grad_cur)
    omega = state.grad_cur + (alpha / lam) * (x_prev - x_cur)
    _check_finite(y, state.k)
    try:
        x_next = problem.breg_solve(y, omega, lam, kernel)
    except (ArithmeticError, RuntimeError) as exc:
        raise SubproblemFailure(f"subproblem failed at k={state.k}: {exc}") from exc
    _check_finite(x_next, state.k)
    g_next, grad_next = problem.value_and_grad(x_next)
    merit = state.merit
    if merit is not None and plan is not None:
        merit = next_merit_params(merit, state.lambda_prev, lam, alpha, plan.abc)
    return SolverState(x_cur, x_next, state.grad_cur, grad_next, g_next, lam, lam, merit,
                       state.k + 1, y=y, alpha_used=alpha, x_back=x_prev)


def bifrb_step(state: SolverState, problem, kernel: KernelSpec, plan: StepPlan) -> SolverState:
    k = state.k
    return _frb_core(state, problem, kernel, plan.lambda_at(k), plan.alpha_at(k), plan)


def ifrb_step(state: SolverState, problem, plan: StepPlan) -> SolverState:
    k = state.k
    return _frb_core(state, problem, EUCLIDEAN, plan.lambda_at(k), plan.alpha_at(k), plan)


def frb_step(state: SolverState, problem, lam: float) -> SolverState:
    return _frb_core(state, problem, EUCLIDEAN, lam, 0.0, None)


def dr_prox_g(problem, z, gamma: float) -> np.ndarray:
    """prox of gamma * dist^2(., C)/2: z + gamma/(1+gamma) (Proj_C z - z)."""
    return z + (gamma / (1.0 + gamma)) * (problem.proj_affine(z) - z)


def dr_step(state: SolverState, problem, gamma: float) -> SolverState:
    """y = prox_{gamma g}(z), x = prox_{gamma f}(2y - z), z+ = z + x - y.

    ``state.aux`` carries z; ``x_cur`` is the reported iterate x.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    z = state.aux
    y = dr_prox_g(problem, z, gamma)
    x = problem.prox_f(2.0 * y - z, gamma)
    _check_finite(x, state.k)
    z_next = z + x - y
    g_next, grad_next = problem.value_and_grad(x)
    return SolverState(state.x_cur, x, state.grad_cur, grad_next, g_next, gamma, gamma, None,
                       state.k + 1, y=y, x_back=state.x_prev, aux=z_next)


def itseng_step(state: SolverState, problem, lam: float, alpha: float) -> SolverState:
    """w = x + alpha (x - x_prev); p = prox(w - lam grad g(w)); x+ = p + lam (grad g(w) - grad g(p)).

    ``state.aux`` is set to the prox point p, which lies in dom f.
    """
    x_prev, x_cur = state.x_prev, state.x_cur
    w = x_cur + alpha * (x_cur - x_prev)
    _check_finite(w, state.k)
    gw = state.grad_cur if alpha == 0.0 else problem.value_and_grad(w)[1]
    p = problem.prox_f(w - lam * gw, lam)
    _check_finite(p, state.k)
    g_p, grad_p = problem.value_and_grad(p)
    x_next = p + lam * (gw - grad_p)
    _check_finite(x_next, state.k)
    grad_next = problem.value_and_grad(x_next)[1]
    return SolverState(x_cur, x_next, state.grad_cur, grad_next, g_p, lam, lam, None,
                       state.k + 1, y=w, alpha_used=alpha, x_back=x_prev, aux=p)


# -------------------------------------------------------------- diagnostics

def residual_constant(l_grad_h: float, l_grad_g: float, p: float,
                      lam_lo: float, lam_hi: float) -> float:
    """sqrt(2) max{L_h/lam_lo + L_g + 6p, (L_h L_g lam_hi + 1)/lam_lo}."""
    return math.sqrt(2.0) * max(l_grad_h / lam_lo + l_grad_g + 6.0 * p,
                                (l_grad_h * l_grad_g * lam_hi + 1.0) / lam_lo)


def stationarity_residual(state: SolverState, problem, kernel: KernelSpec, p_bar: float,
                          lambda_lo: Optional[float] = None,
                          lambda_hi: Optional[float] = None) -> tuple[float, float]:
    """Norm of (A_k, B_k) in the limiting subdifferential of H_p at z_k, and its bound.

    ``state`` is the state right after the step producing x_{k+1}. Returns
    (|(A_k, B_k)|, M_2 |z_k - z_{k-1}|).
    """
    x_next, x_k, x_km1 = state.x_cur, state.x_prev, state.x_back
    lam = state.lambda_prev
    u = ((grad_h(kernel, state.y) - grad_h(kernel, x_next)) / lam - state.grad_prev
         + state.alpha_used * (x_k - x_km1) / lam)
    d = x_next - x_k
    A = u + state.grad_cur + 2.0 * p_bar * d
    B = -2.0 * p_bar * d
    res = math.sqrt(float(np.dot(A, A) + np.dot(B, B)))
    lo = lam if lambda_lo is None else lambda_lo
    hi = lam if lambda_hi is None else lambda_hi
    m2 = residual_constant(kernel.l_grad, problem.l_grad_g, p_bar, lo, hi)
    dz = math.sqrt(float(np.dot(d, d) + np.dot(x_k - x_km1, x_k - x_km1)))
    return res, m2 * dz


# ------------------------------------------------------------------- driver

Hook = Callable[[SolverState, IterationRecord], Optional[bool]]


def default_plan(method: str, problem, kernel: Optional[KernelSpec] = None) -> StepPlan:
    lg = problem.l_grad_g
    if method == "bifrb":
        return StepPlan.bifrb_fixed(kernel or BIFRB_KERNEL, lg, alpha=0.9)
    if method == "ifrb":
        return StepPlan.ifrb_fixed(lg, alpha_bar=0.49)
    if method == "frb":
        return StepPlan.ifrb_fixed(lg, alpha_bar=0.0)
    raise ValueError(f"no merit plan for method {method!r}")


HEURISTICS = ("none", "descent", "divergence")


def _heuristic_name(heuristic) -> str:
    if heuristic is True:
        return "descent"
    if heuristic in (False, None):
        return "none"
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}; choose from {HEURISTICS}")
    return heuristic


def run_solver(problem, method: str = "bifrb", plan: Optional[StepPlan] = None,
               termination: TerminationSpec = TerminationSpec(),
               hooks: Iterable[Hook] = (), *, kernel: Optional[KernelSpec] = None,
               x0=None, x_init_prev=None, gamma: float = 0.5,
               lam: Optional[float] = None, alpha: float = 0.49,
               heuristic=False, heuristic_scale: Optional[float] = None,
               store_iterates: bool = False, diagnostics: bool = True) -> Trace:
    """Run ``method`` from x_{-1} = x_0 = x0 (default 0) until the relative change
    drops below ``termination.tol`` or ``termination.max_iter`` steps are taken.

    ``heuristic`` enlarges the base stepsize (certified lambda, DR gamma or
    Tseng lambda) by ``heuristic_scale`` and shrinks it back toward the base:

      "descent"     halve and redo the step while H_{p_{-1}} increases (merit
                    methods only; default scale 10)
      "divergence"  halve for later steps whenever |x_{k+1} - x_k| > 1000/(k+1)
                    or |x_{k+1}| > 1e10 (default scale 150)

    The scale never drops below 1. A hook returning True stops the run early.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    heuristic = _heuristic_name(heuristic)
    hooks = list(hooks)
    merit_based = method in ("bifrb", "ifrb", "frb")
    if heuristic == "descent" and not merit_based:
        raise ValueError("the descent heuristic needs a merit-based method")
    if method == "bifrb":
        kernel = kernel or BIFRB_KERNEL
    elif method in ("ifrb", "frb"):
        kernel = EUCLIDEAN
    if merit_based and plan is None:
        plan = default_plan(method, problem, kernel)
    if method == "itseng" and lam is None:
        lam = 0.95 / (2.0 * problem.l_grad_g)
    if heuristic_scale is None:
        heuristic_scale = {"none": 1.0, "descent": 10.0, "divergence": 150.0}[heuristic]
    if heuristic_scale < 1.0:
        raise ValueError("heuristic_scale must be >= 1")
    scale = 1.0 if heuristic == "none" else float(heuristic_scale)

    lam_init = plan.lambda_at(-1) if merit_based else (gamma if method == "dr" else lam)
    state = initial_state(problem, x0, x_init_prev, lam_init * scale,
                          plan.p_initial if merit_based else None)
    trace = Trace(method, plan=plan)
    if store_iterates:
        trace.iterates = [state.x_cur.copy()]

    F_cur = problem.f(state.x_cur) + state.g_cur
    H_prev = merit_value(F_cur, state.merit.p_cur, state.x_cur, state.x_prev) if merit_based else math.nan
    scale_max = scale
    t0 = time.perf_counter()

    while trace.iterations < termination.max_iter:
        k = state.k
        if merit_based:
            new = _merit_step(state, problem, kernel, plan, scale)
            if heuristic == "descent" and scale > 1.0:
                new, scale = _heuristic_accept(state, new, problem, kernel, plan, scale)
        elif method == "dr":
            new = dr_step(state, problem, gamma * scale)
        else:
            new = itseng_step(state, problem, lam * scale, alpha)

        report_x = new.aux if method == "itseng" else new.x_cur
        F_next = problem.f(report_x) + new.g_cur
        ratio = ratio_change(new.x_cur, state.x_cur, state.x_prev)
        rec = IterationRecord(k, F_next, math.nan, math.nan, math.nan, math.nan, math.nan,
                              math.nan, ratio, time.perf_counter() - t0)
        d_new = new.x_cur - new.x_prev
        d_old = state.x_cur - state.x_prev
        rec.step_norm = math.sqrt(float(np.dot(d_new, d_new) + np.dot(d_old, d_old)))
        if merit_based:
            m = new.merit
            H_new = merit_value(F_next, m.p_cur, new.x_cur, new.x_prev)
            rec.merit = H_new
            rec.m1 = m.m1_cur
            rec.descent_slack = H_prev - H_new - m.m1_cur * rec.step_norm ** 2
            H_prev = H_new
            if diagnostics:
                res, bound = stationarity_residual(
                    new, problem, kernel, max(m.p_bar, 0.0),
                    min(plan.lambda_lo, new.lambda_prev),
                    max(plan.lambda_hi * scale_max, new.lambda_prev))
                rec.stationarity_residual, rec.residual_bound = res, bound
        trace.records.append(rec)
        if store_iterates:
            trace.iterates.append(new.x_cur.copy())
        if heuristic == "divergence" and scale > 1.0:
            if (np.linalg.norm(d_new) > 1000.0 / (k + 1)
                    or np.linalg.norm(new.x_cur) > 1e10):
                scale = max(1.0, scale / 2.0)
        state = new
        stop = False
        for hook in hooks:
            stop = bool(hook(state, rec)) or stop
        if ratio < termination.tol:
            trace.converged = True
            break
        if stop:
            break

    trace.x = (state.aux if method == "itseng" else state.x_cur).copy()
    trace.state = state
    return trace


def _merit_step(state, problem, kernel, plan, scale):
    k = state.k
    lam = plan.lambda_at(k) * scale
    return _frb_core(state, problem, kernel, lam, plan.alpha_at(k), plan)


def _heuristic_accept(state, new, problem, kernel, plan, scale):
    """Accept an enlarged step only if H_{p_{-1}} does not increase; else halve."""
    p = plan.p_initial
    F_old = problem.f(state.x_cur) + state.g_cur
    H_old = merit_value(F_old, p, state.x_cur, state.x_prev)

    def ok(s):
        F_new = problem.f(s.x_cur) + s.g_cur
        return merit_value(F_new, p, s.x_cur, s.x_prev) <= H_old

    while scale > 1.0 and not ok(new):
        scale = max(1.0, scale / 2.0)
        new = _merit_step(state, problem, kernel, plan, scale)
    return new, scale
