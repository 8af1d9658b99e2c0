"""Safeguarded bisection + Newton for nondecreasing scalar equations."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional


class RootError(RuntimeError):
    pass


class NoSignChange(RootError):
    pass


class MaxIterExceeded(RootError):
    pass


@dataclass(frozen=True)
class RootQuery:
    """Find t in [lo, hi] with derivative(t) = 0 for a nondecreasing function.

    ``fprime`` is the analytic derivative of ``derivative`` (optional). When
    absent, only bisection steps are taken.
    """
    derivative: Callable[[float], float]
    lo: float
    hi: float
    fprime: Optional[Callable[[float], float]] = None
    tol_x: float = 1e-14
    tol_f: float = 1e-12
    max_iter: int = 200


def find_root_increasing(query: RootQuery) -> float:
    fun, fp = query.derivative, query.fprime
    lo, hi = float(query.lo), float(query.hi)
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    flo, fhi = fun(lo), fun(hi)
    if flo > query.tol_f or fhi < -query.tol_f:
        raise NoSignChange(f"f({lo})={flo:g}, f({hi})={fhi:g}")
    if abs(flo) <= query.tol_f and abs(flo) <= abs(fhi):
        return lo
    if abs(fhi) <= query.tol_f:
        return hi

    t = 0.5 * (lo + hi)
    for _ in range(query.max_iter):
        ft = fun(t)
        if abs(ft) <= query.tol_f:
            return t
        if ft < 0:
            lo = t
        else:
            hi = t
        if hi - lo <= query.tol_x * max(1.0, abs(t)):
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket is down to adjacent floats
            return t
        t_new = mid
        if fp is not None:
            d = fp(t)
            if d > 0:
                cand = t - ft / d
                if lo < cand < hi:
                    t_new = cand
        t = t_new
    raise MaxIterExceeded(f"no convergence in {query.max_iter} iterations; "
                          f"bracket [{lo!r}, {hi!r}]")

