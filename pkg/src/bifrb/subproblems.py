"""Solvers for the Bregman proximal subproblem

    T_lam(u) = argmin_x  f(x) + <x - u, omega> + (1/lam) D_h(x, u)

with the kernel family of :mod:`bifrb.kernels`, plus the Euclidean proximal
maps used by the Euclidean methods and the baselines.

Every Bregman solve works on p = lam*omega - grad h(u); the subproblem is then
argmin_x lam*f(x) + <x, p> + h(x).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import KernelSpec, bregman_distance, grad_h, safe_norm
from .scalar_root import RootQuery, find_root_increasing


class InvalidRank(ValueError):
    pass


@dataclass(frozen=True)
class SubproblemQuery:
    u: np.ndarray
    omega: np.ndarray
    lam: float
    kernel: KernelSpec

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"stepsize must be positive, got {self.lam}")


def p_lambda(query: SubproblemQuery) -> np.ndarray:
    return query.lam * np.asarray(query.omega, dtype=float) - grad_h(query.kernel, query.u)


def subproblem_objective(query: SubproblemQuery, x, f_value: float = 0.0) -> float:
    """f(x) + <x - u, omega> + D_h(x, u)/lam, with f(x) supplied by the caller."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(query.u, dtype=float)
    return (f_value + float(np.dot(x - u, query.omega))
            + bregman_distance(query.kernel, x, u) / query.lam)


# ---------------------------------------------------------------- thresholds

def _check_rank(n: int, r: int):
    if not 1 <= r <= n:
        raise InvalidRank(f"rank r={r} outside [1, {n}]")


def hard_threshold_support(x, r: int) -> np.ndarray:
    """Indices of the r largest |x_i|, ties broken toward the lowest index."""
    x = np.asarray(x, dtype=float)
    _check_rank(x.size, r)
    if r == x.size:
        return np.arange(x.size)
    a = np.abs(x)
    kth = np.partition(a, x.size - r)[x.size - r]
    above = np.flatnonzero(a > kth)
    ties = np.flatnonzero(a == kth)[:r - above.size]
    return np.sort(np.concatenate([above, ties]))


def hard_threshold(x, r: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    idx = hard_threshold_support(x, r)
    out[idx] = x[idx]
    return out


def soft_threshold(x, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def project_l1_ball(x, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {z : |z|_1 <= radius} by sort-and-shift."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    if a.sum() <= radius:
        return x.copy()
    mu = np.sort(a)[::-1]
    cs = np.cumsum(mu) - radius
    j = np.arange(1, a.size + 1)
    rho = np.nonzero(mu - cs / j > 0)[0][-1]
    theta = cs[rho] / (rho + 1.0)
    return np.sign(x) * np.maximum(a - theta, 0.0)


def prox_l1(z, lam: float) -> np.ndarray:
    return soft_threshold(z, lam)


def prox_linf(z, lam: float) -> np.ndarray:
    """prox of lam*|.|_inf via the Moreau decomposition."""
    z = np.asarray(z, dtype=float)
    if lam == 0:
        return z.copy()
    if np.abs(z).sum() <= lam:
        return np.zeros_like(z)  # exact zero rather than round-off from z - lam*(z/lam)
    return z - lam * project_l1_ball(z / lam, 1.0)


def prox_l0_ball_euclidean(z, r: int, radius_R: float) -> np.ndarray:
    """Projection onto D = {|x|_0 <= r, |x| <= R}: hard threshold, then scale."""
    hz = hard_threshold(z, r)
    nh = safe_norm(hz)
    if nh == 0.0:
        return hz
    return min(1.0, radius_R / nh) * hz


# ----------------------------------------------------------- Bregman solves

def _radial_root(kernel: KernelSpec, c: float, hi: float) -> float:
    """Root in (0, hi) of alpha*t/sqrt(1+t^2) + beta*t - c."""
    a, b = kernel.alpha, kernel.beta
    if a == 0.0:
        return min(c / b, hi)

    def phi1(t):
        return a * t / np.hypot(1.0, t) + b * t - c

    def phi2(t):
        return a / np.hypot(1.0, t) ** 3 + b

    return find_root_increasing(RootQuery(phi1, 0.0, hi, fprime=phi2))


def solve_l0_ball(query: SubproblemQuery, r: int, radius_R: float) -> np.ndarray:
    """Bregman subproblem with f the indicator of {|x|_0 <= r, |x| <= R}."""
    p = p_lambda(query)
    n = p.size
    _check_rank(n, r)
    if not np.any(p):
        return np.zeros(n)
    hp = hard_threshold(p, r)
    c = safe_norm(hp)
    a, b = query.kernel.alpha, query.kernel.beta
    # phi'(R) <= 0 means the radial minimizer sits on the sphere
    if c >= a * radius_R / np.hypot(1.0, radius_R) + b * radius_R:
        t = float(radius_R)
    else:
        t = _radial_root(query.kernel, c, float(radius_R))
    return (-t / c) * hp


def homogeneous_scale(kernel: KernelSpec, norm_v: float) -> float:
    """Unique root of 1 - alpha*t*(1 + t^2 |v|^2)^(-1/2) - beta*t = 0."""
    a, b = kernel.alpha, kernel.beta
    if a == 0.0 or norm_v == 0.0:
        return 1.0 / (a + b)
    s = norm_v

    def phi1(t):
        return a * t / np.hypot(1.0, s * t) + b * t - 1.0

    def phi2(t):
        return a / np.hypot(1.0, s * t) ** 3 + b

    return find_root_increasing(RootQuery(phi1, 0.0, 1.0 / b, fprime=phi2))


def solve_homogeneous(query: SubproblemQuery,
                      prox_f: Callable[[np.ndarray, float], np.ndarray]) -> np.ndarray:
    """Bregman subproblem for a convex, positively homogeneous f.

    ``prox_f(z, lam)`` must return the exact prox of lam*f at z. The minimizer
    is t* * prox_{lam f}(-p) with t* the radial root.
    """
    p = p_lambda(query)
    v = prox_f(-p, query.lam)
    t = homogeneous_scale(query.kernel, safe_norm(v))
    return t * v


def solve_l1(query: SubproblemQuery) -> np.ndarray:
    """f = |.|_1 in the form -t* S_lam(p)."""
    p = p_lambda(query)
    s = soft_threshold(p, query.lam)
    t = homogeneous_scale(query.kernel, safe_norm(s))
    return -t * s


def solve_linf(query: SubproblemQuery) -> np.ndarray:
    return solve_homogeneous(query, prox_linf)
