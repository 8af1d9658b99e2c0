"""Composite problems F = f + g.

:class:`FeasibilityInstance` is the sparse affine-feasibility problem

    min_{x in D} 1/2 dist^2(x, C),   C = {Ax = b},  D = {|x|_0 <= r, |x| <= R},

i.e. f = indicator of D and g = dist^2(., C)/2 with L_grad_g = 1.
:class:`SmoothComposite` wraps user-supplied callables for small tests.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .kernels import KernelSpec
from .subproblems import (SubproblemQuery, prox_l0_ball_euclidean, solve_homogeneous,
                          solve_l0_ball)

B_MODES = ("gaussian", "planted", "sparse")


class RankDeficient(RuntimeError):
    pass


@dataclass
class SmoothComposite:
    """Composite problem from callables.

    ``prox_f(z, lam)`` is the Euclidean prox of lam*f. ``bregman_prox(u, omega,
    lam, kernel)`` solves the Bregman subproblem; when omitted only the
    Euclidean kernel is supported (through ``prox_f``).
    """
    g: Callable[[np.ndarray], float]
    grad_g: Callable[[np.ndarray], np.ndarray]
    l_grad_g: float
    f: Callable[[np.ndarray], float] = lambda x: 0.0
    prox_f: Callable[[np.ndarray, float], np.ndarray] = lambda z, lam: np.array(z, dtype=float)
    bregman_prox: Optional[Callable] = None
    homogeneous: bool = False

    def value_and_grad(self, x):
        return float(self.g(x)), np.asarray(self.grad_g(x), dtype=float)

    def objective(self, x) -> float:
        return float(self.f(x)) + float(self.g(x))

    def breg_solve(self, u, omega, lam, kernel: KernelSpec) -> np.ndarray:
        if self.bregman_prox is not None:
            return self.bregman_prox(u, omega, lam, kernel)
        if kernel.is_euclidean:
            return self.prox_f(np.asarray(u) - lam * np.asarray(omega), lam)
        if self.homogeneous:
            return solve_homogeneous(SubproblemQuery(u, omega, lam, kernel), self.prox_f)
        raise NotImplementedError("no Bregman solver for this f and kernel")


@dataclass(frozen=True, eq=False)
class FeasibilityInstance:
    A: np.ndarray
    b: np.ndarray
    r: int
    radius_R: float
    seed: Optional[int] = None
    b_mode: str = "gaussian"
    x_planted: Optional[np.ndarray] = None
    gram_factor: tuple = field(default=None, repr=False)

    l_grad_g = 1.0

    def __post_init__(self):
        if self.gram_factor is None:
            object.__setattr__(self, "gram_factor", _gram_factor(self.A))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    # smooth part
    def proj_affine(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        res = self.A @ x - self.b
        return x - self.A.T @ cho_solve(self.gram_factor, res)

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        grad = self.A.T @ cho_solve(self.gram_factor, self.A @ x - self.b)
        return 0.5 * float(np.dot(grad, grad)), grad

    def g(self, x) -> float:
        return self.value_and_grad(x)[0]

    def grad_g(self, x) -> np.ndarray:
        return self.value_and_grad(x)[1]

    # nonsmooth part
    def in_D(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return (np.count_nonzero(x) <= self.r
                and float(np.linalg.norm(x)) <= self.radius_R * (1 + tol))

    def f(self, x) -> float:
        return 0.0 if self.in_D(x) else math.inf

    def objective(self, x) -> float:
        return self.f(x) + self.g(x)

    def prox_f(self, z, lam: float = 1.0) -> np.ndarray:
        return prox_l0_ball_euclidean(z, self.r, self.radius_R)

    def breg_solve(self, u, omega, lam, kernel: KernelSpec) -> np.ndarray:
        return solve_l0_ball(SubproblemQuery(np.asarray(u, dtype=float),
                                             np.asarray(omega, dtype=float), lam, kernel),
                             self.r, self.radius_R)

    def metadata(self) -> dict:
        return {"m": self.m, "n": self.n, "r": self.r, "R": self.radius_R,
                "seed": self.seed, "b_mode": self.b_mode}

    def to_json(self) -> str:
        return json.dumps(self.metadata(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FeasibilityInstance":
        d = json.loads(text)
        if d.get("seed") is None:
            raise ValueError("instance metadata without a seed cannot be regenerated")
        return generate_instance(d["m"], d["n"], d["r"], d["R"], d["seed"], d["b_mode"])


def _gram_factor(A: np.ndarray):
    gram = A @ A.T
    try:
        fac = cho_factor(gram, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient(str(exc)) from exc
    diag = np.abs(np.diag(fac[0]))
    if diag.min() <= 1e-10 * diag.max():
        raise RankDeficient("A A^T is numerically singular")
    return fac


def default_rank(m: int) -> int:
    return math.ceil(m / 5)


def generate_instance(m: int, n: int, r: Optional[int] = None, radius_R: float = 1.0,
                      seed: Optional[int] = None, b_mode: str = "gaussian",
                      max_retries: int = 10) -> FeasibilityInstance:
    """Random instance with i.i.d. standard Gaussian A.

    b_mode:
      ``gaussian``  b ~ N(0, I)
      ``planted``   b = A x0, x0 r-sparse with |x0| = min(1, R)
      ``sparse``    b = A x0, x0 r-sparse with N(0, 1) nonzeros (no rescaling)
    """
    if not m < n:
        raise ValueError(f"need m < n, got m={m}, n={n}")
    if r is None:
        r = default_rank(m)
    if not 1 <= r <= n:
        raise ValueError(f"invalid sparsity level r={r}")
    if b_mode not in B_MODES:
        raise ValueError(f"unknown b_mode {b_mode!r}; choose from {B_MODES}")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        A = rng.standard_normal((m, n))
        try:
            fac = _gram_factor(A)
        except RankDeficient:
            continue
        x0 = None
        if b_mode == "gaussian":
            b = rng.standard_normal(m)
        else:
            support = np.sort(rng.choice(n, size=r, replace=False))
            x0 = np.zeros(n)
            x0[support] = rng.standard_normal(r)
            if b_mode == "planted":
                x0 *= min(1.0, radius_R) / np.linalg.norm(x0)
            b = A @ x0
        return FeasibilityInstance(A, b, int(r), float(radius_R), seed, b_mode, x0, fac)
    raise RankDeficient(f"no full-row-rank draw in {max_retries} attempts")


def proj_affine(instance: FeasibilityInstance, x) -> np.ndarray:
    return instance.proj_affine(x)


def g_and_grad(instance: FeasibilityInstance, x):
    return instance.value_and_grad(x)


def f_subproblem_hook(instance: FeasibilityInstance, kernel: Optional[KernelSpec] = None):
    """Subproblem binding for f = indicator of D.

    With a kernel, returns ``(u, omega, lam) -> x`` solving the Bregman
    subproblem; without one, returns the Euclidean prox ``z -> Proj_D(z)``.
    """
    if kernel is None:
        return lambda z: prox_l0_ball_euclidean(z, instance.r, instance.radius_R)
    return lambda u, omega, lam: instance.breg_solve(u, omega, lam, kernel)
