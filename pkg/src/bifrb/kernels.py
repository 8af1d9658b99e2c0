"""Bregman kernel family h(x) = alpha*sqrt(1 + |x|^2) + (beta/2)*|x|^2.

The Euclidean kernel is the special case ``KernelSpec(0.0, 1.0)``, for which
the Bregman distance is half the squared Euclidean distance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_BIG = 1e150


@dataclass(frozen=True)
class KernelSpec:
    alpha: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def sigma(self) -> float:
        """Strong convexity modulus of h."""
        return float(self.beta)

    @property
    def l_grad(self) -> float:
        """Lipschitz constant of grad h."""
        return float(self.alpha + self.beta)

    @property
    def is_euclidean(self) -> bool:
        return self.alpha == 0.0 and self.beta == 1.0


EUCLIDEAN = KernelSpec(0.0, 1.0)


def safe_norm(x) -> float:
    """Euclidean norm that does not overflow for huge entries."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    s = float(np.max(np.abs(x)))
    if s == 0.0 or not np.isfinite(s):
        return s
    if s > _BIG:
        return s * float(np.sqrt(np.dot((x / s).ravel(), (x / s).ravel())))
    return float(np.sqrt(np.dot(x.ravel(), x.ravel())))


def h_value(kernel: KernelSpec, x) -> float:
    nx = safe_norm(x)
    return kernel.alpha * float(np.hypot(1.0, nx)) + 0.5 * kernel.beta * nx * nx


def grad_scale(kernel: KernelSpec, norm_x: float) -> float:
    """Scalar s with grad h(x) = s * x, given |x|."""
    return kernel.alpha / float(np.hypot(1.0, norm_x)) + kernel.beta


def grad_h(kernel: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return grad_scale(kernel, safe_norm(x)) * x


def bregman_distance(kernel: KernelSpec, x, y) -> float:
    """D_h(x, y) = h(x) - h(y) - <x - y, grad h(y)>.

    The quadratic part is exactly beta/2 |x-y|^2. The sqrt part is evaluated
    through the Lagrange identity on (1, x), (1, y) to avoid cancellation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    dd = float(np.dot(d, d))
    out = 0.5 * kernel.beta * dd
    if kernel.alpha == 0.0:
        return out
    nx, ny = safe_norm(x), safe_norm(y)
    xy = float(np.dot(x, y))
    a, c = float(np.hypot(1.0, nx)), float(np.hypot(1.0, ny))
    # |(1,x)|^2 |(1,y)|^2 - <(1,x),(1,y)>^2 = |x-y|^2 + (|x|^2|y|^2 - <x,y>^2)
    cross = max((nx * ny - xy) * (nx * ny + xy), 0.0)
    num = dd + cross
    den = a * c + 1.0 + xy
    out += kernel.alpha * num / (den * c)
    return max(out, 0.0)


def kernel_bounds(kernel: KernelSpec) -> tuple[float, float]:
    """Return (sigma, L_grad_h) = (beta, alpha + beta)."""
    return kernel.sigma, kernel.l_grad
