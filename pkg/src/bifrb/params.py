"""Merit-function parameters and stepsize certificates.

The merit parameters obey

    p_k    = (a/2) lam_{k-1}^2 / lam_k + (b/lam_k - c)/2 - p_{k-1}
    M_{1,k} = p_{k-1} - (alpha_k + b c lam_{k-1}) / (2 lam_k) - a lam_{k-1}^2 / (2 lam_k)

with a = (L_h - sigma) L_g^2, b = sigma, c = L_g. A run is certified when
liminf p_k >= 0, liminf M_{1,k} > 0 and p_k stays bounded.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .kernels import KernelSpec

DEFAULT_SAFETY = 0.95


class InvalidBounds(ValueError):
    pass


class HypothesisViolated(ValueError):
    pass


class InvalidAlpha(ValueError):
    pass


@dataclass(frozen=True)
class AbcConstants:
    a: float
    b: float
    c: float


def abc_constants(sigma: float, l_grad_h: float, l_grad_g: float) -> AbcConstants:
    if not sigma > 0 or l_grad_h < sigma:
        raise InvalidBounds(f"need 0 < sigma <= L_h, got sigma={sigma}, L_h={l_grad_h}")
    if l_grad_g < 0:
        raise InvalidBounds("L_g must be nonnegative")
    return AbcConstants((l_grad_h - sigma) * l_grad_g ** 2, sigma, l_grad_g)


@dataclass(frozen=True)
class MeritParams:
    p_prev: float
    p_cur: float
    m1_cur: float
    p_bar: float

    @classmethod
    def initial(cls, p_initial: float) -> "MeritParams":
        return cls(math.nan, p_initial, math.nan, p_initial)


def next_merit_params(prev: MeritParams, lambda_prev: float, lambda_cur: float,
                      alpha_cur: float, abc: AbcConstants) -> MeritParams:
    a, b, c = abc.a, abc.b, abc.c
    p_old = prev.p_cur
    p_new = 0.5 * a * lambda_prev ** 2 / lambda_cur + 0.5 * (b / lambda_cur - c) - p_old
    m1 = (p_old - (alpha_cur + b * c * lambda_prev) / (2.0 * lambda_cur)
          - a * lambda_prev ** 2 / (2.0 * lambda_cur))
    return MeritParams(p_old, p_new, m1, max(prev.p_bar, p_new))


def closed_form_p(k: int, lambdas: Sequence[float], p_initial: float,
                  abc: AbcConstants) -> float:
    """p_k from the even/odd telescoping sums.

    ``lambdas[j]`` holds lam_{j-1}, so ``lambdas[0]`` is lam_{-1}.
    """
    if k < -1:
        raise ValueError("k must be >= -1")
    if k == -1:
        return float(p_initial)
    if len(lambdas) < k + 2:
        raise ValueError(f"need lam_-1..lam_{k}, got {len(lambdas)} values")
    lam = lambda j: float(lambdas[j + 1])
    a, b, c = abc.a, abc.b, abc.c
    if k % 2 == 0:
        q = k // 2
        sa = sum(lam(2 * i - 1) ** 2 / lam(2 * i) - lam(2 * i - 2) ** 2 / lam(2 * i - 1)
                 for i in range(1, q + 1))
        sb = sum(1.0 / lam(2 * i) - 1.0 / lam(2 * i - 1) for i in range(1, q + 1))
        return (0.5 * a * sa + 0.5 * b * sb + (a * lam(-1) ** 2 + b) / (2.0 * lam(0))
                - 0.5 * c - p_initial)
    q = (k - 1) // 2
    sa = sum(lam(2 * i) ** 2 / lam(2 * i + 1) - lam(2 * i - 1) ** 2 / lam(2 * i)
             for i in range(0, q + 1))
    sb = sum(1.0 / lam(2 * i + 1) - 1.0 / lam(2 * i) for i in range(0, q + 1))
    return 0.5 * a * sa + 0.5 * b * sb + p_initial


# -------------------------------------------------------------- certificates

@dataclass(frozen=True)
class Certificate:
    mode: str
    sigma: float
    l_grad_h: float
    l_grad_g: float
    lam: float
    p_initial: float
    p_interval: tuple[float, float]
    lambda_max: float

    def to_json(self) -> str:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["p_interval"] = list(self.p_interval)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        d = json.loads(text)
        d["lam"] = d.pop("lambda")
        d["p_interval"] = tuple(d["p_interval"])
        return cls(**d)


def bifrb_lambda_star(abc: AbcConstants) -> float:
    a, b, c = abc.a, abc.b, abc.c
    return (math.sqrt((2 * b * c + c) ** 2 + 4 * a * (b - 2)) - 2 * b * c - c) / (2 * a)


def bifrb_p_interval(lam: float, abc: AbcConstants) -> tuple[float, float]:
    a, b, c = abc.a, abc.b, abc.c
    lo = max(0.0, 1.0 / (2 * lam) + b * c / 2 + a * lam / 2)
    hi = min(a * lam / 2 + (b / lam - c) / 2, (b - 1) / (2 * lam) - (b + 1) * c / 2)
    return lo, hi


def bifrb_fixed_cert(sigma: float, l_grad_h: float, l_grad_g: float,
                     safety: float = DEFAULT_SAFETY,
                     lam: Optional[float] = None) -> Certificate:
    """Constant-stepsize certificate for the Bregman method (any alpha_k in [0, 1)).

    With ``lam`` given, that stepsize is checked against the bound instead of
    taking ``safety * lambda_max``.
    """
    if not sigma > 2:
        raise HypothesisViolated(f"need sigma > 2, got {sigma}")
    if not (l_grad_h - sigma) * sigma > 0.25:
        raise HypothesisViolated(f"need (L_h - sigma)*sigma > 1/4, got {(l_grad_h - sigma) * sigma}")
    if not l_grad_g > 0:
        raise InvalidBounds("L_g must be positive")
    abc = abc_constants(sigma, l_grad_h, l_grad_g)
    lam_max = min(bifrb_lambda_star(abc), (sigma - 1) / ((sigma + 1) * l_grad_g))
    if lam is None:
        if not 0 < safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        lam = safety * lam_max
    elif not 0 < lam < lam_max:
        raise HypothesisViolated(f"stepsize {lam} not in (0, {lam_max})")
    lo, hi = bifrb_p_interval(lam, abc)
    if not lo < hi:
        raise HypothesisViolated(f"empty p interval ({lo}, {hi})")
    return Certificate("fixed", sigma, l_grad_h, l_grad_g, lam, 0.5 * (lo + hi),
                       (lo, hi), lam_max)


def euclidean_p_interval(lam0: float, alpha_bar: float, l_grad_g: float,
                         epsilon: float) -> tuple[float, float]:
    """Admissible p_{-1} for the Euclidean method: the M_{1,k} > 0 window."""
    lo = l_grad_g / 2 + alpha_bar / (2 * epsilon)
    hi = 1.0 / (2 * lam0) - l_grad_g - alpha_bar / (2 * epsilon)
    return lo, hi


def ifrb_fixed_cert(l_grad_g: float, alpha_bar: float,
                    safety: float = DEFAULT_SAFETY,
                    lam: Optional[float] = None) -> Certificate:
    """Constant-stepsize certificate for the Euclidean method with alpha_k <= alpha_bar."""
    if not 0 <= alpha_bar < 0.5:
        raise InvalidAlpha(f"alpha_bar must lie in [0, 1/2), got {alpha_bar}")
    if not l_grad_g > 0:
        raise InvalidBounds("L_g must be positive")
    lam_max = (1 - 2 * alpha_bar) / (3 * l_grad_g)
    if lam is None:
        lam = safety * lam_max
    elif not 0 < lam < lam_max:
        raise HypothesisViolated(f"stepsize {lam} not in (0, {lam_max})")
    lo, hi = euclidean_p_interval(lam, alpha_bar, l_grad_g, lam)
    return Certificate("euclidean-fixed", 1.0, 1.0, l_grad_g, lam, 0.5 * (lo + hi),
                       (lo, hi), lam_max)


@dataclass
class ScheduleReport:
    valid: bool
    reasons: list = field(default_factory=list)
    p_initial: Optional[float] = None
    p_interval: Optional[tuple] = None


def dynamic_schedule_check(schedule: Sequence[float], alpha_bar: float, l_grad_g: float,
                           a_seq: Sequence[float], epsilon: float) -> ScheduleReport:
    """Check a Euclidean stepsize schedule lam_{-1}, lam_0, lam_1, ... .

    ``a_seq[k]`` bounds 1/lam_k - 1/lam_{k-1} for k = 0, 1, ... .
    """
    lams = np.asarray(schedule, dtype=float)
    reasons = []
    if not 0 <= alpha_bar < 0.5:
        reasons.append(f"alpha_bar={alpha_bar} not in [0, 1/2)")
    if not 0 < epsilon < (1 - 2 * alpha_bar) / (3 * l_grad_g):
        reasons.append(f"epsilon={epsilon} not in (0, (1-2*alpha_bar)/(3 L_g))")
    if lams.size < 2:
        reasons.append("schedule needs lam_-1 and lam_0")
    if reasons:
        return ScheduleReport(False, reasons)
    lam_hi_bound = epsilon / (2 * alpha_bar + 3 * epsilon * l_grad_g)
    if lams.min() < epsilon:
        reasons.append(f"min stepsize {lams.min():g} below epsilon={epsilon:g}")
    if not lams.max() < lam_hi_bound:
        reasons.append(f"max stepsize {lams.max():g} not below {lam_hi_bound:g}")
    inc = 1.0 / lams[1:] - 1.0 / lams[:-1]
    a = np.asarray(a_seq, dtype=float)
    if a.size < inc.size:
        reasons.append(f"a_seq too short: {a.size} < {inc.size}")
    else:
        if np.any(a <= 0):
            reasons.append("a_seq must be positive")
        tol = 1e-12 * np.maximum(1.0, 1.0 / lams[1:])
        bad_lo = np.nonzero(inc < -tol)[0]
        bad_hi = np.nonzero(inc > a[:inc.size] + tol)[0]
        if bad_lo.size:
            reasons.append(f"stepsize increases at k={int(bad_lo[0])}")
        if bad_hi.size:
            reasons.append(f"reciprocal increment exceeds a_k at k={int(bad_hi[0])}")
    if reasons:
        return ScheduleReport(False, reasons)
    lo, hi = euclidean_p_interval(lams[1], alpha_bar, l_grad_g, epsilon)
    return ScheduleReport(True, [], 0.5 * (lo + hi), (lo, hi))


# --------------------------------------------------------------- schedules

class _NesterovTable:
    """t_{-1} = 1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2, stored at index k+1."""

    def __init__(self):
        self._t = [1.0]
        self._lock = threading.Lock()

    def t(self, k: int) -> float:
        j = k + 1
        if j >= len(self._t):
            with self._lock:
                while len(self._t) <= j:
                    tk = self._t[-1]
                    self._t.append((1.0 + math.sqrt(1.0 + 4.0 * tk * tk)) / 2.0)
        return self._t[j]


_NESTEROV = _NesterovTable()


def nesterov_t(k: int) -> float:
    if k < -1:
        raise ValueError("k must be >= -1")
    return _NESTEROV.t(k)


def nesterov_alpha(k: int) -> float:
    """alpha_k = (t_k - 1) / t_{k+1}."""
    return (nesterov_t(k) - 1.0) / nesterov_t(k + 1)


AlphaRule = Union[float, str, Callable[[int], float]]
LambdaRule = Union[float, Sequence[float], Callable[[int], float]]


@dataclass(frozen=True)
class StepPlan:
    """Stepsize/inertia schedule plus the merit starting value p_{-1}.

    ``lam`` is a constant, a callable k -> lam_k, or a sequence holding
    lam_{-1}, lam_0, ... (the last value is repeated). ``alpha`` is a
    constant, ``"nesterov"`` or a callable k -> alpha_k.
    """
    mode: str
    lam: LambdaRule
    alpha: AlphaRule
    p_initial: float
    lambda_lo: float
    lambda_hi: float
    sigma: float = 1.0
    l_grad_h: float = 1.0
    l_grad_g: float = 1.0

    def __post_init__(self):
        if not 0 < self.lambda_lo <= self.lambda_hi:
            raise ValueError("need 0 < lambda_lo <= lambda_hi")
        if isinstance(self.alpha, (int, float)) and not 0 <= self.alpha < 1:
            raise InvalidAlpha(f"alpha must lie in [0, 1), got {self.alpha}")
        if isinstance(self.alpha, str) and self.alpha != "nesterov":
            raise ValueError(f"unknown alpha rule {self.alpha!r}")

    def lambda_at(self, k: int) -> float:
        if callable(self.lam):
            return float(self.lam(k))
        if isinstance(self.lam, (int, float)):
            return float(self.lam)
        seq = self.lam
        return float(seq[min(k + 1, len(seq) - 1)])

    def alpha_at(self, k: int) -> float:
        if self.alpha == "nesterov":
            return nesterov_alpha(k)
        if callable(self.alpha):
            return float(self.alpha(k))
        return float(self.alpha)

    @property
    def abc(self) -> AbcConstants:
        return abc_constants(self.sigma, self.l_grad_h, self.l_grad_g)

    def with_alpha(self, alpha: AlphaRule) -> "StepPlan":
        from dataclasses import replace
        return replace(self, alpha=alpha)

    @classmethod
    def bifrb_fixed(cls, kernel: KernelSpec, l_grad_g: float, alpha: AlphaRule = 0.9,
                    safety: float = DEFAULT_SAFETY, lam: Optional[float] = None) -> "StepPlan":
        cert = bifrb_fixed_cert(kernel.sigma, kernel.l_grad, l_grad_g, safety, lam)
        return cls("fixed", cert.lam, alpha, cert.p_initial, cert.lam, cert.lam,
                   kernel.sigma, kernel.l_grad, l_grad_g)

    @classmethod
    def ifrb_fixed(cls, l_grad_g: float, alpha_bar: float = 0.49,
                   alpha: Optional[AlphaRule] = None, safety: float = DEFAULT_SAFETY,
                   lam: Optional[float] = None) -> "StepPlan":
        cert = ifrb_fixed_cert(l_grad_g, alpha_bar, safety, lam)
        return cls("euclidean-fixed", cert.lam, alpha_bar if alpha is None else alpha,
                   cert.p_initial, cert.lam, cert.lam, 1.0, 1.0, l_grad_g)


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class Assumption3Report:
    p_tail_min: float
    m1_tail_min: float
    p_max: float
    valid: bool


def assumption3_report(p_trace, m1_trace, tail: Optional[int] = None) -> Assumption3Report:
    """Tail-window proxies for liminf p_k >= 0, liminf M_{1,k} > 0 and sup p_k.

    ``tail`` defaults to the last quarter of the trace (at least one entry).
    """
    p = np.asarray(p_trace, dtype=float)
    m1 = np.asarray(m1_trace, dtype=float)
    if p.size == 0 or m1.size == 0:
        raise ValueError("traces must be nonempty")
    if tail is None:
        tail = max(1, p.size // 4)
    p_min = float(p[-tail:].min())
    m_min = float(m1[-min(tail, m1.size):].min())
    p_max = float(p.max())
    return Assumption3Report(p_min, m_min, p_max,
                             bool(p_min >= 0 and m_min > 0 and np.isfinite(p_max)))
