import numpy as np
import pytest

from bifrb.scalar_root import MaxIterExceeded, NoSignChange, RootQuery, find_root_increasing


def bisect(fun, lo, hi, tol=1e-12):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fun(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_affine_root():
    assert find_root_increasing(RootQuery(lambda t: t - 0.5, 0.0, 1.0)) == pytest.approx(0.5, abs=1e-14)


def test_kernel_radial_root():
    f = lambda t: t / np.sqrt(1 + t * t) + t - 1
    fp = lambda t: (1 + t * t) ** -1.5 + 1
    ref = bisect(f, 0.0, 1.0, 1e-10)
    assert ref == pytest.approx(0.53095, abs=1e-4)
    t = find_root_increasing(RootQuery(f, 0.0, 1.0, fprime=fp))
    assert t == pytest.approx(ref, abs=1e-9)


def test_homogeneous_root():
    f = lambda t: t / np.sqrt(1 + 2.25 * t * t) + t - 1
    ref = bisect(f, 0.0, 2.0, 1e-10)
    assert ref == pytest.approx(0.5678, abs=1e-3)
    assert find_root_increasing(RootQuery(f, 0.0, 2.0)) == pytest.approx(ref, abs=1e-9)


def test_endpoint_roots_allowed():
    assert find_root_increasing(RootQuery(lambda t: t, 0.0, 1.0)) == 0.0
    assert find_root_increasing(RootQuery(lambda t: t - 1.0, 0.0, 1.0)) == 1.0


def test_errors():
    with pytest.raises(NoSignChange):
        find_root_increasing(RootQuery(lambda t: t + 1.0, 0.0, 1.0))
    with pytest.raises(NoSignChange):
        find_root_increasing(RootQuery(lambda t: t - 2.0, 0.0, 1.0))
    with pytest.raises(MaxIterExceeded):
        find_root_increasing(RootQuery(lambda t: t - 1 / 3, 0.0, 1.0, max_iter=3))
    with pytest.raises(ValueError):
        find_root_increasing(RootQuery(lambda t: t, 1.0, 0.0))


def test_deterministic():
    q = RootQuery(lambda t: t ** 3 + t - 0.7, 0.0, 1.0, fprime=lambda t: 3 * t * t + 1)
    assert find_root_increasing(q) == find_root_increasing(q)


def test_bad_newton_steps_are_rejected():
    # Newton from the midpoint of a very flat-then-steep function leaves the bracket
    f = lambda t: np.expm1(30 * (t - 0.9))
    fp = lambda t: 30 * np.exp(30 * (t - 0.9))
    assert find_root_increasing(RootQuery(f, 0.0, 1.0, fprime=fp)) == pytest.approx(0.9, abs=1e-12)


def test_randomized_agreement_with_bisection():
    rng = np.random.default_rng(7)
    for _ in range(100):
        a, b, c = rng.uniform(0.01, 3, 3)
        s = rng.uniform(0.1, 4)
        target = rng.uniform(0.05, 0.95)
        top = a / np.sqrt(1 + s * s) + b + c
        f = lambda t: a * t / np.sqrt(1 + (s * t) ** 2) + b * t ** 3 + c * t - target * top
        fp = lambda t: a / (1 + (s * t) ** 2) ** 1.5 + 3 * b * t * t + c
        q = RootQuery(f, 0.0, 1.0, fprime=fp)
        t = find_root_increasing(q)
        assert t == pytest.approx(bisect(f, 0.0, 1.0), abs=1e-10)
        for d in (-q.tol_x, q.tol_x):
            if 0 <= t + d <= 1:
                v = f(t + d)
                assert (v <= q.tol_f) if d < 0 else (v >= -q.tol_f)
