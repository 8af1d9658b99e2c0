import json
import math

import numpy as np
import pytest

from bifrb.kernels import EUCLIDEAN, KernelSpec
from bifrb.params import StepPlan
from bifrb.problems import FeasibilityInstance, SmoothComposite, generate_instance
from bifrb.solvers import (BIFRB_KERNEL, NonFiniteIterate, TerminationSpec, Trace, bifrb_step,
                           dr_prox_g, dr_step, frb_step, ifrb_step, initial_state, itseng_step,
                           merit_value, ratio_change, residual_constant, run_solver,
                           stationarity_residual)


def zero_problem():
    return SmoothComposite(lambda x: 0.0, lambda x: np.zeros_like(x), 1.0, homogeneous=True)


def quad_problem():
    return SmoothComposite(lambda x: 0.5 * float(x @ x), lambda x: np.asarray(x, float), 1.0)


def plan(lam, alpha):
    return StepPlan("fixed", lam, alpha, 1.0, lam, lam)


def start(problem, x_prev, x0, lam):
    return initial_state(problem, np.atleast_1d(float(x0)), np.atleast_1d(float(x_prev)), lam)


def test_pure_inertia():
    p = zero_problem()
    for kernel in (EUCLIDEAN, KernelSpec(1.0, 1.0)):
        s = bifrb_step(start(p, 0.0, 1.0, 0.2), p, kernel, plan(0.2, 0.5))
        if kernel.is_euclidean:
            assert s.x_cur[0] == pytest.approx(1.5, abs=1e-14)
        else:
            assert s.x_cur[0] > 1.0  # inertia pushes past x_k under any kernel
        assert s.x_prev[0] == 1.0


def test_bregman_proximal_point_fixed():
    p = zero_problem()
    s = bifrb_step(start(p, 0.3, 0.3, 0.1), p, KernelSpec(0.5, 1.0), plan(0.1, 0.0))
    assert s.x_cur[0] == pytest.approx(0.3, abs=1e-12)


def test_ifrb_hand_recursion():
    p = quad_problem()
    s = start(p, 1.0, 1.0, 0.3)
    s = ifrb_step(s, p, plan(0.3, 0.0))
    assert s.x_cur[0] == pytest.approx(0.7, abs=1e-14)
    s = ifrb_step(s, p, plan(0.3, 0.0))
    assert s.x_cur[0] == pytest.approx(0.58, abs=1e-14)
    f = start(p, 1.0, 1.0, 0.3)
    f = frb_step(frb_step(f, p, 0.3), p, 0.3)
    assert f.x_cur[0] == pytest.approx(0.58, abs=1e-14)


def test_cached_gradients_match():
    inst = generate_instance(10, 40, seed=1)
    s = initial_state(inst, lam_init=0.3)
    for _ in range(5):
        s = frb_step(s, inst, 0.3)
        np.testing.assert_allclose(s.grad_cur, inst.grad_g(s.x_cur), atol=1e-12)
        np.testing.assert_allclose(s.grad_prev, inst.grad_g(s.x_prev), atol=1e-12)
        assert s.g_cur == pytest.approx(inst.g(s.x_cur), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_frb_is_ifrb_without_inertia(seed):
    inst = generate_instance(8, 30, radius_R=2.0, seed=seed)
    a = run_solver(inst, "frb", termination=TerminationSpec(max_iter=30), store_iterates=True)
    pl = StepPlan.ifrb_fixed(1.0, alpha_bar=0.0)
    b = run_solver(inst, "ifrb", plan=pl, termination=TerminationSpec(max_iter=30),
                   store_iterates=True)
    np.testing.assert_array_equal(np.array(a.iterates), np.array(b.iterates))


def test_stationary_start_stays_fixed():
    p = quad_problem()
    tr = run_solver(p, "frb", x0=np.zeros(3), termination=TerminationSpec(max_iter=5))
    assert tr.converged and tr.iterations == 1 and not np.any(tr.x)


def test_ifrb_equals_bifrb_with_euclidean_kernel():
    inst = generate_instance(10, 50, radius_R=1.0, seed=2)
    pl = StepPlan.ifrb_fixed(1.0, alpha_bar=0.3)
    term = TerminationSpec(max_iter=200)
    a = run_solver(inst, "ifrb", plan=pl, termination=term, store_iterates=True)
    # the bifrb path with (0, 1) kernel runs the Bregman l0-ball solver instead of the projection
    b = run_solver(inst, "bifrb", plan=pl, kernel=EUCLIDEAN, termination=term,
                   store_iterates=True)
    assert a.iterations == b.iterations
    assert np.max(np.abs(np.array(a.iterates) - np.array(b.iterates))) <= 1e-12


def test_dr_examples():
    inst = FeasibilityInstance(np.array([[1.0, 0.0]]), np.array([0.0]), 1, 10.0)
    np.testing.assert_allclose(dr_prox_g(inst, np.array([3.0, 0.0]), 1.0), [1.5, 0.0])
    s = initial_state(inst, lam_init=0.5)
    for _ in range(3):
        s = dr_step(s, inst, 0.5)
        assert not np.any(s.x_cur) and not np.any(s.aux)
    with pytest.raises(ValueError):
        dr_step(s, inst, 0.0)


def test_dr_solves_consistent_instance():
    inst = generate_instance(20, 100, radius_R=1000.0, seed=0, b_mode="sparse")
    tr = run_solver(inst, "dr")
    assert tr.converged and tr.final_objective <= 1e-15


def test_itseng_examples():
    p = quad_problem()
    x = np.array([2.0, -1.0])
    s = initial_state(p, x, x, 0.4)
    s1 = itseng_step(s, p, 0.4, 0.0)
    expect = x - 0.4 * x + 0.4 * (x - (x - 0.4 * x))
    np.testing.assert_allclose(s1.x_cur, expect, atol=1e-14)
    np.testing.assert_allclose(s1.grad_cur, p.grad_g(s1.x_cur), atol=1e-12)
    # g = 0: proximal point of the l0-ball projection
    inst0 = SmoothComposite(lambda x: 0.0, lambda x: np.zeros_like(x), 1.0,
                            prox_f=lambda z, lam: np.clip(z, -1, 1))
    z = np.array([3.0, 0.5])
    s = itseng_step(initial_state(inst0, z, z, 0.5), inst0, 0.5, 0.0)
    np.testing.assert_allclose(s.x_cur, [1.0, 0.5])


def test_merit_value_examples():
    x = np.array([1.0, 2.0])
    assert merit_value(3.0, 5.0, x, x) == 3.0
    assert merit_value(3.0, 0.0, x, x + 1) == 3.0
    assert merit_value(3.0, 2.0, np.array([0.5]), np.array([0.0])) == pytest.approx(3.5)


def test_residual_constant_example():
    assert residual_constant(2.61, 1.0, 7.6, 0.08, 0.08) == pytest.approx(
        math.sqrt(2) * 79.225, rel=1e-12)
    assert residual_constant(2.61, 1.0, 7.6, 0.08, 0.08) == pytest.approx(112.04, abs=0.01)


def test_residual_vanishes_at_rest():
    x = np.zeros(30)
    x[0] = 0.2
    # a step from rest with grad g = 0 leaves x fixed up to round-off
    p = SmoothComposite(lambda x: 0.0, lambda x: np.zeros_like(x), 1.0,
                        prox_f=lambda z, lam: z, homogeneous=True)
    s = bifrb_step(initial_state(p, x, x, 0.08), p, BIFRB_KERNEL, plan(0.08, 0.9))
    res, bound = stationarity_residual(s, p, BIFRB_KERNEL, 7.6)
    assert res <= 1e-12 and bound <= 1e-12


def test_ratio_change():
    a, b, c = np.array([2.0]), np.array([1.0]), np.array([1.0])
    assert ratio_change(a, b, c) == 1.0
    assert ratio_change(b, b, b) == 0.0


def test_constant_sequence_terminates():
    p = zero_problem()
    tr = run_solver(p, "ifrb", plan=plan(0.1, 0.0), x0=np.ones(2))
    assert tr.converged and tr.iterations == 1 and tr.records[0].ratio == 0.0


def test_max_iter_cap():
    drift = SmoothComposite(lambda x: -float(x.sum()), lambda x: -np.ones_like(x), 1.0)
    tr = run_solver(drift, "frb", x0=np.zeros(1), termination=TerminationSpec(max_iter=50))
    assert tr.iterations == 50 and not tr.converged


def test_divergence_raises():
    p = quad_problem()
    with pytest.raises(NonFiniteIterate):
        run_solver(p, "ifrb", plan=plan(10.0, 0.0), x0=np.ones(2))
    with pytest.raises(NonFiniteIterate):
        run_solver(p, "itseng", lam=20.0, alpha=0.0, x0=np.ones(2))


def test_termination_spec_validation():
    with pytest.raises(ValueError):
        TerminationSpec(tol=0.0)
    with pytest.raises(ValueError):
        TerminationSpec(max_iter=0)
    with pytest.raises(ValueError):
        run_solver(quad_problem(), "nope", x0=np.ones(1))


def test_bifrb_run_invariants():
    inst = generate_instance(30, 200, radius_R=1000.0, seed=0)
    tr = run_solver(inst, "bifrb")
    assert tr.converged and tr.iterations < 10001
    assert tr.column("descent_slack").min() >= -1e-8
    res, bound = tr.column("stationarity_residual"), tr.column("residual_bound")
    assert np.all(res <= bound + 1e-8)
    assert res[-1] <= 1e-6
    H = tr.column("merit")
    assert np.all(np.diff(H) <= 1e-10 * np.maximum(1.0, np.abs(H[:-1])))
    # summability proxy
    total = float(np.sum(tr.column("m1") * tr.column("step_norm") ** 2))
    H0 = inst.objective(np.zeros(inst.n))
    assert total <= H0 - tr.column("objective").min() + 1e-6
    # finite length: tail sums of |x_{k+1} - x_k| settle
    assert math.isfinite(tr.column("step_norm").sum())


def test_deterministic_and_jsonl(tmp_path):
    inst = generate_instance(10, 50, seed=4)
    a = run_solver(inst, "bifrb", termination=TerminationSpec(max_iter=40))
    b = run_solver(inst, "bifrb", termination=TerminationSpec(max_iter=40))
    strip = lambda t: [{k: v for k, v in json.loads(l).items() if k != "elapsed"}
                       for l in t.to_jsonl().splitlines()]
    assert strip(a) == strip(b)
    path = tmp_path / "trace.jsonl"
    a.write_jsonl(path)
    lines = path.read_text().splitlines()
    assert len(lines) == 40
    assert set(json.loads(lines[0])) >= {"k", "objective", "merit", "step_norm", "m1",
                                         "descent_slack", "stationarity_residual", "elapsed"}


def test_hooks_stop_early():
    inst = generate_instance(10, 50, seed=5)
    seen = []
    tr = run_solver(inst, "ifrb", hooks=[lambda s, r: seen.append(r.k) or r.k >= 4])
    assert tr.iterations == 5 and seen == [0, 1, 2, 3, 4]


def test_nesterov_plan_runs():
    inst = generate_instance(10, 50, radius_R=1000.0, seed=6)
    pl = StepPlan.bifrb_fixed(BIFRB_KERNEL, 1.0, alpha="nesterov")
    tr = run_solver(inst, "bifrb", plan=pl, termination=TerminationSpec(max_iter=300))
    assert tr.column("descent_slack").min() >= -1e-8


@pytest.mark.parametrize("method", ["bifrb", "ifrb", "frb", "dr", "itseng"])
def test_divergence_heuristic(method):
    inst = generate_instance(20, 200, radius_R=1.0, seed=7, b_mode="sparse")
    tr = run_solver(inst, method, heuristic="divergence", diagnostics=False)
    assert tr.converged
    assert inst.in_D(tr.x)
    base = run_solver(inst, method, diagnostics=False,
                      termination=TerminationSpec(max_iter=tr.iterations))
    assert np.isfinite(base.final_objective)


def test_descent_heuristic():
    inst = generate_instance(20, 200, radius_R=1.0, seed=8, b_mode="sparse")
    tr = run_solver(inst, "bifrb", heuristic="descent")
    plain = run_solver(inst, "bifrb")
    assert tr.converged and tr.iterations < plain.iterations
    with pytest.raises(ValueError):
        run_solver(inst, "dr", heuristic="descent")
    with pytest.raises(ValueError):
        run_solver(inst, "bifrb", heuristic="bogus")
