"""Bregman inertial forward-reflected-backward splitting for nonconvex composite
problems, with the Euclidean variants, DR / inertial Tseng baselines and a
sparse affine-feasibility benchmark."""
from .kernels import EUCLIDEAN, KernelSpec, bregman_distance, grad_h, h_value
from .params import (Certificate, MeritParams, StepPlan, bifrb_fixed_cert, closed_form_p,
                     ifrb_fixed_cert, next_merit_params)
from .problems import FeasibilityInstance, SmoothComposite, generate_instance
from .solvers import (BIFRB_KERNEL, METHODS, IterationRecord, NonFiniteIterate, SolverState,
                      TerminationSpec, Trace, run_solver)
from .subproblems import SubproblemQuery, solve_homogeneous, solve_l0_ball, solve_l1

__version__ = "0.1.0"
