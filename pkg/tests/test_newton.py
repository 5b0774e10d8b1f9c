"""Outer Newton loop: affine one-step convergence, quadratic local rate,
preconditioner policies, refresh modes, and failure reporting."""

import numpy as np
import pytest

from sincpint import (
    GmresConfig,
    InnerSolveError,
    NewtonConfig,
    NewtonDivergenceError,
    ParameterError,
    SincParams,
    assemble_nonlinear,
    build_grid,
    make_allen_cahn,
    newton_solve,
    solve_nonlinear,
)


def test_affine_map_converges_in_one_step():
    rng = np.random.default_rng(0)
    grid = build_grid(SincParams(T=2.0, M=4))
    K = -np.eye(3) - 0.2 * rng.standard_normal((3, 3))
    sys = assemble_nonlinear(lambda t, y: K @ y, lambda t, y: K, grid, None,
                             rng.standard_normal(3))
    rep = newton_solve(sys, NewtonConfig(rtol=1e-8, inner=GmresConfig(tol=1e-10)))
    assert rep.newton_iters == 1
    assert rep.converged


def test_logistic_quadratic_convergence_order():
    # scalar y' = y - y^2 from y(0) = 1/2
    grid = build_grid(SincParams(T=2.0, M=8))
    sys = assemble_nonlinear(lambda t, y: y - y**2, lambda t, y: np.array([[1.0 - 2.0 * y[0]]]),
                             grid, None, np.array([0.5]))
    cfg = NewtonConfig(rtol=1e-13, inner=GmresConfig(tol=1e-13), initial_guess="zero")
    rep = newton_solve(sys, cfg)
    assert rep.converged
    hist = np.array(rep.residual_history)
    hist = hist[hist > 1e-14]
    # quadratic order estimated from the last three usable residuals
    r = hist[-3:]
    order = np.log(r[2] / r[1]) / np.log(r[1] / r[0])
    assert order >= 1.8
    # solution matches the logistic closed form to discretization accuracy
    exact = 1.0 / (1.0 + np.exp(-grid.points))
    assert np.max(np.abs(rep.solution - exact)) <= 5e-3


def test_refresh_modes_reach_the_same_fixed_point():
    model = make_allen_cahn(64)
    grid = build_grid(SincParams(T=2.0, M=8))
    every = solve_nonlinear(model, grid, policy="nkpa", refresh="every_iteration")
    frozen = solve_nonlinear(model, grid, policy="nkpa", refresh="freeze_first")
    assert every.report.converged and frozen.report.converged
    diff = np.linalg.norm(every.report.solution - frozen.report.solution)
    assert diff <= 1e-8 * np.linalg.norm(every.report.solution)
    assert abs(every.report.newton_iters - frozen.report.newton_iters) <= 2


def test_preconditioner_changes_iterations_not_the_answer():
    model = make_allen_cahn(64)
    grid = build_grid(SincParams(T=2.0, M=8))
    plain = solve_nonlinear(model, grid, policy="none")
    nkpa = solve_nonlinear(model, grid, policy="nkpa")
    assert plain.report.converged and nkpa.report.converged
    diff = np.linalg.norm(plain.report.solution - nkpa.report.solution)
    assert diff <= 1e-8 * np.linalg.norm(nkpa.report.solution)


def test_divergence_reported():
    # y' = y^2 from y(0)=1 blows up inside (0, 2); the collocated system
    # has no usable solution and plain Newton must not pretend otherwise
    grid = build_grid(SincParams(T=2.0, M=8))
    sys = assemble_nonlinear(lambda t, y: y**2, lambda t, y: np.array([[2.0 * y[0]]]),
                             grid, None, np.array([1.0]))
    with pytest.raises((NewtonDivergenceError, InnerSolveError)):
        newton_solve(sys, NewtonConfig(rtol=1e-10, max_newton=40,
                                       inner=GmresConfig(tol=1e-10, maxit=40)))


def test_inner_failure_carries_outer_step():
    model = make_allen_cahn(32)
    grid = build_grid(SincParams(T=2.0, M=4))
    sys_cfg = NewtonConfig(rtol=1e-10, inner=GmresConfig(tol=1e-12, maxit=1),
                           precond_policy="none")
    from sincpint.pipeline import build_system

    sys = build_system(model, grid)
    with pytest.raises(InnerSolveError) as info:
        newton_solve(sys, sys_cfg)
    assert info.value.outer_step == 1


def test_linear_system_rejected():
    from sincpint import assemble_constant

    grid = build_grid(SincParams(T=2.0, M=2))
    sys = assemble_constant(np.eye(2), grid, None, np.zeros(2))
    with pytest.raises(ParameterError):
        newton_solve(sys)


def test_config_validation():
    with pytest.raises(ParameterError):
        NewtonConfig(rtol=2.0)
    with pytest.raises(ParameterError):
        NewtonConfig(precond_policy="jacobi")
    with pytest.raises(ParameterError):
        NewtonConfig(refresh="sometimes")
    with pytest.raises(ParameterError):
        NewtonConfig(initial_guess="random")
