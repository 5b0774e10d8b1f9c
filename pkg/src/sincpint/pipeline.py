"""End-to-end solve drivers tying models, assembly, preconditioning and
the Krylov/Newton solvers together.

Preconditioner policies:

==============  ===========================  =================
policy          time factor                  block compression
==============  ===========================  =================
none            (unpreconditioned)
p               S(1) D                       averaged operator
p_omega         S(omega) D                   averaged operator
avg             S(1) D                       averaged operator
nkpa            S(1) D Dhat                  Frobenius-optimal
nkpa_omega      S(omega) D Dhat              Frobenius-optimal
==============  ===========================  =================

For constant-coefficient systems every policy reduces to the plain or
damped skew-part preconditioner.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .gmres import GmresConfig, GmresReport, gmres
from .models import ProblemModel
from .newton import NewtonConfig, NewtonReport, newton_solve
from .precond import (
    DiagonalizedPreconditioner,
    apply_inverse,
    build_damped_skew,
    diagonalize_time_factor,
    is_real_operator,
    kronecker_averaging,
    kronecker_nkpa,
    make_shift_solvers,
)
from .sinc import SincGrid, SincIntegrationMatrix, build_integration_matrix
from .system import AllAtOnceSystem, assemble_constant, assemble_nonlinear, assemble_varying

__all__ = [
    "LINEAR_POLICIES",
    "LinearRun",
    "NonlinearRun",
    "build_system",
    "build_preconditioner",
    "solve_linear",
    "solve_nonlinear",
]

LINEAR_POLICIES = ("none", "p", "p_omega", "avg", "nkpa", "nkpa_omega")


def build_system(model: ProblemModel, grid: SincGrid,
                 imat: SincIntegrationMatrix | None = None) -> AllAtOnceSystem:
    imat = imat or build_integration_matrix(grid.m)
    if model.q is not None:
        return assemble_nonlinear(model.q, model.dq, grid, model.g, model.r, imat=imat)
    if model.k_of_t is not None:
        ops = [model.k_of_t(t) for t in grid.points]
        return assemble_varying(ops, grid, model.g, model.r, imat=imat)
    return assemble_constant(model.K, grid, model.g, model.r, imat=imat)


def build_preconditioner(model: ProblemModel, sys: AllAtOnceSystem, policy: str,
                         omega: float = 0.01) -> DiagonalizedPreconditioner | None:
    """Build the diagonalized preconditioner for a linear system."""
    if policy not in LINEAR_POLICIES:
        raise ParameterError(f"unknown preconditioner policy {policy!r}")
    if policy == "none":
        return None
    if sys.kind == "constant":
        kbar, dhat = sys.k_const, np.ones(sys.m)
    else:
        approx = kronecker_nkpa(sys.k_ops) if policy.startswith("nkpa") \
            else kronecker_averaging(sys.k_ops)
        kbar, dhat = approx.kbar, approx.dhat
    omega_eff = omega if policy.endswith("_omega") else 1.0
    s = build_damped_skew(sys.imat, omega_eff)
    core = diagonalize_time_factor(s, sys.grid, dhat)
    factory = model.shift_factory
    shifted = factory(kbar) if factory is not None else None
    if shifted is None:
        from .precond import shift_solvers_from_operator

        solvers = shift_solvers_from_operator(kbar, core.eigenvalues)
    else:
        solvers = make_shift_solvers(shifted, core.eigenvalues)
    return core.with_shift_solvers(solvers, kbar_apply=kbar)


@dataclass(frozen=True, eq=False)
class LinearRun:
    report: GmresReport
    system: AllAtOnceSystem
    pc: DiagonalizedPreconditioner | None
    wall_seconds: float


@dataclass(frozen=True, eq=False)
class NonlinearRun:
    report: NewtonReport
    system: AllAtOnceSystem
    wall_seconds: float


def solve_linear(model: ProblemModel, grid: SincGrid, policy: str = "p",
                 omega: float = 0.01, tol: float = 1e-10, maxit: int = 1000,
                 threads=None, economy: bool | None = None) -> LinearRun:
    """Assemble and solve a linear model; the timer covers the solve phase
    (preconditioner application and Krylov iteration) only."""
    sys = build_system(model, grid)
    pc = build_preconditioner(model, sys, policy, omega)
    if economy is None:
        economy = pc is not None and pc.kbar_apply is not None and is_real_operator(pc.kbar_apply)
    pinv = None
    if pc is not None:
        pinv = lambda v: apply_inverse(pc, v, threads=threads, use_conjugate_pairs=economy)  # noqa: E731
    cfg = GmresConfig(tol=tol, maxit=maxit)
    t0 = time.perf_counter()
    report = gmres(sys.apply, sys.rhs, pinv, cfg)
    wall = time.perf_counter() - t0
    return LinearRun(report=report, system=sys, pc=pc, wall_seconds=wall)


def solve_nonlinear(model: ProblemModel, grid: SincGrid, policy: str = "nkpa",
                    omega: float = 0.01, rtol: float = 1e-10, max_newton: int = 20,
                    tol: float = 1e-10, maxit: int = 1000, threads=None,
                    refresh: str = "every_iteration", initial_guess: str = "flat") -> NonlinearRun:
    """Assemble and solve a nonlinear model with the outer Newton loop."""
    sys = build_system(model, grid)
    policy_map = {"none": "none", "nkpa": "nkpa", "nkpa_omega": "nkpa_damped"}
    if policy not in policy_map:
        raise ParameterError(f"unknown nonlinear preconditioner policy {policy!r}")
    cfg = NewtonConfig(rtol=rtol, max_newton=max_newton,
                       inner=GmresConfig(tol=tol, maxit=maxit),
                       precond_policy=policy_map[policy], omega=omega, refresh=refresh,
                       initial_guess=initial_guess)
    t0 = time.perf_counter()
    report = newton_solve(sys, cfg, shift_factory=model.shift_factory, threads=threads)
    wall = time.perf_counter() - t0
    return NonlinearRun(report=report, system=sys, wall_seconds=wall)
