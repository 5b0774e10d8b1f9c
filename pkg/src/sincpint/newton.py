"""Outer Newton iteration for the nonlinear all-at-once system.

Each outer step linearizes the residual, compresses the Jacobian block
family to a single Kronecker factor, rebuilds (or reuses) the
parallel-in-time preconditioner and solves the correction with
right-preconditioned GMRES.  Plain Newton with no globalization:
divergence is reported rather than damped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InnerSolveError, NewtonDivergenceError, ParameterError
from .gmres import GmresConfig, gmres
from .precond import (
    apply_inverse,
    build_damped_skew,
    diagonalize_time_factor,
    is_real_operator,
    kronecker_nkpa,
    make_shift_solvers,
)
from .system import AllAtOnceSystem

__all__ = ["NewtonConfig", "NewtonReport", "newton_solve"]

_POLICIES = ("none", "nkpa", "nkpa_damped")


@dataclass(frozen=True)
class NewtonConfig:
    rtol: float = 1e-10
    max_newton: int = 20
    inner: GmresConfig = field(default_factory=GmresConfig)
    precond_policy: str = "nkpa"
    omega: float = 0.01  # damping used by the nkpa_damped policy
    refresh: str = "every_iteration"  # or "freeze_first"
    initial_guess: str = "flat"  # or "zero"

    def __post_init__(self):
        if not (0 < self.rtol < 1):
            raise ParameterError(f"tolerance must lie in (0, 1), got {self.rtol}")
        if self.max_newton < 1:
            raise ParameterError(f"outer iteration cap must be >= 1, got {self.max_newton}")
        if self.precond_policy not in _POLICIES:
            raise ParameterError(f"unknown preconditioner policy {self.precond_policy!r}")
        if self.refresh not in ("every_iteration", "freeze_first"):
            raise ParameterError(f"unknown refresh mode {self.refresh!r}")
        if self.initial_guess not in ("flat", "zero"):
            raise ParameterError(f"unknown initial guess {self.initial_guess!r}")


@dataclass(frozen=True, eq=False)
class NewtonReport:
    solution: np.ndarray
    newton_iters: int
    max_inner_iters: int
    residual_history: list
    converged: bool


def _build_preconditioner(jac: AllAtOnceSystem, cfg: NewtonConfig, shift_factory):
    approx = kronecker_nkpa(jac.k_ops)
    omega = 1.0 if cfg.precond_policy == "nkpa" else cfg.omega
    s = build_damped_skew(jac.imat, omega)
    core = diagonalize_time_factor(s, jac.grid, approx.dhat)
    shifted = shift_factory(approx.kbar)
    return core.with_shift_solvers(
        make_shift_solvers(shifted, core.eigenvalues), kbar_apply=approx.kbar
    )


def newton_solve(sys: AllAtOnceSystem, cfg: NewtonConfig | None = None,
                 shift_factory=None, threads=None, economy=True) -> NewtonReport:
    """Solve the nonlinear collocated system with plain Newton.

    The default initial guess replicates the initial state over all
    collocation times; ``initial_guess="zero"`` starts from the origin,
    which can overshoot badly when the linearized dynamics grow over the
    time interval.  ``shift_factory(Kbar)`` supplies the fast shifted-solve
    handle for the averaged Jacobian block; defaults to generic LU
    factorizations.  Raises when the inner solve stalls or the nonlinear
    residual grows on two consecutive steps.
    """
    if sys.kind != "nonlinear":
        raise ParameterError("newton_solve expects a nonlinear system")
    cfg = cfg or NewtonConfig()
    if shift_factory is None:
        from .precond import shift_solvers_from_operator

        def shift_factory(Kbar):
            return lambda lam, rhs: shift_solvers_from_operator(Kbar, [lam])[0](rhs)

    if cfg.initial_guess == "flat" and sys.initial_state is not None:
        y = np.tile(sys.initial_state, sys.m)
    else:
        y = np.zeros(sys.size)
    res = sys.residual(y)
    r0 = float(np.linalg.norm(res))
    history = [r0]
    if r0 == 0.0:
        return NewtonReport(solution=y, newton_iters=0, max_inner_iters=0,
                            residual_history=history, converged=True)

    pc = None
    max_inner = 0
    converged = False
    iters = 0
    for k in range(1, cfg.max_newton + 1):
        jac = sys.jacobian(y)
        if cfg.precond_policy != "none" and (pc is None or cfg.refresh == "every_iteration"):
            pc = _build_preconditioner(jac, cfg, shift_factory)
        pinv = None
        if pc is not None:
            pairs_ok = economy and is_real_operator(pc.kbar_apply)
            pinv = lambda v, pc=pc, ok=pairs_ok: apply_inverse(  # noqa: E731
                pc, v, threads=threads, use_conjugate_pairs=ok)
        rep = gmres(jac.apply, -res, pinv, cfg.inner)
        if not rep.converged:
            raise InnerSolveError(k, rep.iterations, rep.true_residual)
        y = y + rep.solution
        max_inner = max(max_inner, rep.iterations)
        iters = k
        res = sys.residual(y)
        rn = float(np.linalg.norm(res))
        history.append(rn)
        if rn <= cfg.rtol * r0:
            converged = True
            break
        if len(history) >= 3 and history[-1] > history[-2] > history[-3]:
            raise NewtonDivergenceError(k, history)

    return NewtonReport(solution=y, newton_iters=iters, max_inner_iters=max_inner,
                        residual_history=history, converged=converged)
