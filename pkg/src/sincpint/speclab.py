"""Spectral diagnostics for the preconditioned all-at-once operator.

Numerically certifies the clustering claims: the scalar function z(mu)
whose range determines every non-unity eigenvalue, dense spectra of
preconditioned operators with interval/annulus containment checks, and
the growth of the eigenvector condition numbers that governs roundoff in
the diagonalization procedure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DiagonalizationError,
    NearSingularPredictionError,
    ParameterError,
    SingularSystemError,
    SizeError,
)
from .models import ProblemModel, error_max
from .pipeline import build_system, solve_linear
from .precond import KroneckerApprox, build_damped_skew, diagonalize_time_factor
from .sinc import SincGrid, SincIntegrationMatrix, build_grid, build_integration_matrix
from .system import DENSE_CAP, operator_dense

__all__ = [
    "SpectralReport",
    "z_function",
    "z_cross_check",
    "predicted_nonunity",
    "dense_preconditioned_spectrum",
    "condition_growth",
    "omega_sweep",
]

UNITY_TOL = 1e-6
BOUND_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Dense spectrum of a preconditioned operator plus containment data."""

    eigenvalues: np.ndarray
    predicted: np.ndarray
    unity_count: int
    bound_violations: list = field(default_factory=list)
    bound_kind: str | None = None
    unity_tol: float = UNITY_TOL
    bound_slack: float = BOUND_SLACK

    @property
    def passed(self) -> bool:
        return len(self.bound_violations) == 0


def z_function(mu, grid: SincGrid, imat: SincIntegrationMatrix):
    """e^T (mu^-1 D^-1 + I^(-1))^-1 e; zero at mu = 0 by definition."""
    if mu == 0:
        return 0.0 + 0.0j
    dtype = complex if np.iscomplexobj(np.asarray(mu)) else float
    A = imat.dense().astype(dtype)
    A[np.diag_indices_from(A)] += 1.0 / (mu * grid.d)
    e = np.ones(grid.m, dtype=dtype)
    try:
        w = np.linalg.solve(A, e)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(mu) from exc
    return complex(e @ w)


def z_cross_check(mu, grid: SincGrid, imat: SincIntegrationMatrix):
    """Same value through the skew-part resolvent, z = 2 - 4/(2 + gamma)."""
    if mu == 0:
        return 0.0 + 0.0j
    dtype = complex if np.iscomplexobj(np.asarray(mu)) else float
    S = imat.dense() - 0.5 * np.ones((grid.m, grid.m))
    Phi = S.astype(dtype)
    Phi[np.diag_indices_from(Phi)] += 1.0 / (mu * grid.d)
    e = np.ones(grid.m, dtype=dtype)
    try:
        gamma = complex(e @ np.linalg.solve(Phi, e))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(mu) from exc
    return 2.0 - 4.0 / (2.0 + gamma)


def predicted_nonunity(mu, omega: float, grid: SincGrid, imat: SincIntegrationMatrix):
    """The single non-unity eigenvalue 2 / (2 - omega*z(mu)) predicted for
    a spatial eigenvalue -mu."""
    z = z_function(mu, grid, imat)
    denom = 2.0 - omega * z
    if abs(denom) < 1e-14:
        raise NearSingularPredictionError(f"2 - omega*z(mu) = {denom} at mu={mu}")
    return 2.0 / denom


def _classify_spectrum(eigs: np.ndarray) -> str | None:
    scale = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    if scale == 0.0:
        return None
    if np.max(np.abs(eigs.imag)) <= 1e-10 * scale and np.max(eigs.real) <= 1e-10 * scale:
        return "heat"
    if np.max(np.abs(eigs.real)) <= 1e-10 * scale:
        return "wave"
    return None


def dense_preconditioned_spectrum(model: ProblemModel, grid: SincGrid, omega: float = 1.0,
                                  approx: KroneckerApprox | None = None) -> SpectralReport:
    """Assemble P(omega)^-1 A densely, compute the full spectrum and check
    the containment region matching the averaged operator's spectrum:
    an interval on [1, 1/(1-omega)) for dissipative spectra, the annulus
    around 2/(2-omega) for purely imaginary ones."""
    size = grid.m * model.n
    if size > DENSE_CAP:
        raise SizeError(f"dense spectrum capped at {DENSE_CAP} unknowns, got {size}")
    imat = build_integration_matrix(grid.m)
    sys = build_system(model, grid, imat=imat)
    A = sys.dense()

    if approx is None:
        if sys.kind == "constant":
            kbar, dhat = sys.k_const, np.ones(grid.m)
        else:
            from .precond import kronecker_nkpa

            ap = kronecker_nkpa(sys.k_ops)
            kbar, dhat = ap.kbar, ap.dhat
    else:
        kbar, dhat = approx.kbar, approx.dhat

    s = build_damped_skew(imat, omega)
    kdense = operator_dense(kbar, model.n)
    tfac = s.matrix * (grid.d * dhat)[None, :]
    P = np.eye(size, dtype=np.result_type(kdense, float)) - np.kron(tfac, kdense)
    eigs = np.linalg.eigvals(np.linalg.solve(P, A))
    unity_count = int(np.sum(np.abs(eigs - 1.0) <= UNITY_TOL))

    kbar_eigs = np.linalg.eigvals(kdense)
    mus = -kbar_eigs
    predicted = []
    for mu in mus:
        mu = 0.0 if abs(mu) == 0 else (float(mu.real) if abs(mu.imag) <= 1e-12 * max(abs(mu), 1) else complex(mu))
        predicted.append(complex(predicted_nonunity(mu, omega, grid, imat)) if mu != 0 else 1.0 + 0.0j)
    predicted = np.asarray(predicted)

    kind = _classify_spectrum(kbar_eigs) if sys.kind == "constant" else None
    violations = []
    if kind == "heat":
        upper = np.inf if omega == 1.0 else 1.0 / (1.0 - omega) + BOUND_SLACK
        for lam in eigs:
            if abs(lam.imag) > BOUND_SLACK:
                violations.append((complex(lam), "real-part", float(abs(lam.imag))))
            if lam.real < 1.0 - BOUND_SLACK:
                violations.append((complex(lam), "interval-low", float(1.0 - lam.real)))
            if lam.real > upper:
                violations.append((complex(lam), "interval-high", float(lam.real - upper)))
    elif kind == "wave":
        if omega >= 1.0:
            raise ParameterError("the annulus containment needs omega < 1")
        center = 2.0 / (2.0 - omega)
        inner = omega / (2.0 - omega)
        outer = omega / ((2.0 - omega) * (1.0 - omega))
        for lam in eigs:
            rad = abs(lam - center)
            if rad < inner - BOUND_SLACK:
                violations.append((complex(lam), "annulus-inner", float(inner - rad)))
            if rad > outer + BOUND_SLACK:
                violations.append((complex(lam), "annulus-outer", float(rad - outer)))

    return SpectralReport(eigenvalues=eigs, predicted=predicted, unity_count=unity_count,
                          bound_violations=violations, bound_kind=kind)


def _normalized_cond(mat: np.ndarray) -> float:
    _, vec = np.linalg.eig(mat)
    vec = vec / np.linalg.norm(vec, axis=0)[None, :]
    sv = np.linalg.svd(vec, compute_uv=False)
    return float(sv[0] / sv[-1])


def condition_growth(Ms, omegas, T: float = 2.0, d: float = np.pi / 2,
                     alpha: float = 1.0) -> list:
    """Condition numbers of the time-factor eigenvector matrices.

    One row per (M, omega) with cond2V, plus the condition number cond2U
    of the undamped integration-matrix diagonalization for the same M.
    Per-cell eigensolver failures are recorded as NaN.
    """
    from .sinc import SincParams

    Ms = list(Ms)
    if not Ms or any(b <= a for a, b in zip(Ms, Ms[1:])):
        raise ParameterError("M values must be nonempty and ascending")
    rows = []
    for M in Ms:
        grid = build_grid(SincParams(T=T, M=M, d=d, alpha=alpha))
        imat = build_integration_matrix(grid.m)
        try:
            cond2U = _normalized_cond(imat.dense() * grid.d[None, :])
        except np.linalg.LinAlgError:
            cond2U = float("nan")
        for omega in omegas:
            try:
                s = build_damped_skew(imat, omega)
                pc = diagonalize_time_factor(s, grid)
                cond2V = pc.cond2V
            except (DiagonalizationError, np.linalg.LinAlgError):
                cond2V = float("nan")
            rows.append({"M": M, "omega": float(omega), "cond2V": cond2V, "cond2U": cond2U})
    return rows


def omega_sweep(model: ProblemModel, Ms, omegas, T: float = 2.0,
                tol: float = 1e-10, maxit: int = 60, threads=None) -> list:
    """Run the damped preconditioner across a grid of (M, omega) cells,
    recording iteration counts and errors; this exposes the regime where
    diagonalization roundoff degrades the solution.

    The iteration cap is deliberately modest: in the extreme-roundoff
    regime the polluted preconditioner stalls the solver, and the error
    column already tells the story."""
    from .sinc import SincParams

    rows = []
    for M in Ms:
        grid = build_grid(SincParams(T=T, M=M))
        for omega in omegas:
            t0 = time.perf_counter()
            try:
                run = solve_linear(model, grid, policy="p_omega", omega=omega,
                                   tol=tol, maxit=maxit, threads=threads)
                err = error_max(run.report.solution, model, grid) if model.exact else float("nan")
                rows.append({
                    "m": grid.m, "omega": float(omega), "error": err,
                    "iterations": run.report.iterations,
                    "converged": run.report.converged,
                    "seconds": time.perf_counter() - t0,
                })
            except (DiagonalizationError, np.linalg.LinAlgError) as exc:
                rows.append({
                    "m": grid.m, "omega": float(omega), "error": float("nan"),
                    "iterations": -1, "converged": False,
                    "seconds": time.perf_counter() - t0, "failure": str(exc),
                })
    return rows
