"""Semi-discretized benchmark problems.

Each model bundles the spatial operator (or the nonlinear right-hand
side), manufactured source and initial data, the exact solution when one
is available, and a fast complex-shifted solver (I - lambda*K) x = r for
the parallel-in-time stage: discrete-sine-transform diagonalization for
the Dirichlet Laplacian, block elimination for the first-order wave
system, banded elimination for tridiagonal operators.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.fft import dstn
from scipy.linalg import solve_banded

from .errors import (
    ParameterError,
    ShapeError,
    ShiftSolveError,
    UnsupportedMetricError,
)
from .precond import _frobenius_inner, shift_solvers_from_operator
from .sinc import SincGrid, sinc_interpolate

__all__ = [
    "ProblemModel",
    "laplacian_1d",
    "laplacian_2d",
    "make_heat2d_const",
    "make_heat2d_varying",
    "make_wave2d",
    "make_allen_cahn",
    "make_synthetic_diagonal",
    "error_max",
    "with_reference",
]


@dataclass(frozen=True, eq=False)
class ProblemModel:
    """A semi-discretized initial-value problem.

    Exactly one of ``K`` (constant operator), ``k_of_t`` (time-varying
    family) or ``q``/``dq`` (nonlinear evaluator and Jacobian) is set.
    ``shift_factory(Kbar)`` returns a fast solver handle
    (lambda, rhs) -> x for (I - lambda*Kbar) x = rhs, used for whatever
    averaged operator the preconditioner ends up with; ``shifted_solve``
    is the handle bound to the model's own constant operator when that
    exists.
    """

    n: int
    kind: str
    r: np.ndarray
    K: object | None = None
    k_of_t: object | None = None
    q: object | None = None
    dq: object | None = None
    g: object | None = None
    exact: object | None = None
    shifted_solve: object | None = None
    shift_factory: object | None = None
    hx: float | None = None

    def operator_at(self, t: float):
        if self.k_of_t is not None:
            return self.k_of_t(t)
        return self.K


def laplacian_1d(n: int, length: float, bc=(0.0, 0.0)):
    """Three-point Dirichlet Laplacian on ``n`` interior points.

    Returns (matrix, forcing, hx) where ``forcing`` carries the
    nonhomogeneous boundary values lifted into the right-hand side.
    """
    if n < 2:
        raise ParameterError(f"need at least 2 interior points, got {n}")
    hx = length / (n + 1)
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    lap = sp.diags([off, main, off], [-1, 0, 1], format="csr") / hx**2
    forcing = np.zeros(n)
    forcing[0] = bc[0] / hx**2
    forcing[-1] = bc[1] / hx**2
    return lap, forcing, hx


def laplacian_2d(n_per_side: int, length: float):
    """Five-point Dirichlet Laplacian on an n x n interior grid."""
    lap1, _, hx = laplacian_1d(n_per_side, length)
    eye = sp.identity(n_per_side, format="csr")
    lap2 = sp.kron(lap1, eye, format="csr") + sp.kron(eye, lap1, format="csr")
    return lap2, hx


def _dirichlet_eigenvalues(n: int, hx: float) -> np.ndarray:
    k = np.arange(1, n + 1)
    return (2.0 * np.cos(k * np.pi / (n + 1)) - 2.0) / hx**2


def _dst2(field: np.ndarray) -> np.ndarray:
    # orthonormal DST-I is involutory; split complex input explicitly
    if np.iscomplexobj(field):
        return dstn(field.real, type=1, norm="ortho") + 1j * dstn(field.imag, type=1, norm="ortho")
    return dstn(field, type=1, norm="ortho")


def _dst_shift_solver(mu_grid: np.ndarray, shape):
    """(I - lam * Lap) solver on the eigenbasis of the Dirichlet Laplacian."""

    def solve(lam, rhs):
        rhs = np.asarray(rhs)
        denom = 1.0 - lam * mu_grid
        if np.min(np.abs(denom)) < 1e-14:
            raise ShiftSolveError(None, lam, "singular sine-transform denominator")
        return _dst2(_dst2(rhs.reshape(shape)) / denom).ravel()

    return solve


def _scale_of(Kbar, base) -> float | None:
    """Best scalar c with Kbar ~= c * base, or None if the fit is poor."""
    denom = _frobenius_inner(base, base)
    c = _frobenius_inner(Kbar, base) / denom
    diff = Kbar - c * base
    if sp.issparse(diff):
        mismatch = sp.linalg.norm(diff)
    else:
        mismatch = np.linalg.norm(diff)
    if mismatch <= 1e-10 * max(abs(c) * np.sqrt(denom), 1e-300):
        return float(c)
    return None


def _profile_1d(n: int, hx: float, length: float = np.pi) -> np.ndarray:
    x = np.arange(1, n + 1) * hx
    return x * (length - x)


def make_heat2d_const(n_per_side: int, T: float = 2.0) -> ProblemModel:
    """Heat equation on (0, pi)^2 with zero Dirichlet data and the source
    manufactured for the separable quadratic profile times exp(-t).

    The profile is a product of quadratics, so the centered scheme
    differentiates it exactly and all discretization error is temporal.
    """
    if n_per_side < 4:
        raise ParameterError(f"need n_per_side >= 4, got {n_per_side}")
    n = n_per_side**2
    lap2, hx = laplacian_2d(n_per_side, np.pi)
    p1 = _profile_1d(n_per_side, hx)
    prof = np.outer(p1, p1).ravel()
    bump = (p1[:, None] + p1[None, :]).ravel()  # -Lap(profile) / 2

    def g(t):
        return np.exp(-t) * (2.0 * bump - prof)

    def exact(t):
        return np.exp(-t) * prof

    mu1 = _dirichlet_eigenvalues(n_per_side, hx)
    mu_grid = mu1[:, None] + mu1[None, :]
    dst_solve = _dst_shift_solver(mu_grid, (n_per_side, n_per_side))

    def shift_factory(Kbar):
        c = _scale_of(Kbar, lap2)
        if c is not None:
            return lambda lam, rhs: dst_solve(lam * c, rhs)
        return _generic_factory(Kbar)

    return ProblemModel(
        n=n, kind="heat2d_const", r=prof.copy(), K=lap2, g=g, exact=exact,
        shifted_solve=dst_solve, shift_factory=shift_factory, hx=hx,
    )


def make_heat2d_varying(n_per_side: int, T: float = 2.0) -> ProblemModel:
    """Heat equation on (0, pi)^2 with diffusivity 1/((1.2+t) ln(1.2+t))
    and source manufactured for the quadratic profile over ln(1.2+t)."""
    if n_per_side < 4:
        raise ParameterError(f"need n_per_side >= 4, got {n_per_side}")
    n = n_per_side**2
    lap2, hx = laplacian_2d(n_per_side, np.pi)
    p1 = _profile_1d(n_per_side, hx)
    prof = np.outer(p1, p1).ravel()
    bump = (p1[:, None] + p1[None, :]).ravel()

    def kappa(t):
        return 1.0 / ((1.2 + t) * np.log(1.2 + t))

    def k_of_t(t):
        return kappa(t) * lap2

    def g(t):
        rho = 1.0 / np.log(1.2 + t)
        return -kappa(t) * rho * (prof - 2.0 * bump)

    def exact(t):
        return prof / np.log(1.2 + t)

    mu1 = _dirichlet_eigenvalues(n_per_side, hx)
    mu_grid = mu1[:, None] + mu1[None, :]
    dst_solve = _dst_shift_solver(mu_grid, (n_per_side, n_per_side))

    def shift_factory(Kbar):
        c = _scale_of(Kbar, lap2)
        if c is not None:
            return lambda lam, rhs: dst_solve(lam * c, rhs)
        return _generic_factory(Kbar)

    return ProblemModel(
        n=n, kind="heat2d_varying", r=prof / np.log(1.2), k_of_t=k_of_t, g=g,
        exact=exact, shift_factory=shift_factory, hx=hx,
    )


def make_wave2d(n_per_side: int, T: float = 2.0) -> ProblemModel:
    """Wave equation on (0, pi)^2 reduced to a first-order system in
    (y, y_t); state dimension is 2 n_per_side^2.

    The shifted solve eliminates the velocity block, solves
    (I - lambda^2 Lap) on the position block by sine transform, and
    back-substitutes.
    """
    if n_per_side < 4:
        raise ParameterError(f"need n_per_side >= 4, got {n_per_side}")
    n2 = n_per_side**2
    lap2, hx = laplacian_2d(n_per_side, np.pi)
    p1 = _profile_1d(n_per_side, hx)
    prof = np.outer(p1, p1).ravel()
    bump = (p1[:, None] + p1[None, :]).ravel()
    eye = sp.identity(n2, format="csr")
    zero = sp.csr_matrix((n2, n2))
    K = sp.bmat([[zero, eye], [lap2, zero]], format="csr")

    def g(t):
        g2 = -prof / (1.0 + t) ** 2 + 2.0 * np.log(1.0 + t) * bump
        return np.concatenate([np.zeros(n2), g2])

    def exact(t):
        return np.concatenate([np.log(1.0 + t) * prof, prof / (1.0 + t)])

    r = np.concatenate([np.zeros(n2), prof])

    mu1 = _dirichlet_eigenvalues(n_per_side, hx)
    mu_grid = mu1[:, None] + mu1[None, :]
    shape = (n_per_side, n_per_side)

    def block_solve(lam, rhs, scale=1.0):
        rhs = np.asarray(rhs)
        ry, rp = rhs[:n2], rhs[n2:]
        lam = lam * scale
        denom = 1.0 - lam**2 * mu_grid
        if np.min(np.abs(denom)) < 1e-14:
            raise ShiftSolveError(None, lam, "singular sine-transform denominator")
        ysol = _dst2(_dst2((ry + lam * rp).reshape(shape)) / denom).ravel()
        psol = rp + lam * (lap2 @ ysol)
        return np.concatenate([ysol, psol])

    def shift_factory(Kbar):
        c = _scale_of(Kbar, K)
        if c is not None:
            return lambda lam, rhs: block_solve(lam, rhs, scale=c)
        return _generic_factory(Kbar)

    return ProblemModel(
        n=2 * n2, kind="wave2d", r=r, K=K, g=g, exact=exact,
        shifted_solve=block_solve, shift_factory=shift_factory, hx=hx,
    )


def _banded_factory(Kbar):
    """Tridiagonal (I - lambda*Kbar) solves via banded LU."""
    Kc = sp.csr_matrix(Kbar)
    n = Kc.shape[0]
    lower = np.zeros(n, dtype=complex)
    main = np.zeros(n, dtype=complex)
    upper = np.zeros(n, dtype=complex)
    main[:] = Kc.diagonal()
    lower[:-1] = Kc.diagonal(-1)
    upper[1:] = Kc.diagonal(1)

    def solve(lam, rhs):
        ab = np.zeros((3, n), dtype=complex)
        ab[0] = -lam * upper
        ab[1] = 1.0 - lam * main
        ab[2] = -lam * lower
        return solve_banded((1, 1), ab, np.asarray(rhs, dtype=complex))

    return solve


def _generic_factory(Kbar):
    """Fallback shifted solver: factorize per eigenvalue on demand."""
    cache = {}

    def solve(lam, rhs):
        key = complex(lam)
        if key not in cache:
            cache[key] = shift_solvers_from_operator(Kbar, [key])[0]
        return cache[key](np.asarray(rhs, dtype=complex))

    return solve


def _is_tridiagonal(K) -> bool:
    if not sp.issparse(K):
        return False
    coo = K.tocoo()
    return bool(np.all(np.abs(coo.row - coo.col) <= 1))


def make_allen_cahn(n: int, T: float = 2.0) -> ProblemModel:
    """Bistable reaction-diffusion problem on (-1, 1) with +-1 Dirichlet
    data: y_t = 0.01 y_xx + y - y^3, initial 0.53 x + 0.47 sin(-1.5 pi x).

    Boundary lifting is folded into the nonlinearity; Jacobian blocks are
    tridiagonal, so the averaged operator stays banded.
    """
    if n < 8:
        raise ParameterError(f"need n >= 8 interior points, got {n}")
    lap, forcing, hx = laplacian_1d(n, 2.0, bc=(-1.0, 1.0))
    x = -1.0 + np.arange(1, n + 1) * hx
    nu = 0.01
    bf = nu * forcing

    def q(t, y):
        return nu * (lap @ y) + bf + y - y**3

    def dq(t, y):
        return nu * lap + sp.diags(1.0 - 3.0 * y**2)

    r = 0.53 * x + 0.47 * np.sin(-1.5 * np.pi * x)

    def shift_factory(Kbar):
        if _is_tridiagonal(Kbar):
            return _banded_factory(Kbar)
        return _generic_factory(Kbar)

    return ProblemModel(
        n=n, kind="allen_cahn", r=r, q=q, dq=dq, shift_factory=shift_factory, hx=hx,
    )


def make_synthetic_diagonal(eigs, r=None) -> ProblemModel:
    """Diagonal operator with a prescribed spectrum, for spectral checks."""
    eigs = np.asarray(eigs)
    n = eigs.size
    K = np.diag(eigs)
    r = np.ones(n) if r is None else np.asarray(r, dtype=float)
    if r.shape != (n,):
        raise ShapeError(f"initial vector has shape {r.shape}, expected ({n},)")

    def shifted_solve(lam, rhs):
        denom = 1.0 - lam * eigs
        if np.min(np.abs(denom)) < 1e-14:
            raise ShiftSolveError(None, lam, "singular diagonal shift")
        return np.asarray(rhs) / denom

    def shift_factory(Kbar):
        dK = np.diag(np.asarray(Kbar)) if not sp.issparse(Kbar) else Kbar.diagonal()

        def solve(lam, rhs):
            denom = 1.0 - lam * dK
            if np.min(np.abs(denom)) < 1e-14:
                raise ShiftSolveError(None, lam, "singular diagonal shift")
            return np.asarray(rhs) / denom

        return solve

    return ProblemModel(
        n=n, kind="synthetic", r=r, K=K,
        shifted_solve=shifted_solve, shift_factory=shift_factory,
    )


def error_max(y_h, model: ProblemModel, grid: SincGrid) -> float:
    """Maximum absolute error over all collocation times and components."""
    if model.exact is None:
        raise UnsupportedMetricError(f"model {model.kind} has no exact or reference solution")
    y_h = np.asarray(y_h)
    if y_h.shape != (grid.m * model.n,):
        raise ShapeError(f"solution has shape {y_h.shape}, expected ({grid.m * model.n},)")
    panel = y_h.reshape(grid.m, model.n)
    err = 0.0
    for t, row in zip(grid.points, panel):
        err = max(err, float(np.max(np.abs(row - model.exact(t)))))
    return err


def with_reference(model: ProblemModel, values: np.ndarray, ref_grid: SincGrid) -> ProblemModel:
    """Install a reference evaluator built from a finer collocation run,
    evaluated anywhere in [0, T] by endpoint-corrected interpolation."""
    panel = np.asarray(values).reshape(ref_grid.m, model.n)

    def exact(t):
        return sinc_interpolate(panel, ref_grid, t, modified=True)

    return replace(model, exact=exact)
