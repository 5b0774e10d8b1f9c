"""Sinc collocation in time on a bounded interval (0, T).

The logistic conformal map ``psi(z) = T*exp(z)/(1+exp(z))`` places the
collocation points ``t_j = psi(j*h)``, ``j = -M..M``, clustered at both
endpoints.  Functions are represented in the shifted cardinal (sinc) basis
composed with the inverse map ``phi(t) = log(t/(T-t))``.  This module
provides the temporal grid, pointwise interpolation (plain and
endpoint-corrected), and the dense Toeplitz matrix that collocates
indefinite integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import matmul_toeplitz, toeplitz
from scipy.special import expit, sici

from .errors import ParameterError

__all__ = [
    "SincParams",
    "SincGrid",
    "SincIntegrationMatrix",
    "build_grid",
    "sigma_value",
    "build_integration_matrix",
    "sinc_interpolate",
    "sinc_indefinite_integral",
]


@dataclass(frozen=True)
class SincParams:
    """Temporal discretization parameters.

    ``T`` is the final time (the interval is (0, T)), ``M`` the half-width
    of the collocation index range (m = 2M+1 points), ``d`` the half-width
    of the analyticity strip in (0, pi), and ``alpha`` the Hölder exponent
    in (0, 1] entering the step-size rule h = sqrt(pi*d/(alpha*M)).
    """

    T: float
    M: int
    d: float = np.pi / 2
    alpha: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ParameterError(f"final time must be positive, got T={self.T}")
        if not (0 < self.d < np.pi):
            raise ParameterError(f"strip half-width must lie in (0, pi), got d={self.d}")
        if not (0 < self.alpha <= 1):
            raise ParameterError(f"Hölder exponent must lie in (0, 1], got alpha={self.alpha}")
        if self.M < 0 or int(self.M) != self.M:
            raise ParameterError(f"half-width must be a nonnegative integer, got M={self.M}")

    @property
    def m(self) -> int:
        return 2 * self.M + 1


@dataclass(frozen=True, eq=False)
class SincGrid:
    """Collocation grid data.

    ``points`` holds the m = 2M+1 time values t_j in ascending order,
    ``weights`` the map derivatives psi'(j*h) = t_j (T - t_j) / T, and
    ``d`` the diagonal entries h * psi'(j*h) of the scaling matrix D.
    """

    params: SincParams
    h: float
    points: np.ndarray
    weights: np.ndarray
    d: np.ndarray

    @property
    def m(self) -> int:
        return self.points.size

    @property
    def T(self) -> float:
        return self.params.T

    def index_range(self) -> np.ndarray:
        M = self.params.M
        return np.arange(-M, M + 1)

    def phi(self, t):
        """Inverse conformal map log(t/(T-t)); +-inf at the endpoints."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(t) - np.log(self.T - t)


def build_grid(p: SincParams) -> SincGrid:
    """Build the collocation grid for the given parameters.

    For M >= 1 the step is h = sqrt(pi*d/(alpha*M)); the degenerate M = 0
    grid keeps a single midpoint t_0 = T/2 with the M = 1 step size.
    """
    h = float(np.sqrt(np.pi * p.d / (p.alpha * max(p.M, 1))))
    j = np.arange(-p.M, p.M + 1)
    # expit keeps both tails accurate and makes t_{-j} + t_j = T hold to
    # rounding by construction
    pos = expit(j * h)
    neg = expit(-j * h)
    points = p.T * pos
    weights = p.T * pos * neg
    return SincGrid(params=p, h=h, points=points, weights=weights, d=h * weights)


def sigma_value(k: int) -> float:
    """Entry generator 1/2 + integral of sin(pi t)/(pi t) over [0, k].

    Negative indices use the even-integrand symmetry exactly, so
    sigma_value(-k) == 1 - sigma_value(k) bitwise.
    """
    k = int(k)
    if k < 0:
        return 1.0 - sigma_value(-k)
    if k == 0:
        return 0.5
    return 0.5 + float(sici(np.pi * k)[0]) / np.pi


def _sigma_array(m: int) -> np.ndarray:
    # values sigma_{-(m-1)} .. sigma_{m-1}; symmetry enforced exactly
    k = np.arange(m)
    si = sici(np.pi * k)[0] / np.pi
    out = np.empty(2 * m - 1)
    out[m - 1 :] = 0.5 + si
    out[: m - 1] = (0.5 - si[1:])[::-1]
    return out


@dataclass(frozen=True, eq=False)
class SincIntegrationMatrix:
    """Collocated indefinite-integration matrix, Toeplitz with entry
    (l, j) = sigma_{l-j}.

    ``sigma`` stores the generator for offsets -(m-1)..(m-1); dense
    materialization and an FFT-based panel product are provided.
    """

    m: int
    sigma: np.ndarray

    def value(self, offset: int) -> float:
        return float(self.sigma[offset + self.m - 1])

    def first_column(self) -> np.ndarray:
        return self.sigma[self.m - 1 :]

    def first_row(self) -> np.ndarray:
        return self.sigma[self.m - 1 :: -1]

    def dense(self) -> np.ndarray:
        return toeplitz(self.first_column(), self.first_row())

    def matmul(self, x: np.ndarray) -> np.ndarray:
        """Product with a vector or an (m, k) panel via the generator."""
        x = np.asarray(x)
        if x.shape[0] != self.m:
            raise ParameterError(f"operand has leading dimension {x.shape[0]}, expected {self.m}")
        if self.m == 1:
            return self.sigma[0] * x
        return matmul_toeplitz((self.first_column(), self.first_row()), x)


def build_integration_matrix(m: int) -> SincIntegrationMatrix:
    """Build the m x m integration matrix; m must be odd and positive."""
    if m < 1 or m % 2 == 0:
        raise ParameterError(f"matrix dimension must be a positive odd integer, got m={m}")
    return SincIntegrationMatrix(m=m, sigma=_sigma_array(m))


def _as_time_array(t):
    t = np.asarray(t, dtype=float)
    return t.reshape(-1), t.ndim == 0


def sinc_interpolate(values, grid: SincGrid, t, modified: bool = False):
    """Evaluate the cardinal-basis interpolant of collocation samples.

    The plain form sums values[j] * S[j,h](phi(t)) and requires
    t strictly inside (0, T); it reproduces the samples at the grid points.
    The modified form adds the two linear auxiliary basis functions so the
    endpoints t = 0 and t = T are admissible, anchoring them at the first
    and last sample.

    ``values`` may be (m,) or (m, k); evaluation maps columns independently.
    """
    values = np.asarray(values)
    if values.shape[0] != grid.m:
        raise ParameterError(f"got {values.shape[0]} samples for an m={grid.m} grid")
    ts, scalar = _as_time_array(t)
    T = grid.T
    if modified:
        if np.any(ts < 0) or np.any(ts > T):
            raise ParameterError("time outside [0, T]")
    else:
        if np.any(ts <= 0) or np.any(ts >= T):
            raise ParameterError("plain interpolation needs t strictly inside (0, T)")

    j = grid.index_range()
    inner = (ts > 0) & (ts < T)
    x = np.zeros_like(ts)
    x[inner] = grid.phi(ts[inner]) / grid.h
    basis = np.sinc(x[:, None] - j[None, :])
    basis[~inner] = 0.0
    # times that coincide bitwise with a collocation point take the exact
    # cardinal row: near the right endpoint, T - t_l carries too few bits
    # to recover the map coordinate at full accuracy
    hit = ts[:, None] == grid.points[None, :]
    rows = np.nonzero(hit.any(axis=1))[0]
    if rows.size:
        basis[rows] = np.where(hit[rows], 1.0, 0.0)

    if not modified:
        out = basis @ values
    else:
        wa_t = (T - ts) / T
        wb_t = ts / T
        wa_j = (T - grid.points) / T
        wb_j = grid.points / T
        fa = values[0]
        fb = values[-1]
        if values.ndim == 1:
            corrected = values - fa * wa_j - fb * wb_j
            out = fa * wa_t + fb * wb_t + basis @ corrected
        else:
            corrected = values - wa_j[:, None] * fa[None, :] - wb_j[:, None] * fb[None, :]
            out = wa_t[:, None] * fa[None, :] + wb_t[:, None] * fb[None, :] + basis @ corrected
    return out[0] if scalar else out


def sinc_indefinite_integral(values, grid: SincGrid, t):
    """Evaluate the collocated indefinite integral from 0 to t.

    Sums values[j] * psi'(jh) * J[j,h](phi(t)) where J[j,h](x) is
    h*(1/2 + Si(pi*(x/h - j))/pi).  At the collocation points this reduces
    to rows of the integration matrix times D.
    """
    values = np.asarray(values)
    if values.shape[0] != grid.m:
        raise ParameterError(f"got {values.shape[0]} samples for an m={grid.m} grid")
    ts, scalar = _as_time_array(t)
    T = grid.T
    if np.any(ts < 0) or np.any(ts > T):
        raise ParameterError("time outside [0, T]")

    j = grid.index_range()
    x = grid.phi(ts) / grid.h
    args = np.pi * (x[:, None] - j[None, :])
    jvals = grid.h * (0.5 + sici(args)[0] / np.pi)
    if values.ndim == 1:
        out = jvals @ (grid.weights * values)
    else:
        out = jvals @ (grid.weights[:, None] * values)
    return out[0] if scalar else out
