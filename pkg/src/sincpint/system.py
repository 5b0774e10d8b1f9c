"""All-at-once space-time operators.

The collocated integral form of an initial-value problem couples all time
points into one system in the stacked unknown [y(t_{-M}); ...; y(t_M)].
Operators act matrix-free: a vector is reshaped into an (m, n) panel of
time blocks, the spatial operator is applied block-wise, and the temporal
coupling is one dense (or FFT) Toeplitz product.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, ShapeError, SizeError
from .sinc import SincGrid, SincIntegrationMatrix, build_integration_matrix

__all__ = [
    "AllAtOnceSystem",
    "assemble_constant",
    "assemble_varying",
    "assemble_nonlinear",
    "operator_dense",
    "DENSE_CAP",
]

DENSE_CAP = 5000


def _apply_operator(K, vec):
    if callable(K):
        return K(vec)
    return K @ vec


def _apply_panel(K, panel):
    # panel rows are time blocks; matrix-like operators get one gemm
    if callable(K):
        return np.stack([K(row) for row in panel])
    return (K @ panel.T).T


def operator_dense(K, n: int) -> np.ndarray:
    """Materialize an operator given as array, sparse matrix or callable."""
    if sp.issparse(K):
        return K.toarray()
    if callable(K):
        cols = [np.asarray(K(col)) for col in np.eye(n)]
        return np.stack(cols, axis=1)
    K = np.asarray(K)
    if K.shape != (n, n):
        raise ShapeError(f"operator has shape {K.shape}, expected ({n}, {n})")
    return K


@dataclass(frozen=True, eq=False)
class AllAtOnceSystem:
    """Operator form of the coupled space-time system plus right-hand side.

    ``kind`` is one of "constant", "varying", "nonlinear".  Linear kinds
    apply  y - (I^(-1) D  (x) I_n) K y;  the nonlinear kind carries the
    per-block evaluator q(t, y) and its Jacobian.
    """

    grid: SincGrid
    imat: SincIntegrationMatrix
    n: int
    rhs: np.ndarray
    kind: str
    k_const: object | None = None
    k_ops: tuple | None = None
    q: object | None = None
    dq: object | None = None
    initial_state: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def size(self) -> int:
        return self.m * self.n

    def _check(self, y) -> np.ndarray:
        y = np.asarray(y)
        if y.shape != (self.size,):
            raise ShapeError(f"vector has shape {y.shape}, expected ({self.size},)")
        return y

    def _coupled(self, panel: np.ndarray) -> np.ndarray:
        # (I^(-1) D (x) I_n) applied to stacked blocks
        return self.imat.matmul(self.grid.d[:, None] * panel)

    def _k_panel(self, panel: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return _apply_panel(self.k_const, panel)
        if self.kind == "varying":
            return np.stack([_apply_operator(K, row) for K, row in zip(self.k_ops, panel)])
        raise ParameterError("nonlinear systems have no linear block application")

    def apply(self, y) -> np.ndarray:
        """Matrix-vector product of the linear all-at-once operator."""
        y = self._check(y)
        panel = y.reshape(self.m, self.n)
        return y - self._coupled(self._k_panel(panel)).ravel()

    def q_stack(self, y) -> np.ndarray:
        y = self._check(y)
        panel = y.reshape(self.m, self.n)
        return np.stack([self.q(t, row) for t, row in zip(self.grid.points, panel)])

    def residual(self, y) -> np.ndarray:
        """F(y) - b for the nonlinear kind, A y - b for linear kinds."""
        if self.kind != "nonlinear":
            return self.apply(y) - self.rhs
        y = self._check(y)
        return y - self._coupled(self.q_stack(y)).ravel() - self.rhs

    def jacobian(self, y) -> "AllAtOnceSystem":
        """Linearization at y: a varying-coefficient system whose blocks
        are the per-time Jacobians of q."""
        if self.kind != "nonlinear":
            raise ParameterError("jacobian is defined for nonlinear systems only")
        y = self._check(y)
        panel = y.reshape(self.m, self.n)
        ops = tuple(self.dq(t, row) for t, row in zip(self.grid.points, panel))
        return replace(self, kind="varying", k_ops=ops, q=None, dq=None,
                       rhs=np.zeros(self.size))

    def dense(self) -> np.ndarray:
        """Explicit assembly, capped at small sizes for oracle checks."""
        if self.size > DENSE_CAP:
            raise SizeError(f"dense assembly capped at {DENSE_CAP}, got {self.size}")
        T = self.imat.dense() * self.grid.d[None, :]
        if self.kind == "constant":
            Kd = operator_dense(self.k_const, self.n)
            return np.eye(self.size) - np.kron(T, Kd)
        if self.kind == "varying":
            blocks = [operator_dense(K, self.n) for K in self.k_ops]
            dtype = complex if any(np.iscomplexobj(B) for B in blocks) else float
            A = np.eye(self.size, dtype=dtype)
            for l in range(self.m):
                for j in range(self.m):
                    A[l * self.n:(l + 1) * self.n, j * self.n:(j + 1) * self.n] -= T[l, j] * blocks[j]
            return A
        raise ParameterError("dense assembly only for linear kinds; linearize first")


def _build_rhs(grid: SincGrid, imat: SincIntegrationMatrix, n: int, g, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (n,):
        raise ShapeError(f"initial vector has shape {r.shape}, expected ({n},)")
    rhs = np.tile(r, grid.m)
    if g is not None:
        G = np.stack([np.asarray(g(t), dtype=float) for t in grid.points])
        if G.shape != (grid.m, n):
            raise ShapeError(f"source evaluates to shape {G.shape}, expected ({grid.m}, {n})")
        rhs = rhs + imat.matmul(grid.d[:, None] * G).ravel()
    return rhs


def assemble_constant(K, grid: SincGrid, g, r, imat: SincIntegrationMatrix | None = None) -> AllAtOnceSystem:
    """System with a single time-independent spatial operator."""
    imat = imat or build_integration_matrix(grid.m)
    n = np.asarray(r).shape[0]
    return AllAtOnceSystem(grid=grid, imat=imat, n=n, rhs=_build_rhs(grid, imat, n, g, r),
                           kind="constant", k_const=K, initial_state=np.asarray(r, dtype=float))


def assemble_varying(Ks, grid: SincGrid, g, r, imat: SincIntegrationMatrix | None = None) -> AllAtOnceSystem:
    """System with one spatial operator per collocation time, ascending."""
    if len(Ks) != grid.m:
        raise ShapeError(f"got {len(Ks)} operators for an m={grid.m} grid")
    imat = imat or build_integration_matrix(grid.m)
    n = np.asarray(r).shape[0]
    return AllAtOnceSystem(grid=grid, imat=imat, n=n, rhs=_build_rhs(grid, imat, n, g, r),
                           kind="varying", k_ops=tuple(Ks), initial_state=np.asarray(r, dtype=float))


def assemble_nonlinear(q, dq, grid: SincGrid, g, r, imat: SincIntegrationMatrix | None = None) -> AllAtOnceSystem:
    """Nonlinear system with per-block evaluator q(t, y) and Jacobian dq(t, y)."""
    imat = imat or build_integration_matrix(grid.m)
    n = np.asarray(r).shape[0]
    return AllAtOnceSystem(grid=grid, imat=imat, n=n, rhs=_build_rhs(grid, imat, n, g, r),
                           kind="nonlinear", q=q, dq=dq, initial_state=np.asarray(r, dtype=float))
