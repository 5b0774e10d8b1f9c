"""Right-preconditioned GMRES without restarts.

Arnoldi with modified Gram-Schmidt plus one conditional
reorthogonalization pass, Givens-rotation least squares, zero initial
guess.  With right preconditioning the Arnoldi residual estimates the true
residual of the original system directly; the true residual is still
recomputed once at exit because the estimate can drift on ill-conditioned
operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailureError, ParameterError

__all__ = ["GmresConfig", "GmresReport", "gmres"]

_BREAKDOWN = 1e-14
_REORTH = 1e-8


@dataclass(frozen=True)
class GmresConfig:
    tol: float = 1e-10
    maxit: int = 1000
    record_history: bool = True

    def __post_init__(self):
        if not (0 < self.tol < 1):
            raise ParameterError(f"tolerance must lie in (0, 1), got {self.tol}")
        if self.maxit < 1:
            raise ParameterError(f"iteration cap must be >= 1, got {self.maxit}")


@dataclass(frozen=True, eq=False)
class GmresReport:
    solution: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    true_residual: float = 0.0
    breakdown: bool = False


def gmres(apply_A, b, apply_Pinv=None, cfg: GmresConfig | None = None) -> GmresReport:
    """Solve A x = b with operator and optional right-preconditioner handles.

    Returns the iterate, the iteration count, the per-step relative
    residual estimates, and the recomputed true relative residual.
    Breakdown (an exactly invariant Krylov space) returns the current
    iterate with the flag set; non-finite values raise.
    """
    cfg = cfg or GmresConfig()
    b = np.asarray(b, dtype=float)
    n = b.size
    bnorm = float(np.linalg.norm(b))
    if not np.isfinite(bnorm):
        raise NumericalFailureError("right-hand side contains NaN or Inf")
    if bnorm == 0.0:
        return GmresReport(solution=np.zeros(n), iterations=0, residual_history=[],
                           converged=True, true_residual=0.0)

    maxit = min(cfg.maxit, n)
    history = [1.0]

    chunk = min(maxit + 1, 32)
    Q = np.empty((chunk, n))
    Q[0] = b / bnorm
    H = np.zeros((chunk, chunk - 1))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = bnorm

    breakdown = False
    k_done = 0
    for k in range(maxit):
        if k + 2 > Q.shape[0]:
            grow = min(maxit + 1, 2 * Q.shape[0])
            Q = np.vstack([Q, np.empty((grow - Q.shape[0], n))])
            Hnew = np.zeros((grow, grow - 1))
            Hnew[: H.shape[0], : H.shape[1]] = H
            H = Hnew

        z = apply_Pinv(Q[k]) if apply_Pinv is not None else Q[k]
        # copy: an operator may return its input (e.g. the identity), and
        # the in-place orthogonalization below must not touch the basis
        w = np.array(apply_A(z), dtype=float)
        if not np.all(np.isfinite(w)):
            raise NumericalFailureError(f"operator output not finite at iteration {k + 1}")

        for i in range(k + 1):
            hik = float(Q[i] @ w)
            H[i, k] += hik
            w -= hik * Q[i]
        # one conditional reorthogonalization pass
        wnorm = float(np.linalg.norm(w))
        corr = Q[: k + 1] @ w
        if float(np.linalg.norm(corr)) > _REORTH * max(wnorm, 1e-300):
            w -= corr @ Q[: k + 1]
            H[: k + 1, k] += corr
            wnorm = float(np.linalg.norm(w))

        H[k + 1, k] = wnorm
        if wnorm <= _BREAKDOWN * bnorm:
            breakdown = True
        else:
            Q[k + 1] = w / wnorm

        # apply stored rotations, then eliminate the new subdiagonal entry
        for i in range(k):
            tmp = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
            H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
            H[i, k] = tmp
        nu = float(np.hypot(H[k, k], H[k + 1, k]))
        if nu == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k], sn[k] = H[k, k] / nu, H[k + 1, k] / nu
        H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]

        k_done = k + 1
        rel = abs(g[k + 1]) / bnorm
        if not breakdown:
            history.append(rel)
        if breakdown or rel <= cfg.tol:
            break

    k = k_done
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        rii = H[i, i]
        y[i] = 0.0 if rii == 0.0 else (g[i] - H[i, i + 1 : k] @ y[i + 1 :]) / rii
    u = y @ Q[:k]
    x = apply_Pinv(u) if apply_Pinv is not None else u

    true_rel = float(np.linalg.norm(b - np.asarray(apply_A(x), dtype=float)) / bnorm)
    if breakdown:
        history.append(max(true_rel, np.finfo(float).tiny))
    converged = true_rel <= cfg.tol
    return GmresReport(
        solution=x,
        iterations=k,
        residual_history=history if cfg.record_history else [],
        converged=converged,
        true_residual=true_rel,
        breakdown=breakdown,
    )
