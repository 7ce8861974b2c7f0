"""Compressed-row matrices and Krylov solvers (CG, BiCGSTAB).

Storage and the sparse mat-vec are delegated to ``scipy.sparse.csr_matrix``;
the iterations themselves are written out here so that the stopping rule,
preconditioning and reporting are the same for every caller.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed to reach its tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SparseMatrix:
    """Square CSR matrix with sorted, duplicate-free column indices."""

    def __init__(self, csr):
        csr = sp.csr_matrix(csr, dtype=float)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"matrix must be square, got {csr.shape}")
        csr.sum_duplicates()
        csr.sort_indices()
        self._csr = csr

    @classmethod
    def from_triplets(cls, rows, cols, vals, n: int) -> "SparseMatrix":
        """Assemble from COO triplets; repeated entries are summed."""
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr())

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        return cls(sp.csr_matrix(np.asarray(a, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(sp.identity(n, format="csr"))

    @property
    def n(self) -> int:
        return self._csr.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def data(self) -> np.ndarray:
        return self._csr.data

    @property
    def csr(self):
        return self._csr

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ x

    __matmul__ = matvec

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self._csr.T.tocsr())

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def scaled_add_identity(self, alpha: float, beta: float = 1.0) -> "SparseMatrix":
        """Return ``beta*I + alpha*A``."""
        return SparseMatrix(beta * sp.identity(self.n, format="csr") + alpha * self._csr)


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    history: list = field(default_factory=list, repr=False)


def _check_dims(A, b, x0):
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError(f"rhs shape {b.shape} does not match matrix dimension {A.n}")
    x = np.zeros(A.n) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (A.n,):
        raise ValueError(f"initial guess shape {x.shape} does not match matrix dimension {A.n}")
    return b, x


def _jacobi(A, enabled):
    if not enabled:
        return None
    d = A.diagonal()
    if np.any(d == 0):
        return None
    return 1.0 / d


def cg_solve(A: SparseMatrix, b, x0=None, tol: float = 1e-12, maxit: int | None = None,
             precondition: bool = True):
    """Jacobi-preconditioned conjugate gradients for SPD (or consistent SPSD) systems.

    Stops when ``||b - A x||_2 <= tol * max(1, ||b||_2)``. Non-convergence is
    reported, not raised.
    """
    b, x = _check_dims(A, b, x0)
    if tol <= 0:
        raise ValueError("tol must be positive")
    maxit = 10 * A.n if maxit is None else maxit
    target = tol * max(1.0, float(np.linalg.norm(b)))
    minv = _jacobi(A, precondition)

    r = b - A.matvec(x)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    it = 0
    # the recurrence residual can drift below the true one; restart from the
    # true residual a few times before giving up
    for _ in range(4):
        if rnorm <= target or it >= maxit:
            break
        z = r * minv if minv is not None else r
        p = z.copy()
        rz = float(r @ z)
        while it < maxit:
            it += 1
            Ap = A.matvec(p)
            pAp = float(p @ Ap)
            if pAp <= 0.0:
                break
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            rnorm = float(np.linalg.norm(r))
            history.append(rnorm)
            if rnorm <= target:
                break
            z = r * minv if minv is not None else r
            rz_new = float(r @ z)
            p *= rz_new / rz
            p += z
            rz = rz_new
        r = b - A.matvec(x)
        rnorm = float(np.linalg.norm(r))
    return x, SolveReport(it, rnorm, rnorm <= target, history)


def bicgstab_solve(A: SparseMatrix, b, x0=None, tol: float = 1e-12, maxit: int | None = None,
                   precondition: bool = True):
    """(Right-)Jacobi-preconditioned BiCGSTAB for general nonsingular systems.

    On a breakdown the iteration restarts once from the current iterate;
    a second breakdown ends the solve with ``converged=False``.
    """
    b, x = _check_dims(A, b, x0)
    if tol <= 0:
        raise ValueError("tol must be positive")
    maxit = 10 * A.n if maxit is None else maxit
    target = tol * max(1.0, float(np.linalg.norm(b)))
    minv = _jacobi(A, precondition)

    def prec(v):
        return v * minv if minv is not None else v

    r = b - A.matvec(x)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    it = 0
    restarts = 0
    tiny = 1e-300
    while rnorm > target and it < maxit:
        r_hat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros_like(x)
        p = np.zeros_like(x)
        broke = False
        while it < maxit:
            it += 1
            rho_new = float(r_hat @ r)
            if abs(rho_new) < tiny or abs(omega) < tiny:
                broke = True
                break
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
            ph = prec(p)
            v = A.matvec(ph)
            denom = float(r_hat @ v)
            if abs(denom) < tiny:
                broke = True
                break
            alpha = rho_new / denom
            s = r - alpha * v
            if float(np.linalg.norm(s)) <= target:
                x += alpha * ph
                r = s
                rnorm = float(np.linalg.norm(r))
                history.append(rnorm)
                break
            sh = prec(s)
            t = A.matvec(sh)
            tt = float(t @ t)
            if tt < tiny:
                broke = True
                x += alpha * ph
                r = s
                break
            omega = float(t @ s) / tt
            x += alpha * ph + omega * sh
            r = s - omega * t
            rho = rho_new
            rnorm = float(np.linalg.norm(r))
            history.append(rnorm)
            if rnorm <= target:
                break
        r = b - A.matvec(x)
        rnorm = float(np.linalg.norm(r))
        if not broke:
            continue
        if restarts >= 1:
            break
        restarts += 1
    rnorm = float(np.linalg.norm(b - A.matvec(x)))
    return x, SolveReport(it, rnorm, rnorm <= target, history)
