"""Complex dense/sparse linear algebra kernels shared by the other modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SingularMatrixError",
    "LuFactors",
    "lu_factor",
    "lu_solve",
    "orthonormal_extend",
    "sym_eig",
    "DEFLATION_TOL",
]

DEFLATION_TOL = 1e-12
# relative pivot size below which a factorization is declared singular
PIVOT_TOL = 1e-13


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a factorization meets a (numerically) zero pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class LuFactors:
    """LU factorization of a square complex matrix.

    Supports solves with ``A`` and with its conjugate transpose ``A^*``.
    Sparse input goes through SuperLU, dense input through LAPACK getrf.
    Instances are immutable after construction and can be shared between
    readers.
    """

    def __init__(self, A):
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"square matrix required, got shape {A.shape}")
        self.shape = A.shape
        self.n = A.shape[0]
        self.sparse = sp.issparse(A)
        if self.sparse:
            Ac = sp.csc_matrix(A, dtype=complex)
            scale = abs(Ac).max() if Ac.nnz else 0.0
            try:
                self._lu = spla.splu(Ac)
            except RuntimeError as exc:
                raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
            diag = np.abs(self._lu.U.diagonal())
        else:
            Ad = np.asarray(A, dtype=complex)
            scale = np.abs(Ad).max() if Ad.size else 0.0
            self._lu = scipy.linalg.lu_factor(Ad, check_finite=True)
            diag = np.abs(np.diag(self._lu[0]))
        if self.n and (scale == 0.0 or diag.min() <= PIVOT_TOL * scale):
            k = int(np.argmin(diag)) if self.n else 0
            raise SingularMatrixError(
                f"singular pivot at position {k} (|u_kk| = {diag[k]:.3e}, "
                f"max|a_ij| = {scale:.3e})",
                pivot=k,
            )

    def solve(self, b, mode="direct"):
        return lu_solve(self, b, mode)


def lu_factor(A):
    """Factor a square (sparse or dense) complex matrix.

    Raises
    ------
    SingularMatrixError
        If a pivot is zero relative to the matrix scale; ``exc.pivot`` holds
        the pivot position.
    """
    return LuFactors(A)


def lu_solve(F, b, mode="direct"):
    """Solve ``A x = b`` (``mode='direct'``) or ``A^* x = b`` (``mode='adjoint'``).

    ``b`` may be a vector or a matrix of right-hand sides stored column-wise.
    """
    b = np.asarray(b)
    if b.shape[0] != F.n:
        raise ValueError(f"dimension mismatch: factor is {F.n}x{F.n}, rhs has {b.shape[0]} rows")
    if mode not in ("direct", "adjoint"):
        raise ValueError(f"unknown solve mode {mode!r}")
    b = b.astype(complex, copy=False)
    if F.n == 0:
        return b.copy()
    if F.sparse:
        return F._lu.solve(b, trans="N" if mode == "direct" else "H")
    return scipy.linalg.lu_solve(F._lu, b, trans=0 if mode == "direct" else 2)


def orthonormal_extend(basis, w, tol=DEFLATION_TOL):
    """Orthogonalize ``w`` against orthonormal columns and normalize it.

    Modified Gram-Schmidt with one full reorthogonalization pass.

    Parameters
    ----------
    basis : sequence of 1-D arrays or 2-D array (columns), possibly empty
    w : 1-D array
    tol : float
        Relative deflation threshold.

    Returns
    -------
    (v, norm) or None
        ``None`` signals deflation: the orthogonal remainder is below
        ``tol * ||w||``.
    """
    w = np.array(w, dtype=complex)
    if isinstance(basis, np.ndarray):
        cols = [basis[:, j] for j in range(basis.shape[1])]
    else:
        cols = list(basis)
    w_norm = np.linalg.norm(w)
    if w_norm == 0.0:
        return None
    for _ in range(2):
        for b in cols:
            w -= np.vdot(b, w) * b
    nrm = np.linalg.norm(w)
    if nrm < tol * w_norm:
        return None
    return w / nrm, float(nrm)


def sym_eig(C, sym_tol=1e-12):
    """Eigenpairs of a real symmetric matrix, sorted by descending eigenvalue.

    Returns
    -------
    lam : (n,) array
    vecs : (n, n) array whose columns are orthonormal eigenvectors
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("square matrix required")
    scale = max(np.abs(C).max(), 1.0) if C.size else 1.0
    if C.size and np.abs(C - C.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    lam, vecs = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(lam)[::-1]
    return lam[order], vecs[:, order]
