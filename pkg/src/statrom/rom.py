"""Second-order moment-matching Krylov reduced-order model around one expansion frequency.

The basis spans ``s_0 = A^{-1} f``, ``s_1 = L s_0`` and
``s_l = L s_{l-1} + B s_{l-2}`` with ``L = -A(w)^{-1} A'(w)`` at the expansion
frequency ``w``.  The coupling ``B`` is either the Taylor-consistent
``A^{-1} M / c^2`` (default) or ``-A^{-1} i M``.

The sequence is generated by an Arnoldi process on the linearized pair
``[s_l; s_{l-1}]``; the top halves of the Arnoldi vectors span the same space
as the raw recurrence without its loss of precision.

A load that itself depends on frequency, such as an incident plane wave,
contributes its Taylor coefficients ``f_l`` to every step,
``s_l = A^{-1} f_l + L s_{l-1} + B s_{l-2}``.  That inhomogeneous sequence is
generated directly, renormalized at each step and orthogonalized against the basis so far.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import system_matrix, system_matrix_derivative
from .linalg import DEFLATION_TOL, LuFactors, lu_factor, lu_solve, orthonormal_extend

__all__ = [
    "RECURRENCES",
    "RomBasis",
    "ReducedSystem",
    "build_basis",
    "reduce",
    "reduced_matrix",
    "solve_rom",
    "lift",
]

RECURRENCES = ("taylor", "imag_mass")


@dataclass(frozen=True, eq=False)
class RomBasis:
    """Orthonormal projection basis ``V`` (``N x r``) with the factorization of ``A(omega_bar)``."""

    V: np.ndarray
    omega_bar: float
    m: int
    lu: LuFactors
    adjoint: bool = False

    @property
    def r(self):
        return self.V.shape[1]


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """Galerkin-projected matrices ``V^* X V`` and reduced forcing(s) ``V^* f``."""

    M_r: np.ndarray
    D_r: np.ndarray
    S_r: np.ndarray
    f_r: np.ndarray
    c: float = None
    beta: float = None


def build_basis(sys, f, omega_bar, m, lu_reuse=None, adjoint_mode=False, recurrence="taylor",
                tol=DEFLATION_TOL, load_taylor=None):
    """Moment-matching basis for ``A(omega) u = f`` (or ``A(omega)^* q = f`` in adjoint mode).

    Parameters
    ----------
    sys : HelmholtzSystem
    f : (N,) array
        Right-hand side (the extraction vector ``p`` in adjoint mode).
    omega_bar : float
        Expansion angular frequency.
    m : int
        Number of moments; the basis has at most ``m`` columns.
    lu_reuse : LuFactors, optional
        Factorization of ``A(omega_bar)``; adjoint mode solves with ``A^*``
        through the same factors.
    recurrence : {'taylor', 'imag_mass'}
    load_taylor : sequence of (N,) arrays, optional
        Taylor coefficients ``f_1, f_2, ...`` of a frequency-dependent load in
        the normalized offset ``(omega - omega_bar) / omega_bar``; ``f`` is
        the zeroth one.  Without them the load is taken as constant.

    Raises
    ------
    ValueError
        ``m < 1`` or a zero right-hand side.
    SingularMatrixError
        ``A(omega_bar)`` is singular.
    """
    if m < 1:
        raise ValueError("need at least one moment")
    if recurrence not in RECURRENCES:
        raise ValueError(f"unknown recurrence {recurrence!r}")
    F = lu_reuse if lu_reuse is not None else lu_factor(system_matrix(sys, omega_bar))
    f = sys.apply_bc(f)
    if not np.any(f):
        raise ValueError("zero right-hand side generates an empty Krylov space")
    A1 = system_matrix_derivative(sys, omega_bar)
    Mb = sys.M_bc
    if recurrence == "taylor":
        Bmat = Mb / sys.c**2
    else:
        Bmat = -1j * Mb
    mode = "direct"
    if adjoint_mode:
        A1 = A1.conj().T
        Bmat = Bmat.conj().T
        mode = "adjoint"
    # frequency measured in units of omega_bar keeps both halves of comparable size
    A1 = omega_bar * A1 if omega_bar else A1
    Bmat = omega_bar**2 * Bmat if omega_bar else Bmat

    n = sys.n
    if load_taylor is not None and len(load_taylor):
        cols = _inhomogeneous_moments(sys, F, f, load_taylor, A1, Bmat, m, mode, tol)
        V = np.column_stack(cols)
        V[sys.dirichlet_nodes] = 0.0
        return RomBasis(V, float(omega_bar), int(m), F, bool(adjoint_mode))
    s0 = lu_solve(F, f, mode)
    q = np.concatenate([s0, np.zeros(n, dtype=complex)])
    q /= np.linalg.norm(q)
    Q = [q]
    cols = []
    ext = orthonormal_extend(cols, q[:n], tol)
    if ext is not None:
        cols.append(ext[0])
    for _ in range(1, m):
        x, y = Q[-1][:n], Q[-1][n:]
        top = lu_solve(F, -(A1 @ x) + Bmat @ y, mode)
        w = orthonormal_extend(Q, np.concatenate([top, x]), tol)
        if w is None:
            break
        Q.append(w[0])
        ext = orthonormal_extend(cols, w[0][:n], tol)
        if ext is not None:
            cols.append(ext[0])
    V = np.column_stack(cols)
    V[sys.dirichlet_nodes] = 0.0
    return RomBasis(V, float(omega_bar), int(m), F, bool(adjoint_mode))


def _inhomogeneous_moments(sys, F, f0, load_taylor, A1, Bmat, m, mode, tol):
    loads = [sys.apply_bc(g) for g in load_taylor]
    cur = lu_solve(F, f0, mode)
    prev = np.zeros_like(cur)
    scale = 1.0  # true moment = scale * cur
    cols = []
    for j in range(m):
        if j > 0:
            g = loads[j - 1] / scale if j - 1 < len(loads) else 0.0
            prev, cur = cur, lu_solve(F, g - A1 @ cur + Bmat @ prev, mode)
            nrm = np.linalg.norm(np.concatenate([cur, prev]))
            if nrm == 0.0:
                break
            cur, prev, scale = cur / nrm, prev / nrm, scale * nrm
        ext = orthonormal_extend(cols, cur, tol)
        if ext is not None:
            cols.append(ext[0])
    if not cols:
        raise ValueError("zero right-hand side generates an empty Krylov space")
    return cols


def reduce(sys, rhs_list, basis):
    """Project ``M``, ``D``, ``S`` (Dirichlet-eliminated) and the right-hand side(s)."""
    V = basis.V if isinstance(basis, RomBasis) else np.asarray(basis)
    if V.shape[0] != sys.n:
        raise ValueError(f"basis has {V.shape[0]} rows, system has {sys.n} DOF")
    Vh = V.conj().T
    M_r = Vh @ (sys.M_bc @ V)
    D_r = Vh @ (sys.D_bc @ V)
    S_r = Vh @ (sys.S_bc @ V)
    if rhs_list is None:
        f_r = np.zeros((V.shape[1], 0), dtype=complex)
    else:
        rhs = np.asarray(rhs_list, dtype=complex)
        if isinstance(rhs_list, (list, tuple)):
            rhs = rhs.T
        rhs = rhs.copy()
        rhs[sys.dirichlet_nodes] = 0.0
        f_r = Vh @ rhs
    return ReducedSystem(M_r, D_r, S_r, f_r, sys.c, sys.beta)


def reduced_matrix(red, omega, c=None, beta=None):
    c = red.c if c is None else c
    beta = red.beta if beta is None else beta
    k = omega / c
    return red.S_r - k * k * red.M_r - 1j * k * beta * red.D_r


def solve_rom(red, omega, c=None, beta=None, f_r=None):
    """Solve ``(S_r - k^2 M_r - i k beta D_r) u_r = f_r`` with ``k = omega / c``.

    Raises
    ------
    SingularMatrixError
        If the reduced matrix is singular.
    """
    Ar = reduced_matrix(red, omega, c, beta)
    rhs = red.f_r if f_r is None else f_r
    F = lu_factor(Ar)
    return lu_solve(F, rhs)


def lift(basis, u_r):
    """``V u_r``."""
    V = basis.V if isinstance(basis, RomBasis) else np.asarray(basis)
    u_r = np.asarray(u_r)
    if u_r.shape[0] != V.shape[1]:
        raise ValueError(f"reduced vector has length {u_r.shape[0]}, basis has {V.shape[1]} columns")
    return V @ u_r

