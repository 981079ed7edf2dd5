"""Helmholtz finite element matrices, load vectors, full-order solves and the H_k^1 norm.

The discrete operator is ``A(omega) = S - k^2 M - i k beta D`` with
``k = omega / c``.  Dirichlet nodes are eliminated symmetrically: their
rows and columns are zeroed and a unit diagonal is placed in ``S``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np
import scipy.sparse as sp

from .linalg import SingularMatrixError, lu_factor, lu_solve
from .mesh import interpolation_matrix

__all__ = [
    "ResonanceError",
    "HelmholtzSystem",
    "ForcingVector",
    "assemble",
    "system_matrix",
    "system_matrix_derivative",
    "shape_integrals",
    "assemble_forcing",
    "solve_fom",
    "hk1_gram",
    "hk1_norm",
    "hk1_error",
]


class ResonanceError(np.linalg.LinAlgError):
    """The full-order system is singular at the requested frequency."""

    def __init__(self, omega, pivot=None):
        super().__init__(f"system matrix singular at omega = {omega!r} rad/s (pivot {pivot})")
        self.omega = omega
        self.pivot = pivot


def _triple_product_table(dim):
    """Reference integrals of phi_a phi_b phi_c divided by the element measure."""
    n = dim + 1
    T = np.empty((n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                powers = np.bincount([a, b, c], minlength=n)
                num = np.prod([factorial(int(p)) for p in powers])
                T[a, b, c] = factorial(dim) * num / factorial(3 + dim)
    return T


_TRIPLE = {1: _triple_product_table(1), 2: _triple_product_table(2)}


def _scatter(elements, local, n):
    k = elements.shape[1]
    rows = np.repeat(elements, k, axis=1).ravel()
    cols = np.tile(elements, (1, k)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def _gradients(mesh):
    """Element measures and gradients of the barycentric coordinates."""
    x = mesh.nodes[mesh.elements]
    if mesh.dim == 1:
        h = x[:, 1, 0] - x[:, 0, 0]
        grads = np.stack([-1.0 / h, 1.0 / h], axis=1)[:, :, None]
        return h, grads
    e1 = x[:, 1] - x[:, 0]
    e2 = x[:, 2] - x[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # rows of inv(J)^T applied to reference gradients (-1,-1), (1,0), (0,1)
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return 0.5 * det, grads


def _boundary_mass(mesh, tag):
    n = mesh.n_nodes
    ents = mesh.boundary_entities(tag)
    if not ents:
        return sp.csr_matrix((n, n))
    if mesh.dim == 1:
        ids = np.array([e[0] for e in ents])
        return sp.csr_matrix((np.ones(len(ids)), (ids, ids)), shape=(n, n))
    e = np.array(ents)
    L = np.linalg.norm(mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]], axis=1)
    local = L[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    return _scatter(e, local, n)


def _mass(mesh, kappa):
    meas, _ = _gradients(mesh)
    kap = kappa[mesh.elements]
    local = meas[:, None, None] * np.einsum("abk,ek->eab", _TRIPLE[mesh.dim], kap)
    return _scatter(mesh.elements, local, mesh.n_nodes)


def _stiffness(mesh):
    meas, grads = _gradients(mesh)
    local = meas[:, None, None] * np.einsum("ead,ebd->eab", grads, grads)
    return _scatter(mesh.elements, local, mesh.n_nodes)


@dataclass(frozen=True, eq=False)
class HelmholtzSystem:
    """Assembled FE matrices and physical constants.

    ``S``, ``M`` and ``D`` are stored without boundary conditions; the
    ``*_bc`` properties return the Dirichlet-eliminated versions (computed
    once, then cached).
    """

    S: sp.csr_matrix
    M: sp.csr_matrix
    D: sp.csr_matrix
    c: float
    beta: float
    dirichlet_nodes: np.ndarray
    mesh: object = None

    @property
    def n(self):
        return self.S.shape[0]

    def _mask(self):
        keep = np.ones(self.n)
        keep[self.dirichlet_nodes] = 0.0
        return sp.diags(keep)

    @cached_property
    def S_bc(self):
        Z = self._mask()
        unit = np.zeros(self.n)
        unit[self.dirichlet_nodes] = 1.0
        return (Z @ self.S @ Z + sp.diags(unit)).tocsr()

    @cached_property
    def M_bc(self):
        Z = self._mask()
        return (Z @ self.M @ Z).tocsr()

    @cached_property
    def D_bc(self):
        Z = self._mask()
        return (Z @ self.D @ Z).tocsr()

    def apply_bc(self, f):
        """Zero the Dirichlet entries of a right-hand side (copy)."""
        f = np.array(f, dtype=complex)
        f[self.dirichlet_nodes] = 0.0
        return f


@dataclass(frozen=True)
class ForcingVector:
    f_domain: np.ndarray
    f_neumann: np.ndarray

    @property
    def total(self):
        return self.f_domain + self.f_neumann


def assemble(mesh, kappa_nodal, c, beta):
    """Assemble stiffness, kappa-weighted mass and impedance matrices.

    ``kappa`` enters as a P1 field; all element integrals are evaluated in
    closed form, so the cubic mass integrand is exact.
    """
    kappa = np.broadcast_to(np.asarray(kappa_nodal, dtype=float), (mesh.n_nodes,))
    if np.any(kappa <= 0):
        raise ValueError(f"kappa must be positive, min is {kappa.min():.3e}")
    S = _stiffness(mesh)
    M = _mass(mesh, kappa)
    D = _boundary_mass(mesh, "impedance")
    dn = mesh.boundary_nodes("dirichlet")
    return HelmholtzSystem(S, M, D, float(c), float(beta), dn, mesh)


def system_matrix(sys, omega):
    """``A(omega) = S - k^2 M - i k beta D`` with Dirichlet elimination (CSC)."""
    k = omega / sys.c
    A = sys.S_bc - k * k * sys.M_bc - 1j * k * sys.beta * sys.D_bc
    return sp.csc_matrix(A, dtype=complex)


def system_matrix_derivative(sys, omega):
    """``dA/domega = -(2 omega / c^2) M - i (beta / c) D``."""
    A1 = -(2.0 * omega / sys.c**2) * sys.M_bc - 1j * (sys.beta / sys.c) * sys.D_bc
    return sp.csc_matrix(A1, dtype=complex)


def shape_integrals(mesh, region="domain"):
    """Integrals of the nodal basis functions over the domain or over Gamma_N,g.

    In 1-D the boundary "integral" is a point evaluation.
    """
    w = np.zeros(mesh.n_nodes)
    if region == "domain":
        meas, _ = _gradients(mesh)
        np.add.at(w, mesh.elements.ravel(), np.repeat(meas / (mesh.dim + 1), mesh.dim + 1))
        return w
    if region != "neumann_g":
        raise ValueError(f"unknown region {region!r}")
    B = _boundary_mass(mesh, "neumann_g")
    return np.asarray(B.sum(axis=1)).ravel()


def _nodal(mesh, field):
    if field is None:
        return np.zeros(mesh.n_nodes, dtype=complex)
    if callable(field):
        x = mesh.nodes
        vals = field(x[:, 0]) if mesh.dim == 1 else field(x[:, 0], x[:, 1])
        return np.broadcast_to(np.asarray(vals, dtype=complex), (mesh.n_nodes,)).copy()
    arr = np.asarray(field, dtype=complex)
    return np.broadcast_to(arr, (mesh.n_nodes,)).copy()


def assemble_forcing(mesh, f_nodal=None, g_nodal=None):
    """Consistent load vectors for a domain source and a Neumann datum.

    Both fields may be nodal arrays, scalars or callables of the coordinates.
    ``g`` only matters on ``neumann_g`` boundary entities.
    """
    f = _nodal(mesh, f_nodal)
    g = _nodal(mesh, g_nodal)
    M1 = _mass(mesh, np.ones(mesh.n_nodes))
    Bg = _boundary_mass(mesh, "neumann_g")
    return ForcingVector(M1 @ f, Bg @ g)


def solve_fom(sys, omega, rhs, return_lu=False):
    """Solve the full-order system at ``omega``.

    Raises
    ------
    ResonanceError
        If ``A(omega)`` is singular.
    """
    f = rhs.total if isinstance(rhs, ForcingVector) else np.asarray(rhs)
    f = sys.apply_bc(f)
    try:
        F = lu_factor(system_matrix(sys, omega))
    except SingularMatrixError as exc:
        raise ResonanceError(omega, exc.pivot) from exc
    u = lu_solve(F, f)
    u[sys.dirichlet_nodes] = 0.0
    return (u, F) if return_lu else u


def hk1_gram(mesh):
    """Stiffness and unit mass matrices defining the H_k^1 inner product."""
    return _stiffness(mesh), _mass(mesh, np.ones(mesh.n_nodes))


def hk1_norm(mesh, u, k, gram=None):
    if k == 0:
        raise ValueError("H_k^1 norm undefined for k = 0")
    S, M = gram if gram is not None else hk1_gram(mesh)
    u = np.asarray(u)
    val = (np.vdot(u, S @ u) / k**2 + np.vdot(u, M @ u)).real
    return float(np.sqrt(max(val, 0.0)))


def hk1_error(ref_mesh, u_ref, mesh, u, k, gram=None, P=None):
    """H_k^1 norm of ``u_ref - u`` after interpolating ``u`` onto ``ref_mesh``.

    ``gram`` (from :func:`hk1_gram`) and the interpolation matrix ``P`` may
    be passed in to avoid recomputation in sweeps.
    """
    if k == 0:
        raise ValueError("H_k^1 norm undefined for k = 0")
    if P is None:
        P = interpolation_matrix(mesh, ref_mesh.nodes)
    e = np.asarray(u_ref) - P @ np.asarray(u)
    return hk1_norm(ref_mesh, e, k, gram)
