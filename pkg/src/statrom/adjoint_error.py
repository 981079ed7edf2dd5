"""Adjoint-based pointwise ROM error indicator and its Gaussian-process extension to the mesh.

For an extraction vector ``p`` (one row of the interpolation matrix) and an
adjoint solution ``A^* q = p`` the ROM error at that point satisfies

    p^* (u - V u_r) = q^* (f - A V u_r),

so it can be read off the residual.  ``q`` itself comes from a reduced
adjoint model built with its own moment-matching basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import system_matrix
from .linalg import lu_factor, lu_solve
from .mesh import interpolation_matrix
from .rom import build_basis, reduce, reduced_matrix
from .stochastic import KernelSpec, MultivariateGaussian, kernel_matrix

__all__ = [
    "AdjointSet",
    "ErrorField",
    "build_adjoint_set",
    "adjoint_vectors",
    "pointwise_error",
    "error_kernel",
    "estimate_error_field",
    "closed_form_error_prior",
]


@dataclass(frozen=True, eq=False)
class AdjointSet:
    """Training points, their extraction rows ``P`` and one adjoint basis per point."""

    points: np.ndarray
    P: object
    bases: list

    def __len__(self):
        return len(self.bases)


@dataclass(frozen=True, eq=False)
class ErrorField:
    """Gaussian ROM-error field at the mesh nodes.

    ``mean`` is complex; ``cov`` and ``cov_imag`` are the posterior
    covariances of the real and imaginary channel.
    """

    mean: np.ndarray
    cov: np.ndarray
    cov_imag: np.ndarray
    training_points: np.ndarray
    training_values: np.ndarray
    training_variances: np.ndarray
    lengthscale: float
    scale: float

    def channel(self, which):
        return MultivariateGaussian(self.mean, self.cov, self.cov_imag).channel(which)

    @classmethod
    def zero(cls, n, dim=1):
        """Error field that is identically zero (exact ROM)."""
        z = np.zeros((n, n))
        return cls(np.zeros(n, dtype=complex), z, z.copy(), np.zeros((0, dim)), np.zeros(0, complex),
                   np.zeros((2, 0)), 1.0, 0.0)


def build_adjoint_set(sys, points, omega_bar, m, primal_lu=None, recurrence="taylor", mesh=None):
    """Adjoint moment-matching bases started from each training point's extraction row.

    ``primal_lu`` is the factorization of ``A(omega_bar)`` already computed
    for the primal basis; adjoint solves reuse it.
    """
    mesh = sys.mesh if mesh is None else mesh
    pts = np.asarray(points, dtype=float).reshape(-1, mesh.dim)
    P = interpolation_matrix(mesh, pts)
    if len(pts) == 0:
        return AdjointSet(pts, P, [])
    F = primal_lu if primal_lu is not None else lu_factor(system_matrix(sys, omega_bar))
    bases = [build_basis(sys, P[i].toarray().ravel(), omega_bar, m, lu_reuse=F, adjoint_mode=True,
                         recurrence=recurrence)
             for i in range(len(pts))]
    return AdjointSet(pts, P, bases)


def adjoint_vectors(sys, omega, adjoint_set):
    """Lifted reduced adjoint solutions ``q_l = V_adj,l q_r,l``, one column per training point.

    Each ``q_r,l`` solves ``(V_adj^* A(omega) V_adj)^* q_r = V_adj^* p_l``.
    """
    Q = np.zeros((sys.n, len(adjoint_set)), dtype=complex)
    for j, basis in enumerate(adjoint_set.bases):
        p = adjoint_set.P[j].toarray().ravel()
        red = reduce(sys, p, basis)
        Ar = reduced_matrix(red, omega)
        q_r = lu_solve(lu_factor(Ar), red.f_r, mode="adjoint")
        Q[:, j] = basis.V @ q_r
    return Q


def pointwise_error(sys, omega, basis_adj, p, rhs, u_lifted):
    """Adjoint-weighted residual ``q^* (rhs - A(omega) u_lifted)``.

    ``rhs`` and ``u_lifted`` may hold several samples column-wise; the result
    then has one entry per column.
    """
    red = reduce(sys, p, basis_adj)
    q_r = lu_solve(lu_factor(reduced_matrix(red, omega)), red.f_r, mode="adjoint")
    q = basis_adj.V @ q_r
    A = system_matrix(sys, omega)
    f = np.array(rhs, dtype=complex)
    f[sys.dirichlet_nodes] = 0.0
    res = f - A @ np.asarray(u_lifted)
    return q.conj() @ res


LENGTHSCALES = {"wavelength": 1.0, "quarter_wavelength": 0.25}


def error_kernel(omega, c, d_values, lengthscale="wavelength"):
    """Matern-5/2 kernel with scale ``2 max|d|``.

    The lengthscale is the wavelength ``2 pi c / omega`` or a quarter of it.
    """
    if lengthscale not in LENGTHSCALES:
        raise ValueError(f"unknown lengthscale rule {lengthscale!r}")
    ell = LENGTHSCALES[lengthscale] * 2.0 * np.pi * c / omega
    sigma = 2.0 * float(np.max(np.abs(d_values))) if np.size(d_values) else 0.0
    if sigma == 0.0:
        sigma = 1e-12
    return KernelSpec(2.5, sigma, ell)


def estimate_error_field(mesh, X, d_adj_mean, sigma_adj_sq, omega, c, dirichlet_nodes=None,
                         jitter=1e-10, kernel=None, lengthscale="wavelength"):
    """Condition a zero-mean GP on pointwise error estimates and evaluate it at every node.

    Parameters
    ----------
    X : (n, dim) training points
    d_adj_mean : (n,) complex estimates
    sigma_adj_sq : (n,) or (2, n)
        Observation variances; a ``(2, n)`` array gives separate real and
        imaginary channels.
    dirichlet_nodes : node indices added as noise-free zero observations
    jitter : float
        Relative nugget ``jitter * sigma^2`` on the training covariance.
    kernel : KernelSpec, optional
        Overrides the frequency-dependent default of :func:`error_kernel`.
    lengthscale : {'wavelength', 'quarter_wavelength'}
        Rule for the default kernel's lengthscale.
    """
    X = np.asarray(X, dtype=float).reshape(-1, mesh.dim)
    d = np.asarray(d_adj_mean, dtype=complex).ravel()
    if len(X) != len(d) or len(X) < 1:
        raise ValueError("need one estimate per training point and at least one point")
    var = np.asarray(sigma_adj_sq, dtype=float)
    var = np.vstack([var, var]) if var.ndim == 1 else var
    if np.any(var < 0):
        raise ValueError("variances must be nonnegative")
    spec = kernel if kernel is not None else error_kernel(omega, c, d, lengthscale)
    dn = np.asarray([] if dirichlet_nodes is None else dirichlet_nodes, dtype=np.int64)
    Xt = np.vstack([X, mesh.nodes[dn]])
    yt = np.concatenate([d, np.zeros(len(dn), dtype=complex)])
    Kxx = kernel_matrix(Xt, spec)
    Khx = kernel_matrix(mesh.nodes, spec, Xt)
    Khh = kernel_matrix(mesh.nodes, spec)
    nug = jitter * spec.sigma**2
    means, covs = [], []
    for ch, y in enumerate((yt.real, yt.imag)):
        noise = np.concatenate([var[ch], np.zeros(len(dn))])
        cf = scipy.linalg.cho_factor(Kxx + np.diag(noise + nug), lower=True)
        means.append(Khx @ scipy.linalg.cho_solve(cf, y))
        C = Khh - Khx @ scipy.linalg.cho_solve(cf, Khx.T)
        C = 0.5 * (C + C.T)
        C[dn, :] = 0.0
        C[:, dn] = 0.0
        covs.append(C)
    mean = means[0] + 1j * means[1]
    mean[dn] = 0.0
    return ErrorField(mean, covs[0], covs[1], X, d, var, spec.ell, spec.sigma)


def closed_form_error_prior(sys, omega, basis, q, f_gaussian, form="exact"):
    """Gaussian of the pointwise ROM error when only the right-hand side is random.

    With ``B = A V A_r^{-1}`` the error is ``q^* (f - B V^* f)``.  The default
    ``form='exact'`` propagates ``N(mu_f, C_f)`` through that linear map.
    ``form='decoupled'`` uses mean ``q^* (V - B) V^* mu_f`` and adds the
    variances of ``q^* f`` and ``q^* B V^* f`` while ignoring their correlation.

    Returns
    -------
    (mean, variance) : complex, float
    """
    V = basis.V
    A = system_matrix(sys, omega)
    Ar = V.conj().T @ (A @ V)
    B = (A @ V) @ np.linalg.inv(Ar)
    mu = sys.apply_bc(f_gaussian.mean)
    Cf = np.asarray(f_gaussian.cov, dtype=float).copy()
    Cf[sys.dirichlet_nodes, :] = 0.0
    Cf[:, sys.dirichlet_nodes] = 0.0
    q = np.asarray(q, dtype=complex)
    mu_r = V.conj().T @ mu
    b = q.conj() @ B  # row vector q^* B
    if form == "decoupled":
        mean = q.conj() @ (V @ mu_r) - b @ mu_r
        var = (q.conj() @ Cf @ q).real + (b @ (V.conj().T @ Cf @ V) @ b.conj()).real
    elif form == "exact":
        g = q - V @ b.conj()  # (I - B V^*)^* q
        mean = g.conj() @ mu
        var = (g.conj() @ Cf @ g).real
    else:
        raise ValueError(f"unknown form {form!r}")
    return complex(mean), float(max(var, 0.0))
