"""Random inputs: Matern kernels, discrete Gaussian forcings, KL expansions and QMC sampling."""

from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import special
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .assembly import assemble_forcing, shape_integrals
from .linalg import sym_eig

__all__ = [
    "KernelSpec",
    "MultivariateGaussian",
    "KLExpansion",
    "matern",
    "kernel_matrix",
    "discrete_forcing",
    "covariance_factor",
    "kl_build",
    "sample_kappa",
    "normal_icdf",
    "sobol_uniform",
    "sobol_gaussian",
    "sample_moments",
    "MAX_SOBOL_DIM",
]

MAX_SOBOL_DIM = 21201
SOBOL_BITS = 30
P_CLAMP = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Matern covariance parameters: smoothness ``nu``, scale ``sigma``, lengthscale ``ell``."""

    nu: float
    sigma: float
    ell: float
    family: str = "matern"

    def __post_init__(self):
        if self.family != "matern":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        if not (self.nu > 0 and self.sigma > 0 and self.ell > 0):
            raise ValueError(f"kernel parameters must be positive: {self}")


@dataclass(frozen=True, eq=False)
class MultivariateGaussian:
    """Mean vector and covariance.

    Complex means follow the circular convention: real and imaginary parts
    are independent Gaussians.  ``cov`` belongs to the real part; when
    ``cov_imag`` is ``None`` the imaginary part shares it.
    """

    mean: np.ndarray
    cov: np.ndarray
    cov_imag: np.ndarray = None

    def __post_init__(self):
        mean = np.asarray(self.mean)
        cov = np.asarray(self.cov, dtype=float)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValueError(f"covariance shape {cov.shape} does not match mean length {n}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if self.cov_imag is not None:
            object.__setattr__(self, "cov_imag", np.asarray(self.cov_imag, dtype=float))

    @property
    def dim(self):
        return self.mean.shape[0]

    def channel(self, which):
        """Real Gaussian of the ``'real'`` or ``'imag'`` part."""
        if which == "real":
            return MultivariateGaussian(self.mean.real.astype(float), self.cov)
        if which == "imag":
            cov = self.cov if self.cov_imag is None else self.cov_imag
            return MultivariateGaussian(np.imag(self.mean).astype(float), cov)
        raise ValueError(f"unknown channel {which!r}")


@dataclass(frozen=True, eq=False)
class KLExpansion:
    """Truncated Karhunen-Loeve expansion of a log-field at the mesh nodes."""

    mu_log: np.ndarray
    lambdas: np.ndarray
    modes: np.ndarray

    @property
    def n_modes(self):
        return len(self.lambdas)


def matern(r, spec):
    """Matern covariance at distance(s) ``r``.

    Half-integer smoothness 1/2, 3/2 and 5/2 use closed forms; other values
    go through the modified Bessel function of the second kind.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distances must be nonnegative")
    s2, nu, ell = spec.sigma**2, spec.nu, spec.ell
    if nu == 0.5:
        return s2 * np.exp(-r / ell)
    if nu == 1.5:
        z = np.sqrt(3.0) * r / ell
        return s2 * (1.0 + z) * np.exp(-z)
    if nu == 2.5:
        z = np.sqrt(5.0) * r / ell
        return s2 * (1.0 + z + z * z / 3.0) * np.exp(-z)
    z = np.sqrt(2.0 * nu) * r / ell
    out = np.full(r.shape, s2)
    pos = z > 0
    zp = z[pos]
    # kve(nu, z) = kv(nu, z) * exp(z); the log form avoids overflow for large nu
    with np.errstate(divide="ignore"):
        logk = np.log(special.kve(nu, zp)) - zp
        out[pos] = s2 * np.exp((1.0 - nu) * np.log(2.0) - special.gammaln(nu) + nu * np.log(zp) + logk)
    return out


def kernel_matrix(points, spec, other=None):
    """Kernel matrix between point sets; symmetric when ``other`` is omitted."""
    X = np.asarray(points, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    if other is None:
        C = matern(cdist(X, X), spec)
        return 0.5 * (C + C.T)
    Y = np.asarray(other, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    return matern(cdist(X, Y), spec)


def discrete_forcing(mesh, region, mu_field, spec):
    """Gaussian load vector of a random source (``'domain'``) or Neumann datum (``'neumann_g'``).

    The covariance is ``C_ij = w_i c(x_i, x_j) w_j`` with ``w`` the integrals
    of the basis functions over the region; nodes outside it get zero rows.
    """
    if region == "domain":
        mean = assemble_forcing(mesh, f_nodal=mu_field).f_domain
    elif region == "neumann_g":
        mean = assemble_forcing(mesh, g_nodal=mu_field).f_neumann
    else:
        raise ValueError(f"unknown region {region!r}")
    w = shape_integrals(mesh, region)
    if not np.any(w):
        raise ValueError(f"region {region!r} is empty on this mesh")
    C = w[:, None] * kernel_matrix(mesh.nodes, spec) * w[None, :]
    return MultivariateGaussian(mean, C)


def _fix_signs(vecs, rel=1e-8):
    """Flip eigenvectors so their first clearly nonzero entry is positive.

    Makes sample ``i`` describe the same field on different meshes that
    share their first node.
    """
    out = vecs.copy()
    for j in range(out.shape[1]):
        v = out[:, j]
        big = np.flatnonzero(np.abs(v) > rel * np.abs(v).max())
        if len(big) and v[big[0]] < 0:
            out[:, j] = -v
    return out


def covariance_factor(cov, tau=1.0):
    """Factor ``L`` with ``L L^T`` the rank-truncated covariance.

    Keeps the leading eigenpairs explaining a fraction ``tau`` of the trace.
    """
    lam, vecs = sym_eig(cov)
    lam = np.clip(lam, 0.0, None)
    m = _truncation_index(lam, tau)
    return _fix_signs(vecs[:, :m]) * np.sqrt(lam[:m])


def _truncation_index(lam, tau):
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    total = lam.sum()
    if tau >= 1.0 or total <= 0:
        return len(lam) if tau >= 1.0 else 0
    csum = np.cumsum(lam)
    return int(np.searchsorted(csum, tau * total * (1.0 - 1e-12)) + 1)


def kl_build(mesh, mu_log, spec_logk, tau):
    """Nodal KL expansion of ``ln kappa`` truncated at explained variance ``tau``."""
    C = kernel_matrix(mesh.nodes, spec_logk)
    lam, vecs = sym_eig(C)
    lam = np.clip(lam, 0.0, None)
    m = _truncation_index(lam, tau)
    mu = np.broadcast_to(np.asarray(mu_log, dtype=float), (mesh.n_nodes,)).copy()
    return KLExpansion(mu, lam[:m].copy(), _fix_signs(vecs[:, :m]))


def sample_kappa(kl, xi):
    """``kappa = exp(mu_log + sum_i sqrt(lambda_i) Psi_i xi_i)`` at the nodes."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != kl.n_modes:
        raise ValueError(f"expected {kl.n_modes} KL coordinates, got {xi.shape[-1]}")
    return np.exp(kl.mu_log + kl.modes @ (np.sqrt(kl.lambdas) * xi))


def normal_icdf(p):
    """Standard normal quantile with ``p`` clamped into ``[1e-12, 1 - 1e-12]``."""
    return special.ndtri(np.clip(p, P_CLAMP, 1.0 - P_CLAMP))


def sobol_uniform(dim, n, seed=0, shift=True):
    """First ``n`` Sobol points in ``[0, 1)^dim`` with an optional digital shift.

    The shift is one random ``SOBOL_BITS``-bit integer per coordinate, XOR-ed
    into the binary expansion; it is drawn from ``seed``.
    """
    if dim < 1 or n < 1:
        raise ValueError("dim and n must be at least 1")
    if dim > MAX_SOBOL_DIM:
        raise ValueError(f"Sobol direction numbers available up to dim {MAX_SOBOL_DIM}, got {dim}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = qmc.Sobol(d=dim, scramble=False, bits=SOBOL_BITS).random(n)
    if not shift:
        return u
    scale = float(2**SOBOL_BITS)
    ints = np.round(u * scale).astype(np.uint64)
    rng = np.random.default_rng(seed)
    delta = rng.integers(0, 2**SOBOL_BITS, size=dim, dtype=np.uint64)
    return (ints ^ delta).astype(float) / scale


def sobol_gaussian(dim, n, seed=0, shift=True):
    """``n x dim`` matrix of standard normal QMC points (shifted Sobol + inverse CDF)."""
    return normal_icdf(sobol_uniform(dim, n, seed, shift))


def sample_moments(samples):
    """Sample mean and unbiased covariance of row-wise samples.

    Complex samples get the real-part covariance in ``cov`` and the
    imaginary-part covariance in ``cov_imag``.
    """
    X = np.asarray(samples)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two samples stored row-wise")
    n = X.shape[0]
    mean = X.mean(axis=0)

    def cov(Z):
        Zc = Z - Z.mean(axis=0)
        C = Zc.T @ Zc / (n - 1)
        return 0.5 * (C + C.T)

    if np.iscomplexobj(X):
        return MultivariateGaussian(mean, cov(X.real), cov(X.imag))
    return MultivariateGaussian(mean, cov(X))
