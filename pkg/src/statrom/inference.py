"""Bayesian conditioning of a (reduced) FE prior on sensor data, with and without a ROM-error term.

Data model, per reading ``y_i`` (real channel)::

    y_i = rho P u + rho P d_r + d + e,   d ~ N(0, C_d),  e ~ N(0, sigma_e^2 I)

``d_r`` is the estimated ROM error field; dropping it gives the classical
statFEM model.  The noise covariance ``C_d + C_e`` (or ``K_{y,r}`` when the
ROM error is present) carries a trace-scaled nugget, which is treated as
part of the data model so that every routine here conditions the same
Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import minimize

from .stochastic import KernelSpec, MultivariateGaussian, kernel_matrix

__all__ = [
    "SensorData",
    "Hyperparameters",
    "PosteriorState",
    "NotPositiveDefiniteError",
    "model_error_cov",
    "nugget",
    "condition_statfem",
    "condition_statrom",
    "log_marginal_likelihood",
    "learn_hyperparameters",
    "default_bounds",
    "predictive_true_process",
    "predictive_observations",
]

log = logging.getLogger(__name__)

JITTER = 1e-10


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, msg, hp=None):
        super().__init__(msg if hp is None else f"{msg} at {hp}")
        self.hp = hp


@dataclass(frozen=True, eq=False)
class SensorData:
    """Readings of one real channel.

    Parameters
    ----------
    Y : (n_y, n_o) array
        Column ``i`` is the i-th reading of all sensors.
    P : (n_y, N) interpolation matrix
    sigma_e : float
        Sensor noise standard deviation.
    coords : (n_y, dim) sensor coordinates, used by the model-error kernel.
    """

    Y: np.ndarray
    P: object
    sigma_e: float
    coords: np.ndarray = None

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        Y = Y[:, None] if Y.ndim == 1 else Y
        if Y.shape[1] < 1:
            raise ValueError("need at least one reading")
        P = self.P.toarray() if sp.issparse(self.P) else np.asarray(self.P, dtype=float)
        P = np.atleast_2d(P)
        if P.shape[0] != Y.shape[0]:
            raise ValueError(f"P has {P.shape[0]} rows, Y has {Y.shape[0]} sensors")
        if not np.allclose(P.sum(axis=1), 1.0, atol=1e-10):
            raise ValueError("interpolation rows must sum to one")
        if self.sigma_e < 0:
            raise ValueError("sigma_e must be nonnegative")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "P", P)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            object.__setattr__(self, "coords", c[:, None] if c.ndim == 1 else c)

    @property
    def n_y(self):
        return self.Y.shape[0]

    @property
    def n_o(self):
        return self.Y.shape[1]


@dataclass(frozen=True)
class Hyperparameters:
    rho: float
    sigma_d: float
    ell_d: float
    converged: bool = True

    def __post_init__(self):
        if not (self.rho > 0 and self.sigma_d >= 0 and self.ell_d > 0):
            raise ValueError(f"invalid hyperparameters {self}")


@dataclass(frozen=True, eq=False)
class PosteriorState:
    mean: np.ndarray
    cov: np.ndarray
    hp: Hyperparameters
    variant: str

    def gaussian(self):
        return MultivariateGaussian(self.mean, self.cov)


def model_error_cov(coords, hp, nu=2.5):
    """Matern model-error covariance at the sensor coordinates."""
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]
    if hp.sigma_d == 0.0:
        return np.zeros((n, n))
    return kernel_matrix(coords, KernelSpec(nu, hp.sigma_d, hp.ell_d))


def nugget(C, rel=JITTER):
    """``rel * tr(C) / n``; the diagonal loading used on inverted covariances."""
    n = C.shape[0]
    if n == 0:
        return 0.0
    return rel * max(float(np.trace(C)) / n, np.finfo(float).tiny)


def _loaded(C, rel):
    return C + nugget(C, rel) * np.eye(C.shape[0])


def _cho(K, hp=None):
    try:
        return scipy.linalg.cho_factor(K, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("covariance not positive definite", hp) from exc


def _real_channel(g):
    if g is None:
        return None
    if isinstance(g, MultivariateGaussian):
        if np.iscomplexobj(g.mean):
            raise ValueError("pass a single real channel (see MultivariateGaussian.channel)")
        return g
    return g.channel("real")


def _pin_fixed(prior, mean, cov):
    # DOFs without prior variance (Dirichlet nodes) cannot be moved by data
    fixed = np.diag(prior.cov) == 0.0
    mean[fixed] = prior.mean[fixed]
    cov[fixed, :] = 0.0
    cov[:, fixed] = 0.0
    return mean, cov


def _noise_cov(data, hp, C_d):
    C_d = model_error_cov(data.coords, hp) if C_d is None else np.asarray(C_d, dtype=float)
    return C_d + data.sigma_e**2 * np.eye(data.n_y)


def condition_statfem(prior, data, hp, C_d=None, jitter=JITTER):
    """Classical posterior in information form.

    ``C_post = (rho^2 n_o P^T R^{-1} P + C_u^{-1})^{-1}`` and
    ``mu_post = C_post (rho P^T R^{-1} sum_i y_i + C_u^{-1} mu_u)`` with
    ``R = C_d + C_e``.  Both are evaluated through a square root
    ``W W^T = C_u`` so a rank-deficient prior needs no explicit inverse:
    ``C_post = W (I + W^T H W)^{-1} W^T`` and
    ``C_post C_u^{-1} = I - C_post H`` for ``H = rho^2 n_o P^T R^{-1} P``.
    """
    prior = _real_channel(prior)
    P, rho, n_o = data.P, hp.rho, data.n_o
    R = _loaded(_noise_cov(data, hp, C_d), jitter)
    cR = _cho(R, hp)
    RinvP = scipy.linalg.cho_solve(cR, P)
    H = rho**2 * n_o * (P.T @ RinvP)
    lam, Q = np.linalg.eigh(0.5 * (prior.cov + prior.cov.T))
    W = Q * np.sqrt(np.clip(lam, 0.0, None))
    G = np.eye(W.shape[1]) + W.T @ H @ W
    C_post = W @ np.linalg.solve(G, W.T)
    C_post = 0.5 * (C_post + C_post.T)
    b = rho * (RinvP.T @ data.Y.sum(axis=1))
    mean = C_post @ b + prior.mean - C_post @ (H @ prior.mean)
    mean, C_post = _pin_fixed(prior, mean, C_post)
    return PosteriorState(mean, C_post, hp, "statfem")


def condition_statrom(prior, error_field, data, hp, C_d=None, jitter=JITTER):
    """Posterior in gain form with the ROM-error field in the data model.

    ``K = rho^2 P C_dr P^T + C_d + C_e`` and
    ``S = rho^2 n_o P C_u P^T + K``::

        mu_post = mu_u + rho C_u P^T S^{-1} (sum_i y_i - rho n_o P (mu_u + mu_dr))
        C_post  = C_u - rho^2 n_o C_u P^T S^{-1} P C_u
    """
    prior = _real_channel(prior)
    err = _real_channel(error_field)
    P, rho, n_o = data.P, hp.rho, data.n_o
    mu_dr = np.zeros(prior.dim) if err is None else err.mean
    K = _noise_cov(data, hp, C_d)
    if err is not None:
        K = K + rho**2 * (P @ err.cov @ P.T)
    K = _loaded(K, jitter)
    CPt = prior.cov @ P.T
    S = rho**2 * n_o * (P @ CPt) + K
    cS = _cho(0.5 * (S + S.T), hp)
    r = data.Y.sum(axis=1) - rho * n_o * (P @ (prior.mean + mu_dr))
    mean = prior.mean + rho * CPt @ scipy.linalg.cho_solve(cS, r)
    C_post = prior.cov - rho**2 * n_o * CPt @ scipy.linalg.cho_solve(cS, CPt.T)
    C_post = 0.5 * (C_post + C_post.T)
    mean, C_post = _pin_fixed(prior, mean, C_post)
    return PosteriorState(mean, C_post, hp, "statrom")


def _marginal_cov(prior, err, data, hp, C_d, jitter):
    P, rho = data.P, hp.rho
    K = _noise_cov(data, hp, C_d)
    if err is not None:
        K = K + rho**2 * (P @ err.cov @ P.T)
    K = _loaded(K, jitter)
    return rho**2 * (P @ prior.cov @ P.T) + K


def log_marginal_likelihood(prior, error_field, data, hp, C_d=None, jitter=JITTER):
    """Sum over readings of ``log N(y_i; rho P (mu_u + mu_dr), rho^2 P (C_u + C_dr) P^T + C_d + C_e)``.

    Raises
    ------
    NotPositiveDefiniteError
        Carries the offending hyperparameters in ``.hp``.
    """
    prior = _real_channel(prior)
    err = _real_channel(error_field)
    mu = prior.mean if err is None else prior.mean + err.mean
    K = _marginal_cov(prior, err, data, hp, C_d, jitter)
    cK = _cho(0.5 * (K + K.T), hp)
    R = data.Y - hp.rho * (data.P @ mu)[:, None]
    alpha = scipy.linalg.cho_solve(cK, R)
    logdet = 2.0 * np.sum(np.log(np.diag(cK[0])))
    n_y, n_o = data.n_y, data.n_o
    quad = float(np.sum(R * alpha))
    return -0.5 * n_o * (n_y * np.log(2.0 * np.pi) + logdet) - 0.5 * quad


def default_bounds(coords):
    """``rho in [1e-2, 1e2]``, ``sigma_d in [1e-8, 1e2]``, ``ell_d in [1e-3 L, 10 L]``."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    L = float(np.max(np.ptp(coords, axis=0))) if len(coords) > 1 else 1.0
    L = L if L > 0 else 1.0
    return [(1e-2, 1e2), (1e-8, 1e2), (1e-3 * L, 10.0 * L)]


def learn_hyperparameters(prior, error_field, data, bounds=None, restarts=3, seed=0, jitter=JITTER):
    """Empirical-Bayes fit of ``(rho, sigma_d, ell_d)`` by L-BFGS-B in log space.

    The first start is ``rho = 1`` with the geometric midpoints of the
    other bounds; further starts are drawn uniformly in log space from
    ``seed``.  The best of all starts and end points is returned; if no
    optimizer run reports success the result has ``converged=False``.
    """
    if data.coords is None:
        raise ValueError("sensor coordinates are needed for the model-error kernel")
    bounds = default_bounds(data.coords) if bounds is None else bounds
    lb = np.log([b[0] for b in bounds])
    ub = np.log([b[1] for b in bounds])
    if not np.all(np.isfinite(lb) & np.isfinite(ub)) or np.any(lb > ub):
        raise ValueError(f"bounds must be finite, positive and ordered: {bounds}")
    prior = _real_channel(prior)
    err = _real_channel(error_field)

    def objective(x):
        hp = Hyperparameters(*np.exp(x))
        try:
            val = -log_marginal_likelihood(prior, err, data, hp, jitter=jitter)
        except (NotPositiveDefiniteError, ValueError):
            return 1e300
        return val if np.isfinite(val) else 1e300

    rng = np.random.default_rng(seed)
    starts = [np.clip(np.array([0.0, 0.5 * (lb[1] + ub[1]), 0.5 * (lb[2] + ub[2])]), lb, ub)]
    for _ in range(max(restarts, 1) - 1):
        starts.append(rng.uniform(lb, ub))
    best_x, best_f, any_ok = None, np.inf, False
    for x0 in starts:
        f0 = objective(x0)
        if f0 < best_f:
            best_x, best_f = x0, f0
        res = minimize(objective, x0, method="L-BFGS-B", bounds=list(zip(lb, ub)),
                       options={"eps": 1e-6, "maxiter": 500})
        any_ok |= bool(res.success)
        if res.fun < best_f:
            best_x, best_f = np.clip(res.x, lb, ub), float(res.fun)
    if not any_ok:
        log.warning("hyperparameter optimization did not converge from any start")
    rho, sd, ld = np.exp(best_x)
    return Hyperparameters(float(rho), float(sd), float(ld), converged=any_ok)


def predictive_true_process(post, error_field, hp, C_d, P):
    """Gaussian of ``z = rho P (u + d_r) + d`` given the data.

    Mean ``rho P (mu_post + mu_dr)``, covariance
    ``rho^2 P C_post P^T + rho^2 P C_dr P^T + C_d``.
    """
    P = P.toarray() if sp.issparse(P) else np.atleast_2d(np.asarray(P, dtype=float))
    err = _real_channel(error_field)
    rho = hp.rho
    mean = rho * (P @ post.mean)
    cov = rho**2 * (P @ post.cov @ P.T) + np.asarray(C_d, dtype=float)
    if err is not None:
        mean = mean + rho * (P @ err.mean)
        cov = cov + rho**2 * (P @ err.cov @ P.T)
    return MultivariateGaussian(mean, 0.5 * (cov + cov.T))


def predictive_observations(post, error_field, hp, C_d_hat, C_e_hat, P_hat):
    """Gaussian of a new reading ``y_hat`` at the rows of ``P_hat``: the true process plus ``C_e_hat``."""
    P_hat = P_hat.toarray() if sp.issparse(P_hat) else np.asarray(P_hat, dtype=float)
    if P_hat.size == 0:
        return MultivariateGaussian(np.zeros(0), np.zeros((0, 0)))
    z = predictive_true_process(post, error_field, hp, C_d_hat, P_hat)
    return MultivariateGaussian(z.mean, z.cov + np.asarray(C_e_hat, dtype=float))
