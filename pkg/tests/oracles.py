"""Brute-force reference computations the library is checked against.

Everything here assembles the full joint Gaussian explicitly and conditions
it with a Schur complement, so it shares no code path with the library's
information-form and gain-form updates.
"""

import numpy as np


def schur_condition(mean, cov, obs_idx, values):
    """Condition ``N(mean, cov)`` on ``x[obs_idx] = values``; return moments of the rest."""
    n = len(mean)
    obs = np.asarray(obs_idx)
    rest = np.setdiff1d(np.arange(n), obs)
    Coo = cov[np.ix_(obs, obs)]
    Cro = cov[np.ix_(rest, obs)]
    gain = np.linalg.solve(Coo, Cro.T).T
    m = mean[rest] + gain @ (values - mean[obs])
    C = cov[np.ix_(rest, rest)] - gain @ Cro.T
    return m, 0.5 * (C + C.T)


def loaded(C, rel=1e-10):
    n = C.shape[0]
    return C + rel * np.trace(C) / n * np.eye(n)


def joint_state_readings(mu_u, C_u, P, rho, K, n_o, mu_dr=None):
    """Joint moments of ``(u, y_1, ..., y_n_o)`` with ``y_i = rho P (u + mu_dr) + eps_i``, ``eps_i ~ N(0, K)``."""
    N, n_y = len(mu_u), P.shape[0]
    mu_dr = np.zeros(N) if mu_dr is None else mu_dr
    dim = N + n_o * n_y
    mean = np.zeros(dim)
    cov = np.zeros((dim, dim))
    mean[:N] = mu_u
    cov[:N, :N] = C_u
    for i in range(n_o):
        s = slice(N + i * n_y, N + (i + 1) * n_y)
        mean[s] = rho * P @ (mu_u + mu_dr)
        cov[:N, s] = rho * C_u @ P.T
        cov[s, :N] = cov[:N, s].T
        for j in range(n_o):
            t = slice(N + j * n_y, N + (j + 1) * n_y)
            cov[s, t] = rho**2 * P @ C_u @ P.T + (K if i == j else 0.0)
    return mean, cov


def posterior_oracle(mu_u, C_u, P, rho, K, Y, mu_dr=None):
    """Condition the joint on readings ``Y`` (``n_y x n_o``); returns the state posterior."""
    N = len(mu_u)
    mean, cov = joint_state_readings(mu_u, C_u, P, rho, K, Y.shape[1], mu_dr)
    return schur_condition(mean, cov, np.arange(N, len(mean)), Y.T.ravel())


def predictive_oracle(mu_u, C_u, P_obs, rho, K, Y, P_new, C_d_new, mu_dr=None, C_dr=None, C_e_new=None):
    """Moments of ``rho P_new (u + d_r) + d (+ e)`` given readings, from one big joint Gaussian.

    ``d_r``, ``d`` and ``e`` of the new point are fresh draws independent of
    the readings.
    """
    N, n_y, n_o = len(mu_u), P_obs.shape[0], Y.shape[1]
    mu_dr = np.zeros(N) if mu_dr is None else mu_dr
    C_dr = np.zeros((N, N)) if C_dr is None else C_dr
    n_new = P_new.shape[0]
    mean, cov = joint_state_readings(mu_u, C_u, P_obs, rho, K, n_o, mu_dr)
    extra = C_d_new + rho**2 * P_new @ C_dr @ P_new.T
    if C_e_new is not None:
        extra = extra + C_e_new
    dim = len(mean) + n_new
    m2 = np.zeros(dim)
    c2 = np.zeros((dim, dim))
    m2[:len(mean)] = mean
    c2[:len(mean), :len(mean)] = cov
    z = slice(len(mean), dim)
    m2[z] = rho * P_new @ (mu_u + mu_dr)
    # z depends on u only; correlate with u and with every reading through u
    c2[z, :N] = rho * P_new @ C_u
    for i in range(n_o):
        s = slice(N + i * n_y, N + (i + 1) * n_y)
        c2[z, s] = rho**2 * P_new @ C_u @ P_obs.T
    c2[:len(mean), z] = c2[z, :len(mean)].T
    c2[z, z] = rho**2 * P_new @ C_u @ P_new.T + extra
    obs = np.arange(N, len(mean))
    m, C = schur_condition(m2, c2, obs, Y.T.ravel())
    # drop u, keep z
    return m[N:], C[N:, N:]


def gaussian_logpdf(x, mean, cov):
    from scipy.stats import multivariate_normal

    return float(multivariate_normal(mean, cov, allow_singular=False).logpdf(x))


def scalar_bayes(mu0, var0, rho, ys, noise_var):
    """Posterior of a scalar ``u`` from readings ``y = rho u + e``."""
    prec = 1.0 / var0 + len(ys) * rho**2 / noise_var
    var = 1.0 / prec
    mean = var * (mu0 / var0 + rho * np.sum(ys) / noise_var)
    return mean, var


def random_spd(rng, n, scale=1.0, rank=None):
    rank = n if rank is None else rank
    A = rng.standard_normal((n, rank))
    return scale * (A @ A.T / max(rank, 1) + (0.1 * np.eye(n) if rank == n else 0.0))


def random_instance(rng, with_dr):
    """A small conditioning problem (``N <= 6``, ``n_y <= 4``, ``n_o <= 3``) as plain arrays."""
    N = int(rng.integers(1, 7))
    n_y = int(rng.integers(1, 5))
    n_o = int(rng.integers(1, 4))
    mu_u = rng.standard_normal(N)
    C_u = random_spd(rng, N)
    if N > 1 and rng.random() < 0.3:
        # a pinned DOF, like a Dirichlet node
        k = int(rng.integers(N))
        C_u[k, :] = 0.0
        C_u[:, k] = 0.0
    # rows of an interpolation matrix: nonnegative, summing to one
    P = rng.random((n_y, N))
    P /= P.sum(axis=1, keepdims=True)
    rho = float(np.exp(rng.uniform(-0.5, 0.5)))
    sigma_e = float(rng.uniform(0.05, 0.5))
    C_d = random_spd(rng, n_y, 0.2)
    mu_dr = 0.3 * rng.standard_normal(N) if with_dr else None
    C_dr = random_spd(rng, N, 0.1) if with_dr else None
    Y = rng.standard_normal((n_y, n_o))
    return dict(N=N, n_y=n_y, n_o=n_o, mu_u=mu_u, C_u=C_u, P=P, rho=rho, sigma_e=sigma_e,
                C_d=C_d, mu_dr=mu_dr, C_dr=C_dr, Y=Y)


def data_cov(inst):
    """Per-reading covariance ``K`` with the trace-scaled nugget the library applies."""
    K = inst["C_d"] + inst["sigma_e"] ** 2 * np.eye(inst["n_y"])
    if inst["C_dr"] is not None:
        K = K + inst["rho"] ** 2 * inst["P"] @ inst["C_dr"] @ inst["P"].T
    return loaded(K)
