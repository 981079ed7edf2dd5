"""Offline basis construction, online prior/error/posterior evaluation and synthetic data.

Offline, every QMC sample gets its own system, primal moment-matching basis
and (when training points are configured) adjoint bases.  Online, at one
frequency, the reduced systems give the prior, the adjoint residuals give
the ROM-error field, and both are conditioned on sensor data.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
import logging
import time
import warnings

import numpy as np
from scipy.stats import qmc

from .adjoint_error import ErrorField, adjoint_vectors, build_adjoint_set, estimate_error_field
from .assembly import (assemble, assemble_forcing, hk1_error, hk1_gram, hk1_norm,
                       solve_fom, system_matrix)
from .inference import (SensorData, condition_statfem, condition_statrom,
                        learn_hyperparameters, model_error_cov)
from .linalg import SingularMatrixError, lu_factor, lu_solve
from .mesh import build_interval_mesh, build_scatterer_mesh, interpolation_matrix
from .rom import build_basis, lift, reduce, solve_rom
from .stochastic import (KernelSpec, MultivariateGaussian, covariance_factor, discrete_forcing,
                         kernel_matrix, kl_build, sample_kappa, sample_moments, sobol_gaussian)

__all__ = [
    "ProblemConfig",
    "helmholtz1d",
    "scatter2d",
    "InputModel",
    "OfflineArtifacts",
    "DataSet",
    "RunResult",
    "build_mesh",
    "build_inputs",
    "offline",
    "forward_prior",
    "fom_prior",
    "prior_means",
    "estimate_errors",
    "generate_data",
    "default_sensors",
    "default_training_points",
    "online",
    "relative_hk1_error",
]

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.05


@dataclass(frozen=True)
class ProblemConfig:
    """Every knob of one experiment; the presets :func:`helmholtz1d` and :func:`scatter2d` fill it."""

    problem: str = "helmholtz1d"
    # 1D interval
    n_elements: int = 100
    length: float = 1.0
    ref_n_elements: int = 1000
    # 2D square with circular scatterer
    side: float = 1.0
    circle_x: float = 0.5
    circle_y: float = 0.5
    circle_radius: float = 0.15
    target_h: float = 0.035
    ref_target_h: float = 0.03
    # physics
    c: float = 343.0
    beta: float = 0.0
    # log-kappa random field; kappa_sigma = 0 makes kappa deterministic
    kappa_mu_log: float = 0.0
    kappa_sigma: float = float(np.sqrt(5e-2))
    kappa_ell: float = 0.3
    kappa_nu: float = 0.5
    kl_tau: float = 0.95
    # Neumann datum (1D): scalar Gaussian
    g_mean: float = float(np.pi**2 / 50)
    g_sigma: float = 0.02
    # domain source (2D): plane wave mean plus Matern GP in each channel
    plane_wave: bool = False
    f_sigma: float = 0.0
    f_ell: float = 0.6
    f_nu: float = 1.5
    f_tau: float = 1.0
    truth: str = "same"  # or "misspecified"
    # ROM
    omega_bar_hz: float = 100.0
    m: int = 5
    recurrence: str = "taylor"
    load_moments: bool = True  # include Taylor terms of a frequency-dependent load in the basis
    # QMC
    n_samples: int = 256
    seed: int = 0
    # error estimator
    n_train: int = 12
    m_adj: int = 0  # adjoint basis order; 0 means same as m
    adjoint_variance: str = "mean"  # or "raw"
    error_lengthscale: str = "wavelength"  # or "quarter_wavelength"
    # data and inference
    frequency_hz: float = 460.0
    n_sensors: int = 11
    n_obs: int = 20
    sigma_e: float = 1e-3
    restarts: int = 3
    full_order: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.problem not in ("helmholtz1d", "scatter2d"):
            raise ValueError(f"unknown problem {self.problem!r}")
        positive = ["length", "side", "circle_radius", "target_h", "ref_target_h", "c", "kappa_ell",
                    "kappa_nu", "f_ell", "f_nu", "omega_bar_hz", "frequency_hz"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ["n_elements", "ref_n_elements", "m", "n_samples", "n_obs", "restarts", "jobs"]:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        for name in ["n_train", "n_sensors", "m_adj"]:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ["kappa_sigma", "g_sigma", "f_sigma", "sigma_e", "beta"]:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.truth not in ("same", "misspecified"):
            raise ValueError(f"unknown truth {self.truth!r}")
        if self.adjoint_variance not in ("mean", "raw"):
            raise ValueError(f"unknown adjoint_variance {self.adjoint_variance!r}")

    @property
    def dim(self):
        return 1 if self.problem == "helmholtz1d" else 2

    @property
    def is_complex(self):
        return self.beta != 0.0 or self.plane_wave

    @property
    def channels(self):
        return ("real", "imag") if self.is_complex else ("real",)

    @property
    def adjoint_order(self):
        return self.m_adj if self.m_adj > 0 else self.m

    @property
    def omega_bar(self):
        return 2.0 * np.pi * self.omega_bar_hz

    @property
    def omega(self):
        return 2.0 * np.pi * self.frequency_hz

    def with_(self, **kw):
        return replace(self, **kw)

    @classmethod
    def from_dict(cls, values, base=None):
        """Build from string (or typed) values, e.g. parsed from an INI file.

        Keys missing from ``values`` come from ``base`` (a config) or the
        class defaults.
        """
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, val in values.items():
            if key not in types:
                raise KeyError(f"unknown config key {key!r}")
            t = types[key]
            if isinstance(val, str):
                if t == "bool":
                    low = val.strip().lower()
                    if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                        raise ValueError(f"{key}: not a boolean: {val!r}")
                    val = low in ("1", "true", "yes", "on")
                elif t == "int":
                    val = int(val)
                elif t == "float":
                    val = float(val)
                else:
                    val = val.strip()
            kw[key] = val
        return replace(base, **kw) if base is not None else cls(**kw)

    def as_dict(self):
        return asdict(self)


def helmholtz1d(**kw):
    """Real 1-D problem: lognormal kappa, random Neumann datum at x = 0, sound-hard end at x = 1."""
    return ProblemConfig(**kw)


def scatter2d(**kw):
    """Unit square with absorbing sides, sound-soft circular scatterer and a random plane-wave source."""
    base = dict(problem="scatter2d", beta=1.0, kappa_sigma=0.0, g_sigma=0.0, g_mean=0.0, plane_wave=True,
                f_sigma=0.8, f_ell=0.6, f_nu=1.5, truth="misspecified", omega_bar_hz=250.0, m=12,
                n_train=200, frequency_hz=360.0, n_sensors=5, n_obs=20)
    base.update(kw)
    return ProblemConfig(**base)


PRESETS = {"helmholtz1d": helmholtz1d, "scatter2d": scatter2d}


def build_mesh(cfg, fine=False):
    if cfg.problem == "helmholtz1d":
        return build_interval_mesh(cfg.ref_n_elements if fine else cfg.n_elements, cfg.length)
    return build_scatterer_mesh(cfg.side, (cfg.circle_x, cfg.circle_y), cfg.circle_radius,
                                cfg.ref_target_h if fine else cfg.target_h)


@dataclass(frozen=True, eq=False)
class InputModel:
    """Map from one standard-normal QMC point to ``kappa`` and the load vector.

    The point is laid out as ``[KL coordinates, g, source real part, source imag part]``
    with each block present only when that input is random.
    """

    mesh: object
    c: float
    kl: object
    kappa_const: np.ndarray
    g_mean: float
    g_sigma: float
    source_factor: object
    plane_wave: bool
    unit_mass: object
    g_load: np.ndarray

    @property
    def n_kl(self):
        return 0 if self.kl is None else self.kl.n_modes

    @property
    def n_g(self):
        return 1 if self.g_sigma > 0 else 0

    @property
    def n_src(self):
        return 0 if self.source_factor is None else self.source_factor.shape[1]

    @property
    def dim(self):
        return self.n_kl + self.n_g + 2 * self.n_src

    @property
    def random_kappa(self):
        return self.kl is not None

    def kappa(self, eta):
        if self.kl is None:
            return self.kappa_const
        return sample_kappa(self.kl, eta[: self.n_kl])

    def plane_wave_load(self, omega):
        if not self.plane_wave:
            return np.zeros(self.mesh.n_nodes, dtype=complex)
        return self.unit_mass @ np.exp(1j * (omega / self.c) * self.mesh.nodes[:, 0])

    def plane_wave_taylor(self, omega_bar, n):
        """Taylor coefficients 1..n-1 of the plane-wave load in ``(omega - omega_bar) / omega_bar``.

        Empty when there is no plane wave, so the load counts as constant.
        """
        if not self.plane_wave or n < 2:
            return []
        a = 1j * (omega_bar / self.c) * self.mesh.nodes[:, 0]
        term = np.exp(a)
        out = []
        for j in range(1, n):
            term = term * a / j
            out.append(self.unit_mass @ term)
        return out

    def static_load(self, eta):
        """Frequency-independent part of the load vector for one sample."""
        g = self.g_mean + (self.g_sigma * eta[self.n_kl] if self.n_g else 0.0)
        f = g * self.g_load.astype(complex)
        if self.n_src:
            o = self.n_kl + self.n_g
            z_re = eta[o: o + self.n_src]
            z_im = eta[o + self.n_src: o + 2 * self.n_src]
            f = f + self.source_factor @ z_re + 1j * (self.source_factor @ z_im)
        return f

    def load(self, eta, omega):
        return self.static_load(eta) + self.plane_wave_load(omega)


def build_inputs(cfg, mesh):
    kl = None
    if cfg.kappa_sigma > 0:
        kl = kl_build(mesh, cfg.kappa_mu_log, KernelSpec(cfg.kappa_nu, cfg.kappa_sigma, cfg.kappa_ell),
                      cfg.kl_tau)
    kappa_const = np.full(mesh.n_nodes, np.exp(cfg.kappa_mu_log))
    g_load = assemble_forcing(mesh, g_nodal=1.0).f_neumann.real
    factor = None
    if cfg.f_sigma > 0:
        Cf = discrete_forcing(mesh, "domain", 0.0, KernelSpec(cfg.f_nu, cfg.f_sigma, cfg.f_ell)).cov
        factor = covariance_factor(Cf, cfg.f_tau)
    unit_mass = hk1_gram(mesh)[1]
    return InputModel(mesh, cfg.c, kl, kappa_const, cfg.g_mean, cfg.g_sigma, factor, cfg.plane_wave,
                      unit_mass, g_load)


def qmc_points(inputs, n, seed):
    """``n x dim`` standard normal QMC points; a single empty column when nothing is random."""
    if inputs.dim == 0:
        return np.zeros((n, 0))
    return sobol_gaussian(inputs.dim, n, seed=seed, shift=True)


@dataclass(frozen=True, eq=False)
class OfflineArtifacts:
    """Per-sample systems, static loads, primal bases and adjoint sets.

    When ``kappa`` is deterministic all samples share one system and one
    adjoint set (``systems[i] is systems[0]``).
    """

    config: ProblemConfig
    seed: int
    mesh: object
    inputs: InputModel
    eta: np.ndarray
    systems: list
    static_loads: list
    bases: list
    adjoint_sets: list
    training_points: np.ndarray

    @property
    def n_samples(self):
        return len(self.systems)

    def load(self, i, omega):
        return self.static_loads[i] + self.inputs.plane_wave_load(omega)


def default_training_points(cfg, n=None):
    """Cell-centred in 1D.

    A training point on the loaded Neumann end would start its adjoint
    Krylov space from the load direction itself, making the estimate
    vanish identically by Galerkin orthogonality.
    """
    n = cfg.n_train if n is None else n
    return _spread_points(cfg, n, centred=True)


def default_sensors(cfg, n=None):
    n = cfg.n_sensors if n is None else n
    return _spread_points(cfg, n, offset=1)


def _spread_points(cfg, n, offset=0, centred=False):
    """Equally spaced points in 1D; in 2D an unshifted Sobol sequence outside the scatterer.

    ``centred`` puts the 1D points at cell midpoints of ``n`` equal cells
    instead of including both ends.
    """
    if n == 0:
        return np.zeros((0, cfg.dim))
    if cfg.dim == 1:
        if centred:
            return ((np.arange(n) + 0.5) * cfg.length / n)[:, None]
        return np.linspace(0.0, cfg.length, n)[:, None]
    margin = 0.02 * cfg.side
    # different leading points for sensors and training points, same generator
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        raw = qmc.Sobol(d=2, scramble=False).random(8 * n + 64)[1 + offset::2]
    pts = margin + (cfg.side - 2 * margin) * raw
    r = np.hypot(pts[:, 0] - cfg.circle_x, pts[:, 1] - cfg.circle_y)
    pts = pts[r > cfg.circle_radius + margin]
    if len(pts) < n:
        raise ValueError(f"could not place {n} points outside the scatterer")
    return pts[:n].copy()


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def offline(cfg, seed=None, training_points=None, jobs=None):
    """Build every sample's system, basis and adjoint bases.

    Raises
    ------
    RuntimeError
        Naming the first sample whose basis construction failed.
    """
    seed = cfg.seed if seed is None else seed
    jobs = cfg.jobs if jobs is None else jobs
    mesh = build_mesh(cfg)
    inputs = build_inputs(cfg, mesh)
    X = default_training_points(cfg) if training_points is None else np.asarray(training_points, float)
    X = X.reshape(-1, mesh.dim)
    eta = qmc_points(inputs, cfg.n_samples, seed)
    wb = cfg.omega_bar

    load_taylor = inputs.plane_wave_taylor(wb, cfg.m) if cfg.load_moments else None
    shared = None
    if not inputs.random_kappa:
        sys0 = assemble(mesh, inputs.kappa_const, cfg.c, cfg.beta)
        F0 = lu_factor(system_matrix(sys0, wb))
        aset0 = build_adjoint_set(sys0, X, wb, cfg.adjoint_order, primal_lu=F0,
                                  recurrence=cfg.recurrence)
        shared = (sys0, F0, aset0)

    def work(i):
        try:
            if shared is None:
                s = assemble(mesh, inputs.kappa(eta[i]), cfg.c, cfg.beta)
                F = lu_factor(system_matrix(s, wb))
            else:
                s, F, _ = shared
            f = inputs.static_load(eta[i])
            basis = build_basis(s, f + inputs.plane_wave_load(wb), wb, cfg.m, lu_reuse=F,
                                recurrence=cfg.recurrence, load_taylor=load_taylor)
            aset = (shared[2] if shared is not None else
                    build_adjoint_set(s, X, wb, cfg.adjoint_order, primal_lu=F,
                                      recurrence=cfg.recurrence))
        except (SingularMatrixError, ValueError) as exc:
            raise RuntimeError(f"offline phase failed at sample {i}: {exc}") from exc
        return s, f, basis, aset

    out = _map(work, range(cfg.n_samples), jobs)
    systems, loads, bases, asets = (list(t) for t in zip(*out))
    return OfflineArtifacts(cfg, seed, mesh, inputs, eta, systems, loads, bases, asets, X)


def forward_prior(art, omega):
    """ROM prior at ``omega`` from all samples.

    Returns
    -------
    prior : MultivariateGaussian
    U : (N, I_used) lifted ROM solutions
    used : indices of the samples that were solved
    """
    cols, used, failed = [], [], []
    for i, (s, basis) in enumerate(zip(art.systems, art.bases)):
        f = art.load(i, omega)
        red = reduce(s, f, basis)
        try:
            u = lift(basis, solve_rom(red, omega))
        except SingularMatrixError:
            failed.append(i)
            continue
        u[s.dirichlet_nodes] = 0.0
        cols.append(u)
        used.append(i)
    _check_failures(failed, art.n_samples, omega)
    U = np.column_stack(cols)
    return _moments(U, art.config), U, np.array(used)


def _check_failures(failed, n, omega):
    if not failed:
        return
    if len(failed) > MAX_FAILED_FRACTION * n:
        raise RuntimeError(f"{len(failed)} of {n} samples singular at omega = {omega}")
    log.warning("skipped %d singular samples at omega = %g: %s", len(failed), omega, failed)


def _moments(U, cfg):
    U = U if cfg.is_complex else U.real
    if U.shape[1] == 1:
        n = U.shape[0]
        z = np.zeros((n, n))
        return MultivariateGaussian(U[:, 0], z, z.copy() if cfg.is_complex else None)
    return sample_moments(U.T)


def fom_prior(art, omega):
    """Full-order prior at ``omega`` on the offline samples (factorizations shared where possible)."""
    cache = {}
    cols, failed = [], []
    for i, s in enumerate(art.systems):
        key = id(s)
        try:
            if key not in cache:
                cache[key] = lu_factor(system_matrix(s, omega))
            u = lu_solve(cache[key], s.apply_bc(art.load(i, omega)))
        except SingularMatrixError:
            failed.append(i)
            continue
        u[s.dirichlet_nodes] = 0.0
        cols.append(u)
    _check_failures(failed, art.n_samples, omega)
    U = np.column_stack(cols)
    return _moments(U, art.config), U


def prior_means(cfg, omegas, m_values, seed=None, jobs=None):
    """QMC means of the full-order and the ROM prior over a frequency grid and several orders.

    Each sample's system and its factorization at ``omega_bar`` are shared
    by all orders, so this is much cheaper than one :func:`offline` per order.

    Returns
    -------
    mesh
    fom : (n_freq, N) array
    rom : dict mapping m to an (n_freq, N) array
    """
    seed = cfg.seed if seed is None else seed
    jobs = cfg.jobs if jobs is None else jobs
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    m_values = [int(m) for m in m_values]
    if len(omegas) == 0 or not m_values:
        raise ValueError("need at least one frequency and one order")
    mesh = build_mesh(cfg)
    inputs = build_inputs(cfg, mesh)
    eta = qmc_points(inputs, cfg.n_samples, seed)
    wb = cfg.omega_bar
    load_taylor = inputs.plane_wave_taylor(wb, max(m_values)) if cfg.load_moments else None
    shared = None
    if not inputs.random_kappa:
        s0 = assemble(mesh, inputs.kappa_const, cfg.c, cfg.beta)
        shared = (s0, lu_factor(system_matrix(s0, wb)), [lu_factor(system_matrix(s0, w)) for w in omegas])

    def work(i):
        if shared is None:
            s = assemble(mesh, inputs.kappa(eta[i]), cfg.c, cfg.beta)
            F, Fw = lu_factor(system_matrix(s, wb)), [lu_factor(system_matrix(s, w)) for w in omegas]
        else:
            s, F, Fw = shared
        f0 = inputs.static_load(eta[i])
        loads = [s.apply_bc(f0 + inputs.plane_wave_load(w)) for w in omegas]
        fom = np.column_stack([lu_solve(Fk, f) for Fk, f in zip(Fw, loads)])
        rom = {}
        for m in m_values:
            lt = load_taylor[: m - 1] if load_taylor else None
            basis = build_basis(s, f0 + inputs.plane_wave_load(wb), wb, m, lu_reuse=F,
                                recurrence=cfg.recurrence, load_taylor=lt)
            red = reduce(s, np.column_stack(loads), basis)
            rom[m] = np.column_stack([basis.V @ solve_rom(red, w, f_r=red.f_r[:, j])
                                      for j, w in enumerate(omegas)])
        dn = s.dirichlet_nodes
        fom[dn] = 0.0
        for u in rom.values():
            u[dn] = 0.0
        return fom, rom

    try:
        out = _map(work, range(cfg.n_samples), jobs)
    except SingularMatrixError as exc:
        raise RuntimeError(f"prior sweep failed: {exc}") from exc
    keep = (lambda u: u) if cfg.is_complex else (lambda u: u.real)
    fom = keep(sum(o[0] for o in out) / len(out)).T
    rom = {m: keep(sum(o[1][m] for o in out) / len(out)).T for m in m_values}
    return mesh, fom, rom


def estimate_errors(art, omega, U, used=None):
    """Adjoint error estimates averaged over samples and regressed onto the mesh."""
    cfg = art.config
    used = np.arange(U.shape[1]) if used is None else used
    X = art.training_points
    if len(X) == 0:
        return ErrorField.zero(art.mesh.n_nodes, art.mesh.dim)
    cache = {}
    D = np.empty((len(used), len(X)), dtype=complex)
    for j, i in enumerate(used):
        s, aset = art.systems[i], art.adjoint_sets[i]
        if id(aset) not in cache:
            cache[id(aset)] = adjoint_vectors(s, omega, aset)
        Q = cache[id(aset)]
        res = s.apply_bc(art.load(i, omega)) - system_matrix(s, omega) @ U[:, j]
        D[j] = Q.conj().T @ res
    d_mean = D.mean(axis=0)
    if len(used) > 1:
        var = np.vstack([D.real.var(axis=0, ddof=1), D.imag.var(axis=0, ddof=1)])
        if cfg.adjoint_variance == "mean":
            var = var / len(used)
    else:
        var = np.zeros((2, len(X)))
    if not cfg.is_complex:
        d_mean = d_mean.real.astype(complex)
    dn = art.systems[0].dirichlet_nodes
    return estimate_error_field(art.mesh, X, d_mean, var, omega, cfg.c, dn,
                                lengthscale=cfg.error_lengthscale)


@dataclass(frozen=True, eq=False)
class DataSet:
    """Noisy readings (complex; real and imaginary parts carry independent noise) and the reference."""

    coords: np.ndarray
    Y: np.ndarray
    sigma_e: float
    omega: float
    ref_mesh: object
    u_ref: np.ndarray

    def channel(self, which, P):
        Y = self.Y.real if which == "real" else self.Y.imag
        return SensorData(Y, P, self.sigma_e, self.coords)


def _truth_field(cfg, mesh, seed):
    """Nodal misspecified source: a GP draw modulated across the y-direction."""
    C = kernel_matrix(mesh.nodes, KernelSpec(cfg.f_nu, cfg.f_sigma, cfg.f_ell))
    lam, vecs = np.linalg.eigh(C)
    L = vecs * np.sqrt(np.clip(lam, 0.0, None))
    rng = np.random.default_rng([seed, 1])
    s_re = L @ rng.standard_normal(len(lam))
    s_im = L @ rng.standard_normal(len(lam))
    y = mesh.nodes[:, 1]
    return s_re * (0.8 * np.cos(4.5 * np.pi * y) + 1.0) + 1j * s_im * (0.8 * np.sin(4.5 * np.pi * y) + 1.0)


def generate_data(cfg, omega=None, sensors=None, n_obs=None, sigma_e=None, seed=None):
    """Synthetic sensor readings from a fine-mesh reference.

    ``truth='same'``: the reference is the full-order QMC mean of the same
    stochastic model on the fine mesh.  ``truth='misspecified'``: the fine
    FOM is solved once with the mean source plus a modulated source draw.
    """
    omega = cfg.omega if omega is None else omega
    seed = cfg.seed if seed is None else seed
    n_obs = cfg.n_obs if n_obs is None else n_obs
    sigma_e = cfg.sigma_e if sigma_e is None else sigma_e
    coords = default_sensors(cfg) if sensors is None else np.asarray(sensors, float).reshape(-1, cfg.dim)
    mesh = build_mesh(cfg, fine=True)
    h = mesh.diameter() / max(cfg.ref_n_elements, 1) if mesh.dim == 1 else cfg.ref_target_h
    wavelength = 2.0 * np.pi * cfg.c / omega
    if wavelength / h < 10:
        log.warning("reference mesh has %.1f nodes per wavelength", wavelength / h)
    inputs = build_inputs(cfg, mesh)
    if cfg.truth == "same":
        eta = qmc_points(inputs, cfg.n_samples, seed)
        sys0 = None if inputs.random_kappa else assemble(mesh, inputs.kappa_const, cfg.c, cfg.beta)
        F0 = None
        acc = np.zeros(mesh.n_nodes, dtype=complex)
        for e in eta:
            s = sys0 if sys0 is not None else assemble(mesh, inputs.kappa(e), cfg.c, cfg.beta)
            f = s.apply_bc(inputs.load(e, omega))
            if sys0 is None:
                acc += solve_fom(s, omega, f)
            else:
                F0 = F0 if F0 is not None else lu_factor(system_matrix(s, omega))
                acc += lu_solve(F0, f)
        u_ref = acc / len(eta)
        if sys0 is not None:
            u_ref[sys0.dirichlet_nodes] = 0.0
    else:
        s = assemble(mesh, inputs.kappa_const, cfg.c, cfg.beta)
        field_ = _truth_field(cfg, mesh, seed)
        f = inputs.plane_wave_load(omega) + inputs.unit_mass @ field_ + cfg.g_mean * inputs.g_load
        u_ref = solve_fom(s, omega, f)
    if not cfg.is_complex:
        u_ref = u_ref.real.astype(complex)
    P = interpolation_matrix(mesh, coords)
    clean = P @ u_ref
    rng = np.random.default_rng([seed, 2])
    noise = sigma_e * rng.standard_normal((len(coords), n_obs))
    noise_im = sigma_e * rng.standard_normal((len(coords), n_obs))
    Y = clean[:, None] + noise + (1j * noise_im if cfg.is_complex else 0.0)
    return DataSet(coords, Y, float(sigma_e), float(omega), mesh, u_ref)


def relative_hk1_error(ref_mesh, u_ref, mesh, u, k, gram=None, P=None):
    den = hk1_norm(ref_mesh, u_ref, k, gram)
    num = hk1_error(ref_mesh, u_ref, mesh, u, k, gram, P)
    return num / den if den > 0 else num


@dataclass(eq=False)
class RunResult:
    """Online-phase output at one frequency.

    ``posteriors``, ``hyperparameters`` and ``errors`` are keyed by method
    (``'fom'``, ``'without'``, ``'with'``) and then by channel.
    ``predictive`` holds the complex whole-field predictive mean per method.
    """

    omega: float
    prior: object
    error_field: ErrorField
    posteriors: dict
    hyperparameters: dict
    predictive: dict
    errors: dict
    timings: dict = field(default_factory=dict)


def online(art, omega, data, full_order=None, restarts=None):
    """Prior, error field, hyperparameters and posteriors of all methods at ``omega``."""
    cfg = art.config
    full_order = cfg.full_order if full_order is None else full_order
    restarts = cfg.restarts if restarts is None else restarts
    t = {}
    t0 = time.perf_counter()
    prior, U, used = forward_prior(art, omega)
    t["prior"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    err = estimate_errors(art, omega, U, used)
    t["errors"] = time.perf_counter() - t0
    priors = {"without": prior, "with": prior}
    if full_order:
        t0 = time.perf_counter()
        priors["fom"] = fom_prior(art, omega)[0]
        t["fom_prior"] = time.perf_counter() - t0
    P = interpolation_matrix(art.mesh, data.coords)
    k = omega / cfg.c
    gram = hk1_gram(data.ref_mesh)
    P_ref = interpolation_matrix(art.mesh, data.ref_mesh.nodes)
    posts, hps, preds, errs = {}, {}, {}, {}
    t0 = time.perf_counter()
    for method, pr in priors.items():
        posts[method], hps[method], errs[method] = {}, {}, {}
        field_mean = np.zeros(art.mesh.n_nodes, dtype=complex)
        for ch in cfg.channels:
            sd = data.channel(ch, P)
            pc = pr.channel(ch)
            ec = err.channel(ch) if method == "with" else None
            hp = learn_hyperparameters(pc, ec, sd, restarts=restarts, seed=cfg.seed)
            C_d = model_error_cov(sd.coords, hp)
            if method == "with":
                post = condition_statrom(pc, ec, sd, hp, C_d)
                mean = hp.rho * (post.mean + ec.mean)
            else:
                post = condition_statfem(pc, sd, hp, C_d)
                mean = hp.rho * post.mean
            posts[method][ch], hps[method][ch] = post, hp
            field_mean = field_mean + (mean if ch == "real" else 1j * mean)
            ref = data.u_ref.real if ch == "real" else data.u_ref.imag
            errs[method][ch] = relative_hk1_error(data.ref_mesh, ref, art.mesh, mean, k, gram, P_ref)
        preds[method] = field_mean
    t["inference"] = time.perf_counter() - t0
    return RunResult(omega, prior, err, posts, hps, preds, errs, t)
