"""Acceptance criteria 1-9 at their stated tolerances.

Each test records one ``criterion N: PASS|FAIL`` line, printed in the pytest
terminal summary, then asserts.  The 1D and 2D studies are slow (several
minutes in total); deselect them with ``-m "not slow"``.
"""

import time

import numpy as np
import pytest

import conftest
import harness
from statrom.adjoint_error import build_adjoint_set, pointwise_error
from statrom.assembly import assemble, hk1_gram, solve_fom
from statrom.cli import main
from statrom.inference import Hyperparameters, SensorData, condition_statfem, condition_statrom
from statrom.pipeline import (build_inputs, build_mesh, default_training_points, generate_data,
                              helmholtz1d, offline, online, prior_means, qmc_points,
                              relative_hk1_error, scatter2d)
from statrom.rom import build_basis, lift, reduce, solve_rom
from statrom.stochastic import MultivariateGaussian


def record(n, ok, t0, detail):
    status = "PASS" if ok else "FAIL"
    conftest.ACCEPTANCE_LINES.append(f"criterion {n}: {status}  {detail}  ({time.perf_counter() - t0:.1f} s)")
    assert ok, f"criterion {n}: {detail}"


def _sample_system(cfg, i=0):
    mesh = build_mesh(cfg)
    inputs = build_inputs(cfg, mesh)
    eta = qmc_points(inputs, cfg.n_samples, cfg.seed)[i]
    sys = assemble(mesh, inputs.kappa(eta), cfg.c, cfg.beta)
    return mesh, sys, inputs.load(eta, cfg.omega_bar)


def test_criterion_1_conditioning_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    variants = [("statfem", False), ("statrom", False), ("statrom", True)]
    dev = max(harness.deviations(rng, *variants[i % 3]) for i in range(200))
    elapsed = time.perf_counter() - t0
    record(1, dev <= 1e-10 and elapsed < 10, t0, f"max deviation {dev:.2e} on 200 instances")


def test_criterion_2_moment_matching():
    t0 = time.perf_counter()
    cfg = helmholtz1d()
    _, sys, f = _sample_system(cfg)
    wb = cfg.omega_bar
    h = 1e-4 * wb
    u0 = solve_fom(sys, wb, f)
    du = (solve_fom(sys, wb + h, f) - solve_fom(sys, wb - h, f)) / (2 * h)
    worst_val, worst_der = 0.0, 0.0
    for m in range(1, 16):
        basis = build_basis(sys, f, wb, m)
        red = reduce(sys, f, basis)
        ur = lift(basis, solve_rom(red, wb))
        worst_val = max(worst_val, np.linalg.norm(ur - u0) / np.linalg.norm(u0))
        if m >= 2:
            dur = (lift(basis, solve_rom(red, wb + h)) - lift(basis, solve_rom(red, wb - h))) / (2 * h)
            worst_der = max(worst_der, np.linalg.norm(dur - du) / np.linalg.norm(du))
    ok = worst_val <= 1e-10 and worst_der <= 1e-5 and time.perf_counter() - t0 < 30
    record(2, ok, t0, f"value {worst_val:.1e}, derivative {worst_der:.1e}")


@pytest.mark.slow
def test_criterion_3_rom_convergence_1d():
    t0 = time.perf_counter()
    cfg = helmholtz1d()
    mesh, fom, rom = prior_means(cfg, [cfg.omega], [5, 15])
    k, gram = cfg.omega / cfg.c, hk1_gram(mesh)
    e5, e15 = (relative_hk1_error(mesh, fom[0], mesh, rom[m][0], k, gram) for m in (5, 15))
    ok = e15 <= 1e-8 and e15 <= 1e-6 * e5 and time.perf_counter() - t0 < 120
    record(3, ok, t0, f"err(m=15) {e15:.2e}, err(m=5) {e5:.2e}")


@pytest.mark.slow
def test_criterion_4_adjoint_estimator():
    t0 = time.perf_counter()
    cfg = helmholtz1d()
    _, sys, f = _sample_system(cfg)
    X = default_training_points(cfg)
    u = solve_fom(sys, cfg.omega, f)
    devs = {}
    for m in (5, 10, 15):
        basis = build_basis(sys, f, cfg.omega_bar, m)
        ut = lift(basis, solve_rom(reduce(sys, f, basis), cfg.omega))
        aset = build_adjoint_set(sys, X, cfg.omega_bar, m)
        direct = aset.P @ (u - ut)
        est = np.array([pointwise_error(sys, cfg.omega, aset.bases[j], aset.P[j].toarray().ravel(),
                                        f, ut) for j in range(len(X))])
        devs[m] = float(np.max(np.abs(est - direct) / np.abs(direct)))
    ok = devs[15] <= 1e-3 and devs[5] >= devs[10] >= devs[15] and time.perf_counter() - t0 < 120
    record(4, ok, t0, "max rel deviation " + ", ".join(f"m={m}: {v:.1e}" for m, v in devs.items()))


@pytest.mark.slow
def test_criterion_5_statrom_dominance():
    t0 = time.perf_counter()
    cfg = helmholtz1d()
    datas = [generate_data(cfg, seed=s) for s in range(5)]  # expectation over data noise
    mean_err = {}
    for m in (4, 5, 6, 7, 8, 15):
        c = cfg.with_(m=m)
        art = offline(c)
        runs = [online(art, c.omega, d).errors for d in datas]
        mean_err[m] = {k: float(np.mean([r[k]["real"] for r in runs])) for k in ("without", "with", "fom")}
    losing = [m for m in (4, 5, 6, 7, 8) if mean_err[m]["with"] > mean_err[m]["without"]]
    base = mean_err[15]["fom"]
    close = all(abs(mean_err[15][k] - base) <= 0.1 * base for k in ("without", "with"))
    ok = not losing and close and time.perf_counter() - t0 < 600
    detail = " ".join(f"m={m}:{e['with']:.4g}/{e['without']:.4g}" for m, e in mean_err.items())
    record(5, ok, t0, f"with/without {detail}; fom {base:.4g}; statROM worse at m={losing}")


def _scatter_errors(m, hz, configs):
    cfg = scatter2d(m=m, frequency_hz=hz)
    art = offline(cfg)
    out = {}
    for ns, no in configs:
        data = generate_data(cfg.with_(n_sensors=ns, n_obs=no))
        out[(ns, no)] = online(art, cfg.omega, data).errors
    return out


@pytest.mark.slow
def test_criterion_6_scatter_trends():
    t0 = time.perf_counter()
    errs = _scatter_errors(12, 360.0, [(5, 20), (80, 200)])
    lo, hi = errs[(5, 20)], errs[(80, 200)]
    better = all(lo["with"][ch] < lo["without"][ch] for ch in ("real", "imag"))

    def gap(e, ch):
        return abs(e["with"][ch] - e["without"][ch]) / e["without"][ch]

    shrinks = all(gap(hi, ch) < gap(lo, ch) for ch in ("real", "imag"))
    ok = better and shrinks and time.perf_counter() - t0 < 1200
    detail = ", ".join(f"{ch} gap {gap(lo, ch):.2e} -> {gap(hi, ch):.2e}" for ch in ("real", "imag"))
    record(6, ok, t0, f"with<without at 5/20: {better}; {detail}")


@pytest.mark.slow
def test_criterion_7_scatter_parity():
    t0 = time.perf_counter()
    errs = _scatter_errors(20, 300.0, [(5, 20), (30, 50), (80, 200)])
    spread = 0.0
    for e in errs.values():
        for ch in ("real", "imag"):
            vals = [e[k][ch] for k in ("fom", "without", "with")]
            spread = max(spread, max(vals) / min(vals) - 1.0)
    record(7, spread <= 0.1, t0, f"largest relative spread {spread:.2e}")


@pytest.mark.slow
def test_criterion_8_determinism(tmp_path):
    t0 = time.perf_counter()
    small = ["--n_samples", "16", "--n_elements", "50", "--ref_n_elements", "200", "--restarts", "1"]
    runs = {
        "converge-rom": small + ["--m_max", "6"],
        "sweep": small + ["--frequencies_hz", "50,75,100", "--m_values", "3,5"],
        "statrom-converge": small + ["--m_values", "3", "--n_obs", "4"],
        "gen-data": small,
        "scatter2d": ["--target_h", "0.1", "--ref_target_h", "0.08", "--n_samples", "8", "--n_train",
                      "10", "--restarts", "1", "--cases", "300:4", "--data_configs", "5/4"],
    }
    differing = []
    for cmd, extra in runs.items():
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / cmd / rep
            assert main([cmd, "--out", str(d)] + extra) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))})
        if outs[0] != outs[1] or not outs[0]:
            differing.append(cmd)
    record(8, not differing, t0, f"{len(runs)} commands rerun, differing: {differing}")


def test_criterion_9_degeneration():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    N = 6
    L = rng.standard_normal((N, N))
    prior = MultivariateGaussian(rng.standard_normal(N), L @ L.T)
    P = np.eye(N)[[1, 3, 4]]
    data = SensorData(rng.standard_normal((3, 4)), P, 0.1, rng.random((3, 1)))
    hp = Hyperparameters(1.3, 0.2, 0.5)
    zero = MultivariateGaussian(np.zeros(N), np.zeros((N, N)))
    a, b = condition_statfem(prior, data, hp), condition_statrom(prior, zero, data, hp)
    same = max(np.abs(a.mean - b.mean).max(), np.abs(a.cov - b.cov).max())
    huge = SensorData(data.Y, P, 1e6, data.coords)
    hp_huge = Hyperparameters(1.3, 1e6, 0.5)
    rel = 0.0
    for post in (condition_statfem(prior, huge, hp_huge), condition_statrom(prior, zero, huge, hp_huge)):
        rel = max(rel, np.abs(post.mean - prior.mean).max() / np.abs(prior.mean).max(),
                  np.abs(post.cov - prior.cov).max() / np.abs(prior.cov).max())
    # Dirichlet nodes in a small 2D run: priors, error field and every posterior
    cfg = scatter2d(target_h=0.1, ref_target_h=0.08, n_samples=8, n_train=10, restarts=1, m=4,
                    frequency_hz=300.0, n_obs=4)
    art = offline(cfg)
    res = online(art, cfg.omega, generate_data(cfg))
    dn = art.systems[0].dirichlet_nodes
    gauss = [res.prior.channel(ch) for ch in cfg.channels]
    gauss += [res.error_field.channel(ch) for ch in cfg.channels]
    gauss += [p for per in res.posteriors.values() for p in per.values()]
    dirichlet = max(max(np.abs(g.mean[dn]).max(), np.abs(g.cov[dn]).max(), np.abs(g.cov[:, dn]).max())
                    for g in gauss)
    ok = same <= 1e-12 and rel <= 1e-6 and dirichlet == 0.0
    record(9, ok, t0, f"statROM-statFEM {same:.1e}, huge-noise rel {rel:.1e}, Dirichlet max {dirichlet}")
