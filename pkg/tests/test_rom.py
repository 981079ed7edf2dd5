import numpy as np
import pytest
from hypothesis import given, strategies as st

from statrom.assembly import assemble, assemble_forcing, hk1_gram, solve_fom, system_matrix
from statrom.linalg import lu_factor, lu_solve
from statrom.mesh import build_interval_mesh, build_scatterer_mesh
from statrom.rom import build_basis, lift, reduce, reduced_matrix, solve_rom


@pytest.fixture(scope="module")
def problem1d():
    mesh = build_interval_mesh(100, 1.0)
    kappa = 1.0 + 0.3 * np.sin(3 * mesh.nodes[:, 0])
    sys = assemble(mesh, kappa, 343.0, 0.0)
    f = assemble_forcing(mesh, g_nodal=np.pi**2 / 50).total
    return sys, f


def _rom_solution(sys, f, basis, omega):
    return lift(basis, solve_rom(reduce(sys, f, basis), omega))


@given(st.integers(1, 15))
def test_rom_exact_at_expansion_point(problem1d, m):
    sys, f = problem1d
    wb = 2 * np.pi * 100
    b = build_basis(sys, f, wb, m)
    u = solve_fom(sys, wb, f)
    assert np.linalg.norm(_rom_solution(sys, f, b, wb) - u) <= 1e-10 * np.linalg.norm(u)


def test_basis_orthonormal_and_reuses_lu(problem1d):
    sys, f = problem1d
    wb = 2 * np.pi * 100
    F = lu_factor(system_matrix(sys, wb))
    b = build_basis(sys, f, wb, 8, lu_reuse=F)
    assert b.lu is F and b.r <= 8
    assert np.allclose(b.V.conj().T @ b.V, np.eye(b.r), atol=1e-12)


def test_derivative_matched(problem1d):
    sys, f = problem1d
    wb, h = 2 * np.pi * 100, 1e-2
    b = build_basis(sys, f, wb, 4)
    d_rom = (_rom_solution(sys, f, b, wb + h) - _rom_solution(sys, f, b, wb - h)) / (2 * h)
    d_fom = (solve_fom(sys, wb + h, f) - solve_fom(sys, wb - h, f)) / (2 * h)
    assert np.linalg.norm(d_rom - d_fom) <= 1e-5 * np.linalg.norm(d_fom)


def test_error_decreases_with_order(problem1d):
    sys, f = problem1d
    wb, w = 2 * np.pi * 100, 2 * np.pi * 300
    u = solve_fom(sys, w, f)
    errs = [np.linalg.norm(_rom_solution(sys, f, build_basis(sys, f, wb, m), w) - u) for m in (3, 8, 15)]
    assert errs[0] > errs[1] > errs[2]


def test_adjoint_basis_exact_for_adjoint_problem(problem1d):
    sys, _ = problem1d
    wb = 2 * np.pi * 100
    p = np.zeros(sys.n)
    p[37] = 1.0
    b = build_basis(sys, p, wb, 3, adjoint_mode=True)
    A = system_matrix(sys, wb)
    q = np.linalg.solve(A.conj().T.toarray(), p)
    red = reduce(sys, p, b)
    q_r = lu_solve(lu_factor(reduced_matrix(red, wb)), red.f_r, mode="adjoint")
    assert np.linalg.norm(b.V @ q_r - q) <= 1e-10 * np.linalg.norm(q)


def test_frequency_dependent_load_moments():
    # a plane-wave load changes with omega; its Taylor terms must enter the basis
    mesh = build_scatterer_mesh(1.0, (0.5, 0.5), 0.2, 0.1)
    sys = assemble(mesh, 1.0, 343.0, 1.0)
    unit_mass = hk1_gram(mesh)[1]
    x = mesh.nodes[:, 0]
    wb, w = 2 * np.pi * 250, 2 * np.pi * 300

    def load(om):
        return unit_mass @ np.exp(1j * om / 343.0 * x)

    a = 1j * wb / 343.0 * x
    taylor, term = [], np.exp(a)
    for j in range(1, 12):
        term = term * a / j
        taylor.append(unit_mass @ term)
    u = solve_fom(sys, w, load(w))
    plain = build_basis(sys, load(wb), wb, 12)
    full = build_basis(sys, load(wb), wb, 12, load_taylor=taylor)
    e_plain = np.linalg.norm(_rom_solution(sys, load(w), plain, w) - u) / np.linalg.norm(u)
    e_full = np.linalg.norm(_rom_solution(sys, load(w), full, w) - u) / np.linalg.norm(u)
    assert e_full < 1e-8 < e_plain
    # still exact at the expansion point
    ub = solve_fom(sys, wb, load(wb))
    assert np.linalg.norm(_rom_solution(sys, load(wb), full, wb) - ub) <= 1e-10 * np.linalg.norm(ub)


def test_input_validation(problem1d):
    sys, f = problem1d
    with pytest.raises(ValueError):
        build_basis(sys, f, 600.0, 0)
    with pytest.raises(ValueError):
        build_basis(sys, np.zeros(sys.n), 600.0, 3)
    with pytest.raises(ValueError):
        build_basis(sys, f, 600.0, 3, recurrence="pade")
    b = build_basis(sys, f, 600.0, 3)
    with pytest.raises(ValueError):
        lift(b, np.zeros(b.r + 1))
    with pytest.raises(ValueError):
        reduce(sys, f, np.zeros((sys.n + 1, 2)))


def test_imag_mass_recurrence_still_exact_at_expansion_point(problem1d):
    sys, f = problem1d
    wb = 2 * np.pi * 100
    b = build_basis(sys, f, wb, 6, recurrence="imag_mass")
    u = solve_fom(sys, wb, f)
    assert np.linalg.norm(_rom_solution(sys, f, b, wb) - u) <= 1e-10 * np.linalg.norm(u)
