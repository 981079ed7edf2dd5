import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from statrom.linalg import SingularMatrixError, lu_factor, lu_solve, orthonormal_extend, sym_eig


def _random_complex(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) + n * np.eye(n)


def test_identity_returns_rhs():
    b = np.array([1.0, 2j, -3.0])
    assert np.array_equal(lu_solve(lu_factor(np.eye(3)), b), b.astype(complex))


@pytest.mark.parametrize("sparse", [False, True])
@pytest.mark.parametrize("mode", ["direct", "adjoint"])
def test_solve_matches_numpy(sparse, mode):
    rng = np.random.default_rng(0)
    A = _random_complex(rng, 6)
    B = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
    F = lu_factor(sp.csc_matrix(A) if sparse else A)
    X = lu_solve(F, B, mode)
    ref = np.linalg.solve(A if mode == "direct" else A.conj().T, B)
    assert np.allclose(X, ref, rtol=1e-12, atol=1e-12)
    assert np.allclose(F.solve(B[:, 0], mode), ref[:, 0])


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_singular_matrix_reports_pivot():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError) as exc:
        lu_factor(A)
    assert exc.value.pivot is not None
    with pytest.raises(SingularMatrixError):
        lu_factor(sp.csc_matrix(np.zeros((3, 3))))


def test_shape_errors():
    with pytest.raises(ValueError):
        lu_factor(np.ones((2, 3)))
    F = lu_factor(np.eye(2))
    with pytest.raises(ValueError):
        lu_solve(F, np.ones(3))
    with pytest.raises(ValueError):
        lu_solve(F, np.ones(2), mode="transpose")


@given(st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_orthonormal_extend_builds_orthonormal_basis(n, seed):
    rng = np.random.default_rng(seed)
    cols = []
    for _ in range(n + 2):
        out = orthonormal_extend(cols, rng.standard_normal(n) + 1j * rng.standard_normal(n))
        if out is not None:
            cols.append(out[0])
    V = np.column_stack(cols)
    assert V.shape[1] == n
    assert np.allclose(V.conj().T @ V, np.eye(n), atol=1e-12)


def test_orthonormal_extend_deflates():
    v = np.array([1.0, 0.0, 0.0], dtype=complex)
    assert orthonormal_extend([v], 3 * v) is None
    assert orthonormal_extend([], np.zeros(3)) is None
    assert orthonormal_extend(np.zeros((3, 0)), np.array([0.0, 2.0, 0.0]))[1] == pytest.approx(2.0)


@given(arrays(float, (4, 4), elements=st.floats(-10, 10)))
def test_sym_eig_reconstructs(A):
    C = A + A.T
    lam, V = sym_eig(C)
    assert np.all(np.diff(lam) <= 1e-12)
    assert np.allclose(V @ np.diag(lam) @ V.T, C, atol=1e-9 * max(1.0, np.abs(C).max()))


def test_sym_eig_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
