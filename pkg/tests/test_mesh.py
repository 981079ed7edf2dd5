import numpy as np
import pytest
from hypothesis import given, strategies as st

from statrom.mesh import (Mesh, MeshError, MeshFormatError, PointOutsideError, build_interval_mesh,
                          build_scatterer_mesh, interpolation_matrix, load_mesh, locate_points,
                          save_mesh)


def test_interval_mesh():
    m = build_interval_mesh(10, 2.0)
    assert m.n_nodes == 11 and m.n_elements == 10
    assert m.nodes[-1, 0] == 2.0
    assert np.allclose(m.element_measures(), 0.2)
    assert list(m.boundary_nodes("neumann_g")) == [0]
    assert list(m.boundary_nodes("neumann_0")) == [10]
    with pytest.raises(ValueError):
        build_interval_mesh(0, 1.0)


def _euler_ok(mesh):
    edges = {tuple(sorted(e)) for t in mesh.elements for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))}
    # one hole: V - E + F = 1 - holes (F without the outer face)
    holes = 1 if mesh.boundary_entities("dirichlet") else 0
    return mesh.n_nodes - len(edges) + mesh.n_elements == 1 - holes


def test_scatterer_mesh_geometry():
    m = build_scatterer_mesh(1.0, (0.5, 0.5), 0.15, 0.035)
    assert np.all(m.element_measures() > 0)
    assert _euler_ok(m)
    rim = m.boundary_nodes("dirichlet")
    r = np.linalg.norm(m.nodes[rim] - 0.5, axis=1)
    assert np.allclose(r, 0.15, atol=1e-12)
    outer = m.boundary_nodes("impedance")
    on_side = np.any(np.isclose(m.nodes[outer], 0.0) | np.isclose(m.nodes[outer], 1.0), axis=1)
    assert on_side.all()
    # desk-scale mesh size close to the reference problem
    assert 800 <= m.n_nodes <= 900


@given(st.floats(0.05, 0.3), st.floats(0.25, 0.35))
def test_scatterer_mesh_valid_for_range_of_sizes(h, R):
    if h >= R:
        return
    m = build_scatterer_mesh(1.0, (0.5, 0.5), R, h)
    assert np.all(m.element_measures() > 0)
    assert _euler_ok(m)


def test_plain_square_and_bad_circles():
    m = build_scatterer_mesh(1.0, target_h=0.25)
    assert m.n_nodes == 25 and _euler_ok(m)
    with pytest.raises(ValueError):
        build_scatterer_mesh(1.0, (0.1, 0.5), 0.2, 0.05)
    with pytest.raises(ValueError):
        build_scatterer_mesh(1.0, (0.5, 0.5), 0.05, 0.1)


def test_save_load_roundtrip():
    for m in (build_interval_mesh(5, 1.0), build_scatterer_mesh(1.0, (0.5, 0.5), 0.2, 0.1)):
        back = load_mesh(save_mesh(m))
        assert np.array_equal(back.nodes, m.nodes)
        assert np.array_equal(back.elements, m.elements)
        assert back.boundary == m.boundary


def test_load_mesh_errors():
    with pytest.raises(MeshFormatError):
        load_mesh("dim 1\nnodes 2\n0.0\n")
    with pytest.raises(MeshError):
        Mesh(1, np.zeros((2, 1)), np.array([[0, 5]]))


def test_interpolation_matrix_nodal_and_linear():
    m = build_scatterer_mesh(1.0, (0.5, 0.5), 0.2, 0.1)
    P = interpolation_matrix(m, m.nodes[[3, 17]])
    assert np.allclose(P.toarray()[0], np.eye(m.n_nodes)[3])
    rng = np.random.default_rng(0)
    pts = rng.random((50, 2))
    pts = pts[np.linalg.norm(pts - 0.5, axis=1) > 0.25]
    P = interpolation_matrix(m, pts)
    assert np.allclose(P.sum(axis=1), 1.0)
    # P1 interpolation reproduces affine functions exactly
    f = 2.0 * m.nodes[:, 0] - 3.0 * m.nodes[:, 1] + 1.0
    assert np.allclose(P @ f, 2.0 * pts[:, 0] - 3.0 * pts[:, 1] + 1.0)


def test_locate_rejects_outside_points():
    m = build_interval_mesh(4, 1.0)
    with pytest.raises(PointOutsideError):
        locate_points(m, [[1.5]])
    loc = locate_points(m, [[0.25], [1.0 + 1e-12]])
    assert loc.elements[0] == 0 and loc.elements[1] == 3
