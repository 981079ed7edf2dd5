"""Computational meshes (1-D intervals, 2-D triangulations) and point interpolation.

A mesh carries its nodes, its elements and a tag for every boundary entity
(a node in 1-D, an edge in 2-D).  Tags are one of ``dirichlet``,
``neumann_g``, ``neumann_0`` and ``impedance``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay, cKDTree

__all__ = [
    "TAGS",
    "MeshError",
    "MeshFormatError",
    "PointOutsideError",
    "Mesh",
    "PointLocator",
    "build_interval_mesh",
    "build_scatterer_mesh",
    "load_mesh",
    "save_mesh",
    "locate_points",
    "interpolation_matrix",
]

TAGS = ("dirichlet", "neumann_g", "neumann_0", "impedance")


class MeshError(ValueError):
    """Invalid mesh (orientation, tagging, duplicates, degenerate elements)."""


class MeshFormatError(MeshError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PointOutsideError(ValueError):
    def __init__(self, index, point):
        super().__init__(f"point {index} at {tuple(np.atleast_1d(point))} lies outside the mesh")
        self.index = index


def _topological_boundary(dim, elements):
    """Boundary entities (sorted node tuples) of a conforming mesh."""
    if dim == 1:
        faces = [(int(n),) for n in elements.ravel()]
    else:
        faces = []
        for a, b, c in elements:
            faces += [tuple(sorted((int(a), int(b)))), tuple(sorted((int(b), int(c)))),
                      tuple(sorted((int(c), int(a))))]
    counts = {}
    for f in faces:
        counts[f] = counts.get(f, 0) + 1
    return sorted(f for f, k in counts.items() if k == 1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable simplicial mesh.

    Attributes
    ----------
    dim : int
        1 or 2.
    nodes : (n, dim) float array
    elements : (m, dim + 1) int array, positively oriented
    boundary : dict mapping a sorted node tuple to its tag
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, self.dim) if self.dim in (1, 2) else None
        if nodes is None:
            raise MeshError(f"dimension must be 1 or 2, got {self.dim}")
        elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, self.dim + 1)
        nodes.setflags(write=False)
        elements.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "boundary", {tuple(sorted(int(i) for i in k)): v
                                              for k, v in self.boundary.items()})
        self._validate()

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    def element_measures(self):
        """Signed lengths (1-D) or areas (2-D) of the elements."""
        x = self.nodes[self.elements]
        if self.dim == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        e1 = x[:, 1] - x[:, 0]
        e2 = x[:, 2] - x[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def boundary_entities(self, tag):
        return sorted(k for k, v in self.boundary.items() if v == tag)

    def boundary_nodes(self, tag):
        ids = {i for k in self.boundary_entities(tag) for i in k}
        return np.array(sorted(ids), dtype=np.int64)

    def diameter(self):
        ext = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        return float(np.linalg.norm(ext))

    def _validate(self):
        n = self.n_nodes
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= n):
            raise MeshError("element references a node index out of range")
        meas = self.element_measures()
        bad = np.flatnonzero(meas <= 0)
        if bad.size:
            raise MeshError(f"element {int(bad[0])} has nonpositive measure {meas[bad[0]]:.3e}")
        if n > 1:
            pairs = cKDTree(self.nodes).query_pairs(1e-12)
            if pairs:
                i, j = sorted(pairs)[0]
                raise MeshError(f"duplicate nodes {i} and {j}")
        for k, tag in self.boundary.items():
            if tag not in TAGS:
                raise MeshError(f"boundary entity {k} has unknown tag {tag!r}")
        topo = _topological_boundary(self.dim, self.elements)
        missing = [f for f in topo if f not in self.boundary]
        if missing:
            raise MeshError(f"boundary entity {missing[0]} is untagged")
        extra = sorted(set(self.boundary) - set(topo))
        if extra:
            raise MeshError(f"tagged entity {extra[0]} is not on the boundary")


def build_interval_mesh(n_elements, length, left_tag="neumann_g", right_tag="neumann_0"):
    """Equispaced mesh of ``[0, length]``.

    The left end carries ``left_tag`` and the right end ``right_tag``.
    """
    if n_elements < 1 or length <= 0:
        raise ValueError("need n_elements >= 1 and length > 0")
    x = np.arange(n_elements + 1) * (length / n_elements)
    x[-1] = length
    elements = np.column_stack([np.arange(n_elements), np.arange(1, n_elements + 1)])
    return Mesh(1, x[:, None], elements, {(0,): left_tag, (n_elements,): right_tag})


def build_scatterer_mesh(side, circle_center=(0.5, 0.5), circle_radius=0.0, target_h=0.05,
                         outer_tag="impedance", hole_tag="dirichlet"):
    """Triangulated square ``[0, side]^2`` with a circular hole.

    Grid nodes of a structured ``h``-grid closer than ``h/2`` to the circle
    (or inside it) are dropped, evenly spaced nodes are placed on the
    circle, the point set is Delaunay-triangulated and triangles whose
    centroid lies inside the circle are removed.  Every hole-boundary node
    therefore sits exactly on the circle.  ``circle_radius = 0`` yields the
    plain grid, split along one diagonal.

    Raises
    ------
    MeshError
        If the triangulation comes out degenerate.
    """
    if side <= 0 or target_h <= 0:
        raise ValueError("side and target_h must be positive")
    n = max(1, int(math.ceil(side / target_h - 1e-9)))
    h = side / n
    xs = np.linspace(0.0, side, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    c = np.asarray(circle_center, dtype=float)
    R = float(circle_radius)
    if R <= 0:
        idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[j, i] -> node at (xs[i], ys[j])
        v00, v10 = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
        v01, v11 = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
        tris = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    else:
        if np.any(c - R <= 0) or np.any(c + R >= side):
            raise ValueError("circle must lie strictly inside the square")
        if not target_h < R:
            raise ValueError("target_h must be smaller than the circle radius")
        keep = np.linalg.norm(nodes - c, axis=1) >= R + 0.5 * h
        n_rim = max(8, int(math.ceil(2.0 * math.pi * R / h)))
        theta = 2.0 * math.pi * np.arange(n_rim) / n_rim
        rim = c + R * np.column_stack([np.cos(theta), np.sin(theta)])
        nodes = np.vstack([nodes[keep], rim])
        tri = Delaunay(nodes)
        if len(tri.coplanar):
            raise MeshError(f"{len(tri.coplanar)} points left out of the triangulation")
        tris = tri.simplices.astype(np.int64)
        centroid = nodes[tris].mean(axis=1)
        tris = tris[np.linalg.norm(centroid - c, axis=1) > R]
        used = np.unique(tris)
        new = -np.ones(len(nodes), dtype=np.int64)
        new[used] = np.arange(len(used))
        nodes, tris = nodes[used], new[tris]

    x = nodes[tris]
    e1, e2 = x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    area = np.abs(area)
    bad = np.flatnonzero(area < 1e-10 * h * h)
    if bad.size:
        raise MeshError(f"triangle {int(bad[0])} is degenerate (area {area[bad[0]]:.3e})")

    boundary = {}
    for f in _topological_boundary(2, tris):
        mid = 0.5 * (nodes[f[0]] + nodes[f[1]])
        outer = np.any(np.isclose(mid, 0.0, atol=1e-12) | np.isclose(mid, side, atol=1e-12))
        boundary[f] = outer_tag if outer else hole_tag
    return Mesh(2, nodes, tris, boundary)


def save_mesh(mesh):
    """Serialize a mesh to the line-based text format."""
    lines = [f"dim {mesh.dim}", f"nodes {mesh.n_nodes}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in mesh.nodes]
    lines.append(f"elements {mesh.n_elements}")
    lines += [" ".join(str(int(v)) for v in row) for row in mesh.elements]
    items = sorted(mesh.boundary.items())
    lines.append(f"boundary {len(items)}")
    lines += [" ".join(str(i) for i in k) + f" {tag}" for k, tag in items]
    return "\n".join(lines) + "\n"


def load_mesh(text):
    """Parse the text mesh format (see :func:`save_mesh`).

    Raises
    ------
    MeshFormatError
        Syntax problems, with the 1-based line number.
    MeshError
        Invariant violations, naming the offending entity.
    """
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    rows = [(i, ln) for i, ln in rows if ln and not ln.startswith("#")]
    pos = 0

    def header(word):
        nonlocal pos
        if pos >= len(rows):
            raise MeshFormatError(f"missing '{word}' header", rows[-1][0] if rows else 1)
        lineno, ln = rows[pos]
        parts = ln.split()
        if len(parts) != 2 or parts[0] != word:
            raise MeshFormatError(f"expected '{word} <count>', got {ln!r}", lineno)
        try:
            val = int(parts[1])
        except ValueError:
            raise MeshFormatError(f"bad count {parts[1]!r}", lineno) from None
        pos += 1
        return val

    def body(count, parse):
        nonlocal pos
        out = []
        for _ in range(count):
            if pos >= len(rows):
                raise MeshFormatError("unexpected end of file", rows[-1][0] if rows else 1)
            lineno, ln = rows[pos]
            try:
                out.append(parse(ln.split()))
            except (ValueError, IndexError) as exc:
                raise MeshFormatError(f"cannot parse {ln!r}: {exc}", lineno) from None
            pos += 1
        return out

    dim = header("dim")
    if dim not in (1, 2):
        raise MeshFormatError(f"dim must be 1 or 2, got {dim}", rows[0][0])

    def parse_node(p):
        if len(p) != dim:
            raise ValueError(f"expected {dim} coordinates")
        return [float(v) for v in p]

    def parse_elem(p):
        if len(p) != dim + 1:
            raise ValueError(f"expected {dim + 1} node indices")
        return [int(v) for v in p]

    def parse_bdry(p):
        if len(p) != dim + 1:
            raise ValueError(f"expected {dim} node indices and a tag")
        if p[-1] not in TAGS:
            raise ValueError(f"unknown tag {p[-1]!r}")
        return tuple(int(v) for v in p[:-1]), p[-1]

    nodes = body(header("nodes"), parse_node)
    elements = body(header("elements"), parse_elem)
    bdry = body(header("boundary"), parse_bdry)
    if pos != len(rows):
        raise MeshFormatError("trailing content", rows[pos][0])
    boundary = {}
    for k, tag in bdry:
        key = tuple(sorted(k))
        if key in boundary:
            raise MeshError(f"boundary entity {key} tagged more than once")
        boundary[key] = tag
    return Mesh(dim, np.array(nodes, dtype=float).reshape(-1, dim),
                np.array(elements, dtype=np.int64).reshape(-1, dim + 1), boundary)


@dataclass(frozen=True)
class PointLocator:
    """Containing element and barycentric coordinates for each query point."""

    elements: np.ndarray
    barycentric: np.ndarray


def locate_points(mesh, points, tol=1e-10):
    """Find the containing element of every point.

    Points on shared element faces go to the lowest element index.  Points
    within ``tol`` (distance) of the mesh boundary count as inside.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, mesh.dim)
    npts = len(pts)
    elem = np.empty(npts, dtype=np.int64)
    bary = np.empty((npts, mesh.dim + 1))
    x = mesh.nodes[mesh.elements]
    if mesh.dim == 1:
        x0, x1 = x[:, 0, 0], x[:, 1, 0]
        for s in range(0, npts, 256):
            p = pts[s:s + 256, 0][:, None]
            ok = (p >= x0 - tol) & (p <= x1 + tol)
            _assign(ok, s, pts, elem)
        e = elem
        t = (pts[:, 0] - x0[e]) / (x1[e] - x0[e])
        lam = np.column_stack([1.0 - t, t])
    else:
        a, b, c = x[:, 0], x[:, 1], x[:, 2]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        # heights opposite each vertex turn barycentric coords into distances
        edge_len = np.column_stack([np.linalg.norm(c - b, axis=1), np.linalg.norm(a - c, axis=1),
                                    np.linalg.norm(b - a, axis=1)])
        height = det[:, None] / edge_len
        chunk = max(1, 400000 // max(1, mesh.n_elements))
        for s in range(0, npts, chunk):
            p = pts[s:s + chunk]
            l1 = ((p[:, None, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (p[:, None, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / det
            l2 = ((b[:, 0] - a[:, 0]) * (p[:, None, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (p[:, None, 0] - a[:, 0])) / det
            l0 = 1.0 - l1 - l2
            dmin = np.minimum(np.minimum(l0 * height[:, 0], l1 * height[:, 1]), l2 * height[:, 2])
            _assign(dmin >= -tol, s, pts, elem)
        lam = _bary2d(pts, x[elem])
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum(axis=1, keepdims=True)
    bary[:] = lam
    return PointLocator(elem, bary)


def _assign(ok, start, pts, elem):
    found = ok.any(axis=1)
    if not found.all():
        i = start + int(np.flatnonzero(~found)[0])
        raise PointOutsideError(i, pts[i])
    elem[start:start + len(ok)] = ok.argmax(axis=1)


def _bary2d(p, tri):
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    l1 = ((p[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (p[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / det
    l2 = ((b[:, 0] - a[:, 0]) * (p[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[:, 0] - a[:, 0])) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def interpolation_matrix(mesh, points, tol=1e-10):
    """Sparse ``(n_points, n_nodes)`` matrix of P1 shape-function values.

    Row ``i`` reproduces the piecewise-linear interpolant at ``points[i]``;
    every row sums to one.
    """
    loc = locate_points(mesh, points, tol)
    npts = len(loc.elements)
    rows = np.repeat(np.arange(npts), mesh.dim + 1)
    cols = mesh.elements[loc.elements].ravel()
    P = sp.csr_matrix((loc.barycentric.ravel(), (rows, cols)), shape=(npts, mesh.n_nodes))
    P.sum_duplicates()
    P.eliminate_zeros()
    return P
