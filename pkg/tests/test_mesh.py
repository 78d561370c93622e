import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zaremba import DomainBoundary, Grading, Mesh, MeshQualityError, generate, mesh_family, quality, refine
from zaremba.fem import assemble_global
from zaremba.mesh import QUALITY_FLOOR_DEG, quality_floor, read_mesh, write_mesh
from zaremba.scenarios import circular_cap, delta_quadrilateral, trapezium, triangle, SolverConfig


def edge_use(mesh):
    t = mesh.triangles
    e = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    keys, counts = np.unique(e, axis=0, return_counts=True)
    return {tuple(k): c for k, c in zip(keys, counts)}


def assert_conforming(mesh, boundary, tol=1e-10):
    assert np.all(mesh.areas() > 0)
    use = edge_use(mesh)
    assert set(use.values()) <= {1, 2}
    bset = {tuple(sorted(e)) for e in mesh.boundary_edges}
    assert bset == {k for k, c in use.items() if c == 1}
    # single closed counterclockwise cycle
    be = mesh.boundary_edges
    assert np.array_equal(be[:, 1], np.roll(be[:, 0], -1))
    assert len(np.unique(be[:, 0])) == len(be)
    # vertices lie on their arcs at the stored parameters
    for (a, b), arc, (s0, s1) in zip(be, mesh.boundary_arcs, mesh.boundary_params):
        arc_obj = boundary.arcs[arc]
        np.testing.assert_allclose(mesh.vertices[a], arc_obj.point(s0), atol=tol)
        np.testing.assert_allclose(mesh.vertices[b], arc_obj.point(s1), atol=tol)
        assert s0 < s1
    # every corner is a mesh vertex
    for arc in boundary.arcs:
        assert np.min(np.linalg.norm(mesh.vertices - arc.start, axis=1)) <= tol


def test_square_exact_area(unit_square):
    m = generate(unit_square, 0.25)
    assert_conforming(m, unit_square)
    assert m.areas().sum() == pytest.approx(1.0, abs=1e-12)
    assert quality(m)["min_angle"] >= QUALITY_FLOOR_DEG


def test_disk_area_deficit(unit_disk):
    m = generate(unit_disk, 0.05)
    assert_conforming(m, unit_disk)
    area = m.areas().sum()
    assert math.pi - 0.01 < area < math.pi
    assert area == pytest.approx(m.polygon_area(), rel=1e-12)


def test_graded_smallest_edge(right_triangle):
    h = 0.2
    m = generate(right_triangle, h, Grading((2,), 0.15, 4))
    assert_conforming(m, right_triangle)
    p = m.vertices[m.boundary_edges]
    lengths = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    k = int(np.argmin(lengths))
    target = 0.15**4 * h
    assert target / 1.5 <= lengths[k] <= 1.5 * target
    corner = np.array([0.0, 1.0])
    assert np.min(np.linalg.norm(p[k] - corner, axis=1)) <= 1e-14


def test_refine_counts(unit_square):
    m = generate(unit_square, 0.25)
    r = refine(m, unit_square)
    assert r.n_triangles == 4 * m.n_triangles
    assert len(r.boundary_edges) == 2 * len(m.boundary_edges)
    assert r.h_nominal == pytest.approx(0.5 * m.h_nominal)
    assert_conforming(r, unit_square)


def test_disk_refinement_converges(unit_disk):
    meshes = mesh_family(unit_disk, 0.2, 5)
    deficit = np.array([math.pi - m.areas().sum() for m in meshes])
    assert np.all(deficit > 0)
    assert np.all(np.diff(deficit) < 0)
    np.testing.assert_allclose(deficit[:-1] / deficit[1:], 4.0, rtol=0.02)
    for m in meshes[1:]:
        assert_conforming(m, unit_disk)
        r = np.linalg.norm(m.vertices[m.boundary_vertices()], axis=1)
        np.testing.assert_allclose(r, 1.0, atol=1e-14)


def test_structured_square_quality():
    n = 4
    x, y = np.meshgrid(np.linspace(0, 1, n + 1), np.linspace(0, 1, n + 1))
    v = np.c_[x.ravel(), y.ravel()]
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    tris = []
    for j in range(n):
        for i in range(n):
            tris.append([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)])
            tris.append([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)])
    m = _hand_mesh(v, np.array(tris))
    q = quality(m)
    assert q["min_angle"] == pytest.approx(45.0, abs=1e-12)
    assert q["h_min"] == pytest.approx(0.25)
    assert q["h_max"] == pytest.approx(math.sqrt(2) / 4)


def _hand_mesh(v, t):
    # boundary data is irrelevant for quality(); use a single edge placeholder
    return Mesh(v, t, np.array([[0, 1]]), np.array([0]), np.array([[0.0, 1.0]]), 1.0)


def test_sliver_is_reported():
    v = np.array([[0, 0], [1, 0], [0.5, 0.02], [0.5, 1.0]])
    m = _hand_mesh(v, np.array([[0, 1, 2], [0, 2, 3]]))
    assert quality(m)["min_angle"] < 20.0


@pytest.mark.parametrize(
    "make",
    [
        lambda: trapezium(0.9),
        lambda: trapezium(0.2),
        lambda: triangle(175, 0.4),
        lambda: delta_quadrilateral(0.05),
        lambda: circular_cap(),
    ],
    ids=["trapezium-0.9", "trapezium-0.2", "triangle-175", "delta-quad", "cap"],
)
def test_family_meshes_meet_quality_floor(make):
    dom = make()
    b = dom.boundary
    h = SolverConfig(h0=0.5, h0_relative=True).mesh_size(b)
    m = generate(b, h, Grading((0, 1), 0.15, 3))
    assert_conforming(m, b)
    assert quality(m)["min_angle"] >= quality_floor(b) - 1e-9
    assert m.areas().sum() == pytest.approx(m.polygon_area(), rel=1e-12)


def positive_couplings(mesh):
    K, _ = assemble_global(mesh)
    d = K.diagonal()
    K = K.tocoo()
    off = K.row != K.col
    return int(np.sum(K.data[off] > 1e-12 * d.max()))


@settings(max_examples=15)
@given(st.floats(90, 178), st.floats(0.2, 0.8), st.sampled_from([0.05, 0.1, 0.2]), st.integers(-1, 2))
def test_stiffness_has_no_positive_coupling(angle, split, h, graded_corner):
    # no boundary edge faces an obtuse angle and interior edges are Delaunay
    b = triangle(angle, split).boundary
    g = Grading((graded_corner,)) if graded_corner >= 0 else None
    assert positive_couplings(generate(b, h, g)) == 0


def test_thin_triangle_ladder():
    # a 175 degree triangle is thinner than h everywhere: no interior points,
    # and every rung is perpendicular to the long side
    b = triangle(175, 0.4).boundary
    m = generate(b, 0.1)
    assert m.n_vertices == len(m.boundary_edges)
    ang = quality(m)
    assert ang["min_angle"] >= quality_floor(b)
    t = m.triangles
    v = m.vertices
    cos = []
    for k in range(3):
        u, w = v[t[:, (k + 1) % 3]] - v[t[:, k]], v[t[:, (k + 2) % 3]] - v[t[:, k]]
        cos.append((u * w).sum(1) / np.hypot(*u.T) / np.hypot(*w.T))
    assert np.min(cos) >= -1e-9  # no obtuse angle anywhere
    assert positive_couplings(m) == 0


def test_quality_floor_follows_sharpest_corner():
    b = triangle(175, 0.4).boundary
    assert quality_floor(b) == pytest.approx(0.5 * 2.0, rel=1e-12)
    assert quality_floor(DomainBoundary.polygon([(0, 0), (1, 0), (0, 1)])) == QUALITY_FLOOR_DEG


def test_deterministic(right_triangle):
    g = Grading((0, 2), 0.15, 3)
    a, b = generate(right_triangle, 0.1, g), generate(right_triangle, 0.1, g)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)


def test_refuses_oversized_h(unit_square):
    with pytest.raises(ValueError):
        generate(unit_square, 2.0)
    with pytest.raises(ValueError):
        generate(unit_square, -0.1)


def test_refuses_nonconvex():
    L = DomainBoundary.polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    with pytest.raises(ValueError):
        generate(L, 0.2)


def test_quality_error_type():
    assert issubclass(MeshQualityError, RuntimeError)


def test_grading_validation():
    with pytest.raises(ValueError):
        Grading((0,), 1.5, 3)
    with pytest.raises(ValueError):
        Grading((0,), 0.5, -1)


def test_write_read_roundtrip(tmp_path, unit_disk):
    m = generate(unit_disk, 0.3)
    p = tmp_path / "disk.txt"
    write_mesh(m, p)
    text = p.read_text()
    assert text.startswith("# zaremba mesh")
    assert f"nodes {m.n_vertices}" in text and f"elements {m.n_triangles}" in text
    r = read_mesh(p)
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.boundary_edges, m.boundary_edges)
    assert np.array_equal(r.boundary_arcs, m.boundary_arcs)
    assert np.array_equal(r.boundary_params, m.boundary_params)


def test_moved_mesh(unit_square):
    m = generate(unit_square, 0.25)
    mm = m.moved(rotation=0.7, shift=(1, -2), scale=3.0)
    assert mm.areas().sum() == pytest.approx(9.0, rel=1e-12)
    assert np.array_equal(mm.triangles, m.triangles)
