import numpy as np
import pytest
import sympy

from defectchains.mesh import (
    Complex, DualComplex, GridSpec, MeshError, build_grid_complex, complex_from_json,
    permutation_parity,
)


def test_single_square_counts():
    c = build_grid_complex((0, 0), (1, 1), (1, 1))
    assert [c.n_cells(j) for j in range(3)] == [4, 5, 2]


def test_two_by_two_counts():
    c = build_grid_complex((0, 0), (1, 1), (2, 2))
    assert c.n_cells(0) == 9 and c.n_cells(2) == 8


def test_unit_cube_volume():
    c = build_grid_complex((0, 0, 0), (1, 1, 1), (1, 1, 1))
    assert c.n_cells(3) == 6
    assert np.isclose(c.volumes(3).sum(), 1.0, rtol=1e-12)


@pytest.mark.parametrize("counts", [(3, 2), (4, 4), (2, 3, 2), (3, 3, 3)])
def test_count_formulas_and_positive_orientation(counts):
    h = tuple(0.5 + 0.1 * i for i in range(len(counts)))
    c = build_grid_complex(tuple(0.0 for _ in counts), h, counts)
    d = len(counts)
    assert c.n_cells(d) == (2 if d == 2 else 6) * int(np.prod(counts))
    box = np.prod([hh * n for hh, n in zip(h, counts)])
    assert np.isclose(c.volumes(d).sum(), box, rtol=1e-12)
    pts = c.cell_points(d)
    dets = np.linalg.det(pts[:, 1:] - pts[:, :1])
    assert np.all(dets > 0)
    assert np.all(c.volumes(d) > 0)


@pytest.mark.parametrize("counts", [(3, 2), (2, 2, 2)])
def test_boundary_squared_zero(counts):
    c = build_grid_complex(tuple(0.0 for _ in counts), 1.0, counts)
    for j in range(2, c.dim + 1):
        prod = c.boundary_matrix(j - 1) @ c.boundary_matrix(j)
        assert prod.count_nonzero() == 0


def test_edge_incidence():
    c = build_grid_complex((0, 0), (1, 1), (1, 1))
    eid, s = c.find_cell((0, 1))
    assert s == 1
    assert c.boundary_incidence(1, eid) == [(1, 1), (0, -1)]


def test_triangle_incidence_signs():
    c = Complex(np.array([[0, 0], [1, 0], [0, 1]]), {2: [[0, 1, 2]]})
    inc = c.boundary_incidence(2, 0)
    faces = [tuple(c.cells[1][f]) for f, _ in inc]
    assert faces == [(1, 2), (0, 2), (0, 1)]
    assert [s for _, s in inc] == [1, -1, 1]


def test_incidence_composition_tetrahedron():
    c = Complex(np.eye(4)[:, :3], {3: [[0, 1, 2, 3]]})
    net = {}
    for f, s in c.boundary_incidence(3, 0):
        for e, t in c.boundary_incidence(2, f):
            net[e] = net.get(e, 0) + s * t
    assert all(v == 0 for v in net.values())


def test_incidence_errors():
    c = build_grid_complex((0, 0), (1, 1), (1, 1))
    with pytest.raises(MeshError):
        c.boundary_incidence(0, 0)
    with pytest.raises(MeshError):
        c.boundary_incidence(1, 99)


def test_bad_spacing():
    with pytest.raises(MeshError):
        build_grid_complex((0, 0), (0, 1), (1, 1))
    with pytest.raises(MeshError):
        build_grid_complex((0, 0), (1, 1), (0, 1))


def test_exact_mode_volumes():
    c = build_grid_complex((0, 0, 0), ("1/3", "1/3", "1/3"), (3, 3, 3), exact=True)
    total = sum(c.volumes(3))
    assert sympy.nsimplify(total) == 1
    tri = sum(c.volumes(2)[c.boundary_cells(2)])
    assert sympy.simplify(tri - 6) == 0


@pytest.mark.parametrize("counts", [(3, 4), (2, 3, 2)])
def test_dual_complex(counts):
    c = build_grid_complex(tuple(-1.0 for _ in counts), 0.5, counts)
    dual = DualComplex(c)
    d = c.dim
    # dual volumes of top cells partition the domain
    box = np.prod([0.5 * n for n in counts])
    assert np.isclose(dual.volumes(d).sum(), box)
    for j in range(2, d + 1):
        assert (dual.boundary_matrix(j - 1) @ dual.boundary_matrix(j)).count_nonzero() == 0
    # every dual j-cell has exactly one primal partner of complementary dimension
    for j in range(d + 1):
        assert dual.n_cells(j) == c.n_cells(d - j)
        assert np.all(dual.volumes(j) > 0)
    # interior dual 1-cells join two top cells, boundary ones only one
    bd1 = abs(dual.boundary_matrix(1)).sum(axis=0).A1
    assert np.all(bd1[dual.interior(1)] == 2)
    assert np.all(bd1[~dual.interior(1)] == 1)


def test_dual_edge_polyline_orientation_2d():
    c = build_grid_complex((0, 0), 1.0, (2, 2))
    dual = DualComplex(c)
    # primal edge from (0,0)->(1,0) along +x: dual edge then primal frame positive
    eid, s = c.find_cell((0, 3))
    assert s == 1
    line = dual.polyline(eid)
    direction = line[-1] - line[0]
    tangent = c.vertices[3] - c.vertices[0]
    assert np.linalg.det(np.array([direction, tangent])) > 0


def test_permutation_parity():
    assert permutation_parity(np.array([[0, 1, 2], [1, 0, 2], [2, 0, 1]])).tolist() == [0, 1, 0]


def test_json_roundtrip():
    c = build_grid_complex((0, 0), (0.5, 0.25), (2, 3))
    c2 = complex_from_json(c.to_json())
    assert np.array_equal(c.cells[2], c2.cells[2])
    s = Complex(np.array([[0.0, 0], [1, 0], [0, 1]]), {2: [[0, 1, 2]]})
    s2 = complex_from_json(s.to_json())
    assert np.array_equal(s.cells[1], s2.cells[1])
    d2 = complex_from_json(DualComplex(c).to_json())
    assert d2.n_cells(0) == c.n_cells(2)
    assert GridSpec.from_json(c.grid.to_json()) == GridSpec((0.0, 0.0), (0.5, 0.25), (2, 3))
