import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from defectchains.chain import Chain, ChainError
from defectchains.coeff import CoefficientGroup, GroupError, Z, Z2
from defectchains.mesh import build_grid_complex

ZxZ2 = CoefficientGroup(1, (2,))
SQ = build_grid_complex((0, 0), (1, 1), (1, 1))
G21 = build_grid_complex((0, 0), (1, 1), (2, 1))
CUBE = build_grid_complex((0, 0, 0), (1, 1, 1), (2, 1, 1))


def test_triangle_boundary_over_z():
    tri = Chain.from_cells(SQ, 2, {0: 1})
    bd = tri.boundary()
    assert len(bd) == 3
    verts = SQ.cells[2][0]
    expected = Chain.from_simplices(SQ, [((verts[1], verts[2]), 1), ((verts[0], verts[2]), -1),
                                         ((verts[0], verts[1]), 1)])
    assert bd == expected
    assert bd.boundary().is_zero()


def test_z2_shared_edge_cancels():
    both = Chain.from_cells(SQ, 2, {0: 1, 1: 1}, Z2)
    bd = both.boundary()
    assert len(bd) == 4
    pts = SQ.centroids(1)[bd.ids]
    # the diagonal (centroid at the middle) is gone
    assert not np.any(np.all(np.isclose(pts, 0.5), axis=1))


def test_dimension_zero_boundary_raises():
    with pytest.raises(ChainError):
        Chain.from_cells(SQ, 0, {0: 1}).boundary()


def test_mass_examples():
    assert Chain.zero(SQ, 1).mass() == 0
    eid, _ = SQ.find_cell((0, 1))
    assert Chain.from_cells(SQ, 1, {eid: 1}).mass() == pytest.approx(1.0)
    pair = Chain.from_cells(SQ, 2, {0: (1, 1), 1: (1, 1)}, ZxZ2)
    assert pair.mass() == pytest.approx(2.0)


def test_restrict_half_plane():
    # boundary of the 2x1 box: pick the two right-hand edges
    full = Chain.from_cells(G21, 2, {i: 1 for i in range(G21.n_cells(2))})
    loop = full.boundary()
    right = loop.restrict(lambda c: c[:, 0] > 1.0)
    assert len(right) == 3  # bottom-right, right side, top-right
    cents = G21.centroids(1)[right.ids]
    assert np.all(cents[:, 0] > 1.0)
    assert loop.restrict(None) == loop
    assert loop.restrict(np.zeros(G21.n_cells(1), dtype=bool)).is_zero()
    assert (right.mass() + loop.restrict(lambda c: c[:, 0] <= 1.0).mass()) == pytest.approx(loop.mass())


def test_augmentation():
    g = ZxZ2.element(2, 1)
    h = ZxZ2.element(-5, 1)
    pts = Chain.from_cells(SQ, 0, {0: g, 3: h}, ZxZ2)
    assert pts.augmentation() == g + h
    with pytest.raises(ChainError):
        Chain.from_cells(SQ, 1, {0: 1}).augmentation()


def test_support_examples():
    assert Chain.zero(SQ, 1).support() == {1: set(), 0: set()}
    eid, _ = SQ.find_cell((0, 1))
    sup = Chain.from_cells(SQ, 1, {eid: 1}).support()
    assert sup[1] == {eid} and sup[0] == {0, 1}
    both = Chain.from_cells(SQ, 2, {0: 1, 1: 1}, Z2).support()
    assert both[2] == {0, 1} and len(both[1]) == 5 and len(both[0]) == 4


def test_orientation_alignment():
    a = Chain.from_simplices(SQ, [((0, 1), 1)])
    b = Chain.from_simplices(SQ, [((1, 0), -1)])
    assert a == b


def test_mismatches():
    a = Chain.from_cells(SQ, 1, {0: 1})
    with pytest.raises(GroupError):
        a + Chain.from_cells(SQ, 1, {0: 1}, Z2)
    with pytest.raises(ChainError):
        a + Chain.from_cells(SQ, 2, {0: 1})
    with pytest.raises(ChainError):
        Chain.from_cells(SQ, 1, {99: 1})


def test_json_roundtrip():
    c = Chain.from_cells(CUBE, 2, {0: (3, 1), 5: (-1, 0)}, ZxZ2)
    assert Chain.from_json(c.to_json(), CUBE) == c
    assert c.to_json()["cells"][0] == [0, [3, 1]]


GROUPS = [Z, Z2, ZxZ2, CoefficientGroup(0, (3,))]


@st.composite
def chains(draw, dim=None, group=None):
    cx = CUBE
    dim = draw(st.integers(0, 3)) if dim is None else dim
    group = draw(st.sampled_from(GROUPS)) if group is None else group
    n = cx.n_cells(dim)
    ids = draw(st.lists(st.integers(0, n - 1), max_size=8))
    coeffs = [[draw(st.integers(-3, 3)) for _ in range(group.rank)] for _ in ids]
    return Chain(cx, dim, group, ids, np.array(coeffs, dtype=np.int64).reshape(len(ids), group.rank))


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_chain_group_and_mass_axioms(data):
    dim = data.draw(st.integers(0, 3))
    grp = data.draw(st.sampled_from(GROUPS))
    s = data.draw(chains(dim, grp))
    t = data.draw(chains(dim, grp))
    assert s + t == t + s
    assert (s - s).is_zero()
    assert (s.mass() == 0) == s.is_zero()
    assert (-s).mass() == pytest.approx(s.mass())
    assert (s + t).mass() <= s.mass() + t.mass() + 1e-12
    if dim >= 1:
        assert (s + t).boundary() == s.boundary() + t.boundary()
    if dim >= 2:
        assert s.boundary().boundary().is_zero()
    if dim == 1:
        assert not s.boundary().augmentation()
    if dim == 0:
        assert (s + t).augmentation() == s.augmentation() + t.augmentation()


@settings(max_examples=80, deadline=None)
@given(chains(), st.floats(0.0, 2.0))
def test_restriction_laws(s, cut):
    left = s.restrict(lambda c: c[:, 0] < cut)
    right = s.restrict(lambda c: c[:, 0] >= cut)
    assert left.restrict(lambda c: c[:, 0] < cut) == left
    assert left + right == s
    assert left.mass() + right.mass() == pytest.approx(s.mass())
