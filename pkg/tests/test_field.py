import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from defectchains.field import (
    FieldError, SampledField, constant, cored_vortex, defect_free, degree_n, disclination_half, grid_complex,
    line_defect_3d, make_grid, preset, smooth_noise, unit_disk_ball_volume, vortex, vortex_pair, vortex_ring,
)
from defectchains.target import CIRCLE, RP2Q


def linear_field(grid, A, b):
    return SampledField.from_function(grid, lambda x: x @ A.T + b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]))
def test_pl_reproduces_affine_maps(seed, d):
    rng = np.random.default_rng(seed)
    grid = make_grid(tuple(rng.integers(1, 5, size=d)), -1.0, rng.uniform(0.5, 2.0))
    A = rng.normal(size=(3, d))
    b = rng.normal(size=3)
    u = linear_field(grid, A, b)
    pts = rng.uniform(grid.lower, grid.upper, size=(50, d))
    assert np.allclose(u.evaluate(pts), pts @ A.T + b, atol=1e-12)
    assert np.allclose(u.gradients(), A, atol=1e-12)
    box = np.prod(grid.upper - grid.lower)
    assert u.total_variation() == pytest.approx(np.linalg.norm(A) * box, rel=1e-12)


def test_locate_returns_barycentric_weights():
    grid = make_grid((3, 4, 2))
    u = constant((3, 4, 2), [1.0, 0.0])
    u = SampledField(grid, u.values)
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, size=(100, 3))
    top, w = u.locate(pts)
    X = grid_complex(grid).vertices[grid_complex(grid).cells[3][top]]
    assert np.all(w >= -1e-12)
    assert np.allclose(w.sum(axis=1), 1.0)
    assert np.allclose(np.einsum("nk,nkd->nd", w, X), pts)


def test_evaluate_at_vertices_returns_samples():
    u = vortex(8)
    xs = u.grid.vertex_coords()
    assert np.allclose(u.evaluate(xs), u.values, atol=1e-14)


def test_locate_rejects_points_outside():
    with pytest.raises(FieldError):
        vortex(4).locate([[2.0, 0.0]])


def test_count_mismatch_and_nan():
    grid = make_grid((2, 2))
    with pytest.raises(FieldError, match="expected 9"):
        SampledField(grid, np.zeros((8, 2)))
    bad = np.zeros((9, 2))
    bad[3, 0] = np.nan
    with pytest.raises(FieldError):
        SampledField(grid, bad)


def test_fields_on_equal_grids_share_one_complex():
    assert vortex(16).complex is vortex_pair(16).complex
    assert vortex(16).dual is degree_n(2, 16).dual


def test_lambda_and_scaling():
    u = vortex(8)
    assert u.Lambda == pytest.approx(1.0)
    assert u.scaled(3.0).Lambda == pytest.approx(3.0)


def test_reflection_is_an_involution():
    u = smooth_noise((6, 6), rng=1)
    r = u.reflected()
    assert np.array_equal(r.reflected().values, u.values)
    assert np.allclose(r.evaluate([[0.3, -0.2]]), u.evaluate([[-0.3, 0.2]]))


@pytest.mark.parametrize("factory,target", [
    (lambda: vortex(16), CIRCLE), (lambda: degree_n(3, 16), CIRCLE), (lambda: vortex_pair(16), CIRCLE),
    (lambda: disclination_half(16), RP2Q), (lambda: line_defect_3d(6), CIRCLE), (lambda: vortex_ring(6), CIRCLE),
    (lambda: defect_free(16), CIRCLE),
])
def test_presets_are_n_valued(factory, target):
    u = factory()
    assert u.is_N_valued(target)
    assert u.target == target.name


def test_cored_vortex_is_not_n_valued():
    assert not cored_vortex(0.2, 16).is_N_valued(CIRCLE)


def test_preset_registry():
    assert preset("vortex", counts=8).grid.counts == (8, 8)
    assert preset("noise").grid.counts == (32, 32)
    with pytest.raises(FieldError):
        preset("nope")


def test_noise_is_seeded():
    a = smooth_noise((8, 8, 8), rng=5)
    b = smooth_noise((8, 8, 8), rng=5)
    assert np.array_equal(a.values, b.values)
    assert np.abs(a.values).max() == pytest.approx(1.0)


@pytest.mark.parametrize("k,vol", [(1, 2.0), (2, np.pi), (3, 4 * np.pi / 3)])
def test_ball_volume(k, vol):
    assert unit_disk_ball_volume(k) == pytest.approx(vol)
