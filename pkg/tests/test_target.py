import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from defectchains.coeff import Z, Z2
from defectchains.target import (
    CIRCLE, RP2Q, RP2_DELTA0, SPHERE3, DegenerateInputError, RefineNeeded, _compute_rp2_delta0,
    director_to_q, get_target, q_to_matrix,
)


def circle_loop(n, winding=1, radius=1.0, center=(0.0, 0.0)):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.c_[center[0] + radius * np.cos(winding * th), center[1] + radius * np.sin(winding * th)]


def half_turn_directors(n, turns=1):
    th = np.linspace(0, 2 * np.pi * turns, n, endpoint=False)
    return np.c_[np.cos(th / 2), np.sin(th / 2), np.zeros(n)]


# -- worked examples ---------------------------------------------------------------

def test_circle_retract_example():
    assert np.allclose(CIRCLE.retract(np.array([3.0, 4.0])), [0.6, 0.8], atol=1e-15)


def test_circle_retract_fixes_points_on_circle():
    z = circle_loop(7)
    assert np.allclose(CIRCLE.retract(z), z, atol=1e-15)


def test_rp2_retract_scaled_tensor():
    q = director_to_q([0, 0, 1])
    assert np.allclose(RP2Q.retract(2 * q), q, atol=1e-12)


def test_circle_classify_16_points():
    assert CIRCLE.classify_loop(circle_loop(16)) == Z.element(1)


def test_rp2_classify_half_turn():
    assert RP2Q.classify_loop(director_to_q(half_turn_directors(32))) == Z2.element(1)


@pytest.mark.parametrize("target,point", [(CIRCLE, [1.0, 0.0]), (RP2Q, director_to_q([0.3, 0.1, 1.0]))])
def test_constant_loop_is_trivial(target, point):
    assert target.classify_loop(np.tile(point, (10, 1))) == target.group.zero()


def test_dist_examples():
    assert CIRCLE.dist_to_X(np.array([0.3, 0.4])) == pytest.approx(0.5, abs=1e-15)
    assert SPHERE3.dist_to_X(np.array([0.0, 0.6, 0.8])) == pytest.approx(1.0)
    assert RP2Q.dist_to_X(np.zeros(5)) == pytest.approx(0.0, abs=1e-15)


def test_rp2_delta0_regression():
    assert _compute_rp2_delta0() == pytest.approx(RP2_DELTA0, abs=1e-12)
    assert RP2_DELTA0 == pytest.approx(math.sqrt(3) / 2, abs=1e-15)


def test_rp2_dist_matches_nearest_tie():
    # explicit tie point: average the two leading eigenvalues
    rng = np.random.default_rng(3)
    z = rng.normal(size=5)
    w, v = np.linalg.eigh(q_to_matrix(z))
    w2 = w.copy()
    w2[1] = w2[2] = 0.5 * (w[1] + w[2])
    tie = (v * w2) @ v.T
    assert np.linalg.norm(q_to_matrix(z) - tie) == pytest.approx(RP2Q.dist_to_X(z), rel=1e-12)


def test_degenerate_inputs_raise():
    with pytest.raises(DegenerateInputError):
        CIRCLE.retract(np.array([1e-12, 0.0]))
    with pytest.raises(DegenerateInputError):
        RP2Q.retract(np.zeros(5))


def test_refine_needed_carries_segment():
    with pytest.raises(RefineNeeded) as info:
        CIRCLE.classify_loop(circle_loop(3))
    assert len(info.value.segment) == 2


def test_rp2_refine_needed_on_orthogonal_jump():
    n = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 0, 0]])
    with pytest.raises(RefineNeeded):
        RP2Q.classify_loop(director_to_q(n))


def test_registry_lookup():
    assert get_target("CIRCLE") is CIRCLE
    assert get_target("rp2q").group == Z2
    with pytest.raises(ValueError):
        get_target("torus")


# -- properties --------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_retraction_idempotent(seed):
    rng = np.random.default_rng(seed)
    for t in (CIRCLE, SPHERE3, RP2Q):
        z = rng.normal(size=(20, t.ambient_dim))
        r = t.retract(z)
        assert np.allclose(t.retract(r), r, atol=1e-12)
        assert np.all(t.on_N(r, tol=1e-12))


@pytest.mark.parametrize("winding", [-2, -1, 0, 1, 3])
def test_circle_rotation_reversal_refinement(winding):
    loop = circle_loop(40, winding)
    base = CIRCLE.classify_loop(loop)
    assert base == Z.element(winding)
    assert CIRCLE.classify_loop(np.roll(loop, 7, axis=0)) == base
    assert CIRCLE.classify_loop(loop[::-1]) == -base
    fine = circle_loop(160, winding)
    assert CIRCLE.classify_loop(fine) == base


@pytest.mark.parametrize("turns", [1, 2, 3])
def test_rp2_rotation_reversal_refinement(turns):
    loop = director_to_q(half_turn_directors(48 * turns, turns))
    base = RP2Q.classify_loop(loop)
    assert base == Z2.element(turns % 2)
    assert RP2Q.classify_loop(np.roll(loop, 5, axis=0)) == base
    assert RP2Q.classify_loop(loop[::-1]) == base
    assert RP2Q.classify_loop(director_to_q(half_turn_directors(192 * turns, turns))) == base


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_perturbation_below_delta0_keeps_class(seed):
    rng = np.random.default_rng(seed)
    for t, loop in ((CIRCLE, circle_loop(64, 1)), (RP2Q, director_to_q(half_turn_directors(64)))):
        base = t.classify_loop(loop)
        v = rng.normal(size=loop.shape)
        v *= (0.4 * t.delta0 * rng.uniform(0, 1, size=(len(loop), 1))) / np.linalg.norm(v, axis=1, keepdims=True)
        assert t.classify_loop(t.retract(loop + v)) == base


@pytest.mark.parametrize("scale", [0.5, 1.0, 4.0])
def test_retraction_gradient_blows_up_like_inverse_distance(scale):
    # finite-difference |D rho| along random rays stays below 2 / dist
    rng = np.random.default_rng(11)
    for t in (CIRCLE, RP2Q):
        z = scale * rng.normal(size=(50, t.ambient_dim))
        h = 1e-6
        for _ in range(3):
            e = rng.normal(size=z.shape)
            e /= np.linalg.norm(e, axis=1, keepdims=True)
            fd = np.linalg.norm(t.retract(z + h * e) - t.retract(z - h * e), axis=1) / (2 * h)
            # the RP2Q retraction has Lipschitz constant sqrt(3)/dist in this normalization
            assert np.all(fd <= 2.0 / t.dist_to_X(z))


# -- transports --------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["pl", "geodesic"])
@pytest.mark.parametrize("winding", [-1, 1, 2])
def test_circle_transports_sum_to_winding(mode, winding):
    loop = circle_loop(24, winding)
    rng = np.random.default_rng(winding + 5)
    for _ in range(5):
        y = rng.uniform(-0.5, 0.5, size=2)
        vals, deg = CIRCLE.edge_transports(loop, np.roll(loop, -1, axis=0), y, mode)
        assert not deg.any()
        shifted = CIRCLE.loop_class(vals.sum())[0, 0]
        if mode == "geodesic":
            # the circle itself is traversed, so |y| < 1 never changes the class
            assert shifted == winding
        else:
            assert shifted == CIRCLE.classify_loop(loop - y).coords[0]


@pytest.mark.parametrize("mode", ["pl", "geodesic"])
@pytest.mark.parametrize("turns", [1, 2])
def test_rp2_transports_match_classify(mode, turns):
    q = director_to_q(half_turn_directors(16 * turns, turns))
    rng = np.random.default_rng(turns)
    for _ in range(5):
        y = rng.normal(size=5)
        y *= 0.8 * RP2_DELTA0 * rng.uniform() / np.linalg.norm(y)
        bits, deg = RP2Q.edge_transports(q, np.roll(q, -1, axis=0), y, mode)
        assert not deg.any()
        assert RP2Q.loop_class(bits.sum())[0, 0] == turns % 2


def test_rp2_transports_are_cocycle_on_triangle():
    # transports around a contractible triangle of generic Q-values sum to 0 mod 2 whenever
    # the PL triangle avoids X; check against a fine classification of its boundary
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(60):
        tri = rng.normal(size=(3, 5))
        bits, deg = RP2Q.edge_transports(tri, np.roll(tri, -1, axis=0), np.zeros(5), "pl")
        if deg.any():
            continue
        t = np.linspace(0, 1, 400, endpoint=False)[:, None]
        boundary = np.concatenate([tri[i] + t * (tri[(i + 1) % 3] - tri[i]) for i in range(3)])
        try:
            fine = RP2Q.classify_loop(boundary)
        except RefineNeeded:
            continue
        assert RP2Q.loop_class(bits.sum())[0, 0] == fine.coords[0]
        checked += 1
    assert checked > 30
