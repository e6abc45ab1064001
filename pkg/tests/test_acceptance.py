"""End-to-end acceptance checks.

Each test prints exactly one ``[acceptance N] PASS`` or ``FAIL`` line with the
measured numbers, then asserts.
"""
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy

from defectchains.chain import Chain
from defectchains.coeff import Z, Z2
from defectchains.field import (
    DEFAULT_CENTER, DEFAULT_PAIR, cored_vortex, defect_free, degree_n, disclination_half, smooth_noise, vortex,
    vortex_pair,
)
from defectchains.flatnorm import flat_norm, flat_norm_oracle
from defectchains.geomops import PLMap, intersect_chains, pushforward
from defectchains.lifting import lift_circle_field
from defectchains.mesh import Complex, build_grid_complex
from defectchains.reports import continuity_report, jacobian_integral_check, sample_ball
from defectchains.singular import singular_set
from defectchains.target import CIRCLE, RP2Q


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def cell_of(u, point):
    return int(u.locate([point])[0][0])


# 1 ---------------------------------------------------------------------------------

def test_vortex_detection(verdict):
    u = vortex(64)
    h = 2.0 / 64
    ys = sample_ball(np.random.default_rng(1), 200, 2, 0.5)
    t0 = time.perf_counter()
    hits = 0
    for i, y in enumerate(ys):
        S = singular_set(u, y=y, rng=i)
        ok = len(S.chain) == 1 and S.chain.coeffs.tolist() == [[1]]
        hits += ok and np.linalg.norm(S.locations()[0] - DEFAULT_CENTER) <= h * np.sqrt(2)
    elapsed = time.perf_counter() - t0
    ok = hits >= 198 and elapsed < 5.0
    verdict(1, ok, f"{hits}/200 single +1 points near x0 in {elapsed:.2f} s")
    assert ok


# 2 ---------------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_jacobian_formula(verdict, n):
    u = degree_n(n, 64)
    t0 = time.perf_counter()
    rep = jacobian_integral_check(u, 2000, seed=n)
    elapsed = time.perf_counter() - t0
    ok = rep.comparison == n and abs(rep.estimate - n) <= 0.02 * n and \
        abs(rep.estimate - n) <= 3 * rep.stderr + 1e-12 * n and elapsed < 30.0
    verdict(2, ok, f"n={n}: estimate {rep.estimate:.6f} +- {rep.stderr:.2g} in {elapsed:.1f} s")
    assert ok


# 3 ---------------------------------------------------------------------------------

def test_cycle_law_3d(verdict):
    rng = np.random.default_rng(3)
    failures = 0
    nonempty = 0
    for _ in range(100):
        u = smooth_noise((16, 16, 16), rng=rng)
        S = singular_set(u, y=rng.uniform(-0.3, 0.3, 2), backend="link", rng=rng)
        failures += not S.interior_boundary().is_zero()
        nonempty += not S.chain.is_zero()
    ok = failures == 0 and nonempty > 0
    verdict(3, ok, f"{failures} nonzero interior boundaries over 100 fields ({nonempty} nonempty chains)")
    assert ok


# 4 ---------------------------------------------------------------------------------

QUADRANTS = [lambda x, a=a, b=b: (a * x[:, 0] > 0) & (b * x[:, 1] > 0) for a in (-1, 1) for b in (-1, 1)]


@pytest.mark.parametrize("d,counts", [(2, 16), (3, 8)])
def test_backend_agreement(verdict, d, counts):
    rng = np.random.default_rng(40 + d)
    runs = agree = 0
    for _ in range(50):
        u = smooth_noise((counts,) * d, rng=rng)
        for _ in range(20):
            y = rng.uniform(-0.4, 0.4, 2)
            seed = int(rng.integers(2**31))
            a = singular_set(u, y=y, backend="link", rng=seed)
            b = singular_set(u, y=y, backend="preimage", rng=seed)
            runs += 1
            same = a.same_cells(b)
            if d == 2:
                same = same and all(a.chain.restrict(q).augmentation() == b.chain.restrict(q).augmentation()
                                    for q in QUADRANTS)
            agree += same
    ok = agree == runs
    verdict(4, ok, f"d={d}: {agree}/{runs} runs agree")
    assert ok


# 5 ---------------------------------------------------------------------------------

def _exact_complex(rng):
    kind = rng.integers(0, 4)
    half = lambda v: Fraction(int(v), 2)  # noqa: E731
    if kind == 0:
        k = int(rng.integers(1, 4))
        pts = [[Fraction(0), Fraction(0)]] + [[half(rng.integers(-4, 5)), half(rng.integers(-4, 5))]
                                              for _ in range(k + 1)]
        return Complex(np.array(pts, dtype=object), {2: [[0, i, i + 1] for i in range(1, k + 1)]}, exact=True)
    if kind == 1:
        pts = [[half(v) for v in rng.integers(-3, 4, 3)] for _ in range(4)]
        return Complex(np.array(pts, dtype=object), {3: [[0, 1, 2, 3]]}, exact=True)
    if kind == 2:
        spacing = (half(rng.integers(1, 5)), half(rng.integers(1, 5)))
        return build_grid_complex((0, 0), spacing, (1, int(rng.integers(1, 3))), exact=True)
    pts = [[half(v) for v in rng.integers(-3, 4, 2)] for _ in range(3)]
    return Complex(np.array(pts, dtype=object), {2: [[0, 1, 2]]}, exact=True)


def _random_small_chain(rng):
    while True:
        cx = _exact_complex(rng)
        if any(v == 0 for v in cx.volumes(cx.dim)):
            continue
        dims = [n for n in range(cx.dim) if cx.n_cells(n) + cx.n_cells(n + 1) <= 12]
        if dims:
            break
    n = int(rng.choice(dims))
    group = Z if rng.random() < 0.5 else Z2
    lo, hi = (-2, 3) if group == Z else (0, 2)
    return Chain.from_dense(cx, n, rng.integers(lo, hi, size=(cx.n_cells(n), 1)), group)


def test_flat_norm_oracle_and_axioms(verdict):
    rng = np.random.default_rng(5)
    mismatches = 0
    for _ in range(200):
        S = _random_small_chain(rng)
        if sympy.simplify(flat_norm(S).value - flat_norm_oracle(S, 2).value) != 0:
            mismatches += 1
    cx = build_grid_complex((0, 0), 0.5, (2, 2))
    violations = 0
    for _ in range(1000):
        n = int(rng.integers(0, 2))
        group = Z if rng.random() < 0.5 else Z2
        lo, hi = (-2, 3) if group == Z else (0, 2)
        mask = rng.random((cx.n_cells(n), 1)) < 0.4
        A = Chain.from_dense(cx, n, rng.integers(lo, hi, size=(cx.n_cells(n), 1)) * mask, group)
        B = Chain.from_dense(cx, n, rng.integers(lo, hi, size=(cx.n_cells(n), 1)) * mask, group)
        fa, fb, fab, fneg = (float(flat_norm(c).value) for c in (A, B, A + B, -A))
        violations += fab > fa + fb + 1e-9
        violations += abs(fneg - fa) > 1e-9
        violations += fa < 0 or (fa == 0) != A.is_zero()
        violations += fa > float(A.mass()) + 1e-9
    ok = mismatches == 0 and violations == 0
    verdict(5, ok, f"{mismatches} oracle mismatches over 200 chains, {violations} axiom violations over 1000 pairs")
    assert ok


# 6 ---------------------------------------------------------------------------------

def _segment(p, q, coeff=1, group=Z):
    cx = Complex(np.array([p, q], dtype=float), {1: [[0, 1]]})
    return Chain.from_cells(cx, 1, {0: coeff}, group)


def _connected_chain(rng, n, d, count):
    pts = rng.normal(size=(count + n + 1, d))
    simp = [list(range(i, i + n + 1)) for i in range(count)]
    return Chain.from_simplices(Complex(pts, {n: simp}), [(tuple(s), int(rng.choice([-1, 1, 2]))) for s in simp])


def test_intersection_convention(verdict):
    single = all(intersect_chains(_segment([-1, 0], [1, 0], g, grp), _segment([0, -1], [0, 1]),
                                  np.array([0.01, 0.02])).index == grp.element(g)
                 for grp, g in ((Z, 1), (Z, 3), (Z2, 1)))
    rng = np.random.default_rng(6)
    cases = [(2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]
    checked = failures = 0
    while checked < 100:
        d, n = cases[checked % len(cases)]
        S = _connected_chain(rng, n, d, 3)
        R = _connected_chain(rng, d - n + 1, d, 2)
        y = rng.normal(size=d) * 0.05
        a = intersect_chains(S, R.boundary(), y)
        b = intersect_chains(S.boundary(), R, y)
        if a.degenerate or b.degenerate:
            continue
        failures += a.index != ((-1) ** n) * b.index
        checked += 1
    ok = single and failures == 0
    verdict(6, ok, f"single crossing gives +g: {single}; identity fails on {failures}/100 pairs")
    assert ok


# 7 ---------------------------------------------------------------------------------

def test_pushforward_bound(verdict):
    rng = np.random.default_rng(7)
    worst_eq = 0.0
    cx = build_grid_complex((0, 0, 0), 0.5, (2, 2, 1))
    for n in (1, 2, 3):
        S = Chain.from_dense(cx, n, rng.integers(-2, 3, size=(cx.n_cells(n), 1)))
        lam = float(rng.uniform(0.3, 3.0))
        f = PLMap(cx, lam * cx.vertices + rng.normal(size=3))
        worst_eq = max(worst_eq, abs(float(pushforward(f, S).mass()) - lam ** n * float(S.mass())))
    violations = 0
    for i in range(100):
        n = 1 + i % 3
        f = PLMap(cx, rng.normal(size=(cx.n_cells(0), 3)))
        mask = rng.random((cx.n_cells(n), 1)) < 0.5
        S = Chain.from_dense(cx, n, rng.integers(-2, 3, size=(cx.n_cells(n), 1)) * mask)
        image = pushforward(f, S)
        mass = float(image.mass()) if not image.is_zero() else 0.0
        violations += mass > f.lipschitz() ** n * float(S.mass()) * (1 + 1e-12) + 1e-12
    ok = worst_eq <= 1e-12 and violations == 0
    verdict(7, ok, f"scaling equality error {worst_eq:.1e}; {violations}/100 inequality violations")
    assert ok


# 8 ---------------------------------------------------------------------------------

@pytest.mark.parametrize("name,factory,target", [
    ("vortex", lambda: vortex(64), CIRCLE), ("disclination", lambda: disclination_half(64), RP2Q),
])
def test_n_valued_stability(verdict, name, factory, target):
    u = factory()
    assert u.is_N_valued(target)
    ys = sample_ball(np.random.default_rng(8), 100, target.ambient_dim, 0.9 * target.delta0)
    ref = singular_set(u, target, ys[0], rng=0)
    changed = sum(not singular_set(u, target, y, rng=i).same_cells(ref) for i, y in enumerate(ys[1:], 1))
    ok = changed == 0 and not ref.chain.is_zero()
    verdict(8, ok, f"{name}: {changed}/99 draws differ from the first ({len(ref.chain)} cells)")
    assert ok


# 9 ---------------------------------------------------------------------------------

def test_continuity_decay(verdict):
    eps, counts = 0.2, 64
    u0 = cored_vortex(eps, counts)
    vals = []
    for delta in (0.2, 0.1, 0.05):
        u1 = cored_vortex(eps, counts, center=(DEFAULT_CENTER[0] + delta, DEFAULT_CENTER[1]))
        vals.append(continuity_report(u0, u1, 100, seed=9).flat_integral)
    ratios = [v / dl for v, dl in zip(vals, (0.2, 0.1, 0.05))]
    monotone = vals[0] > vals[1] > vals[2]
    spread = max(ratios) / min(ratios)
    ok = monotone and spread <= 3.0
    verdict(9, ok, f"integrals {[round(v, 4) for v in vals]}, ratio/delta spread {spread:.2f}")
    assert ok


# 10 --------------------------------------------------------------------------------

def test_lifting(verdict):
    u = vortex_pair(64)
    L = lift_circle_field(u)
    recon = float(np.abs(np.c_[np.cos(L.theta), np.sin(L.theta)] - u.values).max())
    edges = u.complex.cells[1]
    va, vb = u.values[edges[:, 0]], u.values[edges[:, 1]]
    wrapped = np.arctan2(va[:, 0] * vb[:, 1] - va[:, 1] * vb[:, 0], np.einsum("ij,ij->i", va, vb))
    excess = (L.theta[edges[:, 1]] - L.theta[edges[:, 0]] - wrapped) / (2 * np.pi)
    m = np.rint(excess)
    jump_err = float(np.abs(excess - m).max())
    jumps_match = {int(e): int(v) for e, v in enumerate(m) if v} == L.jumps
    ratio = L.variation["ratio"]
    free_ratio = lift_circle_field(defect_free(64)).variation["ratio"]
    ok = recon <= 1e-12 and jump_err <= 1e-9 and jumps_match and ratio <= 10 and free_ratio <= 1.01
    verdict(10, ok, f"reconstruction {recon:.1e}, jump residue {jump_err:.1e}, pair ratio {ratio:.3f}, "
                    f"defect-free ratio {free_ratio:.4f}")
    assert ok


# 11 --------------------------------------------------------------------------------

def test_rp2_disclination_pair(verdict):
    u = disclination_half(64)
    h = 2.0 / 64
    ys = sample_ball(np.random.default_rng(11), 100, RP2Q.ambient_dim, 0.9 * RP2Q.delta0)
    good = 0
    for i, y in enumerate(ys):
        S = singular_set(u, RP2Q, y, rng=i)
        locs = S.locations()
        ok = S.chain.group == Z2 and len(S.chain) == 2 and S.chain.coeffs.tolist() == [[1], [1]]
        if ok:
            # each seeded location is matched by a distinct detected point within one cell per axis
            d = np.abs(locs[:, None, :] - np.array(DEFAULT_PAIR)[None, :, :]).max(axis=2)
            ok = (d[0, 0] <= h and d[1, 1] <= h) or (d[0, 1] <= h and d[1, 0] <= h)
        good += ok
    ok = good == 100
    verdict(11, ok, f"{good}/100 draws give two Z/2 points at the seeded locations")
    assert ok
