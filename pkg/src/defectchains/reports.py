"""Monte-Carlo verifiers over offsets ``y``: Jacobian formula, mass, continuity, stability, projection.

Every estimate integrates over a ball ``B_R`` in ``R^m`` with uniform samples and
carries a sample standard error. Per-sample seeds come from one
``SeedSequence`` so results do not depend on the thread count, and the
reduction runs in sample order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .field import SampledField, unit_disk_ball_volume
from .flatnorm import flat_norm, flat_norm_graph
from .singular import SingularChain, _resolve_target, singular_set
from .target import RefineNeeded, TargetManifold


@dataclass
class MonteCarloEstimate:
    estimate: float
    stderr: float
    samples: int

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.estimate - value) <= sigmas * self.stderr + 1e-12 * max(1.0, abs(value))


def sample_ball(rng, n: int, m: int, radius: float) -> np.ndarray:
    """``n`` uniform points in the ``m``-ball of the given radius."""
    v = rng.normal(size=(n, m))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * radius * rng.uniform(size=(n, 1)) ** (1.0 / m)


def _offsets(seed, n: int, m: int, radius: float) -> tuple[np.ndarray, list]:
    ss = np.random.SeedSequence(seed)
    ys = sample_ball(np.random.default_rng(ss.spawn(1)[0]), n, m, radius)
    return ys, ss.spawn(n)


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _integral(values: np.ndarray, volume: float, scale: float = 1.0) -> MonteCarloEstimate:
    values = np.asarray(values, dtype=float)
    n = len(values)
    mean = float(values.mean()) if n else 0.0
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    return MonteCarloEstimate(volume * mean / scale, volume * sd / math.sqrt(max(n, 1)) / scale, n)


def sampling_radius(u: SampledField, t: TargetManifold) -> float:
    """``Lambda + sup|X|``: outside this ball ``u - y`` never meets ``X`` so ``S_y(u)`` is empty."""
    return u.Lambda + t.x_radius


# -- boundary degree oracles -------------------------------------------------------

def boundary_degree(u: SampledField) -> int:
    """Degree of ``u/|u|`` on the boundary of the box, from the PL boundary values."""
    cx = u.complex
    d = u.dim
    if d == 2:
        B = cx.boundary_matrix(2)
        faces = cx.boundary_faces()
        # boundary edges oriented by their incident triangle
        sign = np.asarray(B[faces].sum(axis=1)).ravel()
        e = cx.cells[1][faces]
        a, b = u.values[e[:, 0]], u.values[e[:, 1]]
        if np.any(np.linalg.norm(a, axis=1) == 0) or np.any(np.linalg.norm(b, axis=1) == 0):
            raise ValueError("field vanishes on the boundary")
        ang = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], np.einsum("ij,ij->i", a, b))
        return int(round(float(np.dot(sign, ang)) / (2 * np.pi)))
    if d == 3:
        B = cx.boundary_matrix(3)
        faces = cx.boundary_faces()
        sign = np.asarray(B[faces].sum(axis=1)).ravel()
        tri = u.values[cx.cells[2][faces]]
        # signed solid angle of each image triangle (Van Oosterom and Strackee)
        r = np.linalg.norm(tri, axis=2)
        num = np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2]))
        den = (r[:, 0] * r[:, 1] * r[:, 2] + np.einsum("ij,ij->i", tri[:, 0], tri[:, 1]) * r[:, 2]
               + np.einsum("ij,ij->i", tri[:, 0], tri[:, 2]) * r[:, 1]
               + np.einsum("ij,ij->i", tri[:, 1], tri[:, 2]) * r[:, 0])
        omega = 2 * np.arctan2(num, den)
        return int(round(float(np.dot(sign, omega)) / (4 * np.pi)))
    raise ValueError("boundary degree needs d in {2, 3}")


# -- reports -----------------------------------------------------------------------

@dataclass
class JacobianReport:
    estimate: float
    stderr: float
    samples: int
    comparison: int
    radius: float
    resamples: int

    @property
    def relative_error(self) -> float:
        return abs(self.estimate - self.comparison) / max(abs(self.comparison), 1e-300)

    def to_json(self) -> dict:
        return asdict(self)


def jacobian_integral_check(u: SampledField, samples: int = 2000, *, t=None, seed=0, threads: int = 1,
                            interpolation: str = "auto", radius: float | None = None) -> JacobianReport:
    """Estimate ``(1/omega_k) int chi(S_y(u)) dy`` and compare it with the boundary degree."""
    t = _resolve_target(u, t)
    if not t.is_sphere or u.dim != t.k:
        raise ValueError("the Jacobian check needs a sphere target with d = k")
    R = sampling_radius(u, t) if radius is None else float(radius)
    ys, seeds = _offsets(seed, samples, t.ambient_dim, R)

    def one(i):
        S = singular_set(u, t, ys[i], interpolation=interpolation, rng=seeds[i])
        return S.augmentation().coords[0], S.resamples

    out = _map(one, range(samples), threads)
    chis = np.array([c for c, _ in out], dtype=float)
    est = _integral(chis, unit_disk_ball_volume(t.ambient_dim) * R ** t.ambient_dim, unit_disk_ball_volume(t.k))
    return JacobianReport(est.estimate, est.stderr, samples, boundary_degree(u), R, int(sum(r for _, r in out)))


@dataclass
class MassReport:
    integral: float
    stderr: float
    sobolev: float
    ratio: float
    scaled_integral: float
    monotone_in_scale: bool
    samples: int

    def to_json(self) -> dict:
        return asdict(self)


def _mass_integral(u, t, samples, seed, threads, R):
    ys, seeds = _offsets(seed, samples, t.ambient_dim, R)

    def one(i):
        return float(singular_set(u, t, ys[i], rng=seeds[i]).chain.mass())

    masses = _map(one, range(samples), threads)
    return _integral(masses, unit_disk_ball_volume(t.ambient_dim) * R ** t.ambient_dim)


def mass_coarea_report(u: SampledField, samples: int = 400, *, t=None, seed=0, threads: int = 1,
                       scale: float = 2.0) -> MassReport:
    """``int M(S_y(u)) dy`` against ``||grad u||_k^k``, plus the same integral for ``scale * u``."""
    t = _resolve_target(u, t)
    R = sampling_radius(u, t)
    est = _mass_integral(u, t, samples, seed, threads, R)
    sob = u.sobolev(t.k)
    us = u.scaled(scale)
    scaled = _mass_integral(us, t, samples, seed, threads, sampling_radius(us, t))
    ratio = est.estimate / sob if sob > 0 else 0.0
    mono = scaled.estimate + 3 * scaled.stderr >= est.estimate - 3 * est.stderr if scale >= 1 else True
    return MassReport(est.estimate, est.stderr, sob, ratio, scaled.estimate, bool(mono), samples)


@dataclass
class ContinuityReport:
    flat_integral: float
    stderr: float
    rhs: float
    ratio: float
    samples: int

    def to_json(self) -> dict:
        return asdict(self)


def continuity_rhs(u0: SampledField, u1: SampledField, k: int) -> float:
    """``int |u1 - u0| (|grad u1|^{k-1} + |grad u0|^{k-1}) dx`` with vertex-averaged ``|u1 - u0|``."""
    cx = u0.complex
    d = u0.dim
    diff = np.linalg.norm(u1.values - u0.values, axis=1)[cx.cells[d]].mean(axis=1)
    g0 = np.linalg.norm(u0.gradients(), axis=(1, 2)) ** (k - 1)
    g1 = np.linalg.norm(u1.gradients(), axis=(1, 2)) ** (k - 1)
    return float(np.dot(cx.float_volumes(d), diff * (g0 + g1)))


def continuity_report(u0: SampledField, u1: SampledField, samples: int = 100, *, t=None, seed=0,
                      threads: int = 1) -> ContinuityReport:
    """``int F_Omega(S_y(u1) - S_y(u0)) dy`` with a common ``y`` per sample, against the right-hand side."""
    if u0.grid != u1.grid:
        raise ValueError("fields must share a grid")
    t = _resolve_target(u0, t)
    R = max(sampling_radius(u0, t), sampling_radius(u1, t))
    ys, seeds = _offsets(seed, samples, t.ambient_dim, R)
    cache: dict = {}

    def one(i):
        S0 = singular_set(u0, t, ys[i], rng=seeds[i])
        S1 = singular_set(u1, t, ys[i], rng=seeds[i])
        D = S1.chain - S0.chain
        if D.is_zero():
            return 0.0
        key = (D.ids.tobytes(), D.coeffs.tobytes())
        if key not in cache:
            graph = D.dim == 0 and D.group.rank == 1 and not D.group.torsion_orders
            cache[key] = flat_norm_graph(D) if graph else float(flat_norm(D).value)
        return cache[key]

    vals = _map(one, range(samples), threads)
    est = _integral(vals, unit_disk_ball_volume(t.ambient_dim) * R ** t.ambient_dim)
    rhs = continuity_rhs(u0, u1, t.k)
    return ContinuityReport(est.estimate, est.stderr, rhs, est.estimate / rhs if rhs > 0 else 0.0, samples)


@dataclass
class StabilityReport:
    stable: bool
    samples: int
    n_cells: int
    mismatches: list = field(default_factory=list)
    direct_checked: int = 0
    direct_mismatches: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def _refine_loop(t: TargetManifold, pts: np.ndarray, depth: int = 6):
    for _ in range(depth):
        try:
            return t.classify_loop(pts)
        except RefineNeeded:
            mid = t.retract(0.5 * (pts + np.roll(pts, -1, axis=0)))
            out = np.empty((2 * len(pts), pts.shape[1]))
            out[0::2], out[1::2] = pts, mid
            pts = out
    return t.classify_loop(pts)


def direct_face_classes(u: SampledField, t: TargetManifold, faces) -> np.ndarray:
    """Loop classes of ``u`` around primal 2-faces, from vertex samples on ``N``."""
    cx = u.complex
    out = np.zeros((len(faces), t.group.rank), dtype=np.int64)
    for i, f in enumerate(faces):
        out[i] = _refine_loop(t, t.retract(u.values[cx.cells[2][f]])).coords
    return out


def n_valued_stability(u: SampledField, samples: int = 100, *, t=None, seed=0, threads: int = 1,
                       fraction: float = 0.9, extra_faces: int = 200) -> StabilityReport:
    """Check ``S_y(u)`` is the same chain for every sampled ``|y| < fraction * delta0``."""
    t = _resolve_target(u, t)
    if not u.is_N_valued(t):
        raise ValueError("n_valued_stability needs samples within 1e-9 of N")
    ys, seeds = _offsets(seed, samples, t.ambient_dim, fraction * t.delta0)
    chains: list[SingularChain] = _map(lambda i: singular_set(u, t, ys[i], rng=seeds[i]), range(samples), threads)
    ref = chains[0]
    mism = [(0, i) for i, S in enumerate(chains) if not S.same_cells(ref)]
    rep = StabilityReport(not mism, samples, len(ref.chain), [(ys[a].tolist(), ys[b].tolist()) for a, b in mism])
    # cross-check against loop classes read directly off the vertex samples
    if t.supports_link:
        rng = np.random.default_rng(seed)
        n_faces = u.complex.n_cells(2)
        pool = np.setdiff1d(np.arange(n_faces), ref.chain.ids)
        faces = np.concatenate([ref.chain.ids, rng.choice(pool, size=min(extra_faces, len(pool)), replace=False)])
        direct = direct_face_classes(u, t, faces)
        got = ref.chain.to_dense()[faces]
        bad = np.flatnonzero(np.any(t.group.reduce(direct - got) != 0, axis=1))
        rep.direct_checked = len(faces)
        rep.direct_mismatches = [int(faces[b]) for b in bad]
        rep.stable = rep.stable and not len(bad)
    return rep


@dataclass
class ProjectionReport:
    estimate: float
    stderr: float
    cross_check: float
    cross_stderr: float
    sobolev: float
    ratio: float
    samples: int

    def to_json(self) -> dict:
        return asdict(self)


def _projected_gradient_norms(t: TargetManifold, z: np.ndarray, Du: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """``|D rho(z) Du|`` per point by central differences of ``rho`` along the columns of ``Du``."""
    cols = []
    for j in range(Du.shape[2]):
        v = Du[:, :, j]
        cols.append((t.retract(z + h * v) - t.retract(z - h * v)) / (2 * h))
    return np.linalg.norm(np.stack(cols, axis=-1), axis=(1, 2))


def projection_estimate(u: SampledField, samples: int = 200, *, t=None, seed=0, threads: int = 1) -> ProjectionReport:
    """``int int |grad(rho o (u - y))|^{k-1} dx dy`` two ways, against ``||grad u||_{k-1}^{k-1}``.

    The direct estimate samples ``y`` and integrates over simplex centroids.
    The cross-check substitutes ``z = u(x) - y`` and samples ``z`` uniformly
    in the ball of radius ``R`` around each ``u(x)`` independently.
    """
    t = _resolve_target(u, t)
    R = sampling_radius(u, t)
    m, k = t.ambient_dim, t.k
    cx = u.complex
    d = u.dim
    vol = cx.float_volumes(d)
    ux = u.values[cx.cells[d]].mean(axis=1)
    Du = u.gradients()
    ys, seeds = _offsets(seed, samples, m, R)
    ball = unit_disk_ball_volume(m) * R ** m

    def direct(i):
        g = _projected_gradient_norms(t, ux - ys[i], Du)
        return float(np.dot(vol, g ** (k - 1)))

    est = _integral(_map(direct, range(samples), threads), ball)

    def changed(i):
        rng = np.random.default_rng(seeds[i])
        # y uniform in B_R makes z = u(x) - y uniform in B_R(u(x)), drawn per simplex
        z = ux + sample_ball(rng, len(ux), m, R)
        g = _projected_gradient_norms(t, z, Du)
        return float(np.dot(vol, g ** (k - 1)))

    cross = _integral(_map(changed, range(samples), threads), ball)
    sob = u.sobolev(k - 1)
    return ProjectionReport(est.estimate, est.stderr, cross.estimate, cross.stderr, sob,
                            est.estimate / sob if sob > 0 else 0.0, samples)
