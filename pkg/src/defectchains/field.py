"""Sampled vector fields on grids, PL-interpolated over the Kuhn triangulation, plus preset generators.

Fields sharing a grid share one cached :class:`~defectchains.mesh.Complex`
object, so chains extracted from different fields on the same grid can be
added and compared directly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .mesh import Complex, DualComplex, GridSpec, build_grid_complex
from .target import TargetManifold, director_to_q, get_target


class FieldError(ValueError):
    pass


@lru_cache(maxsize=64)
def grid_complex(grid: GridSpec) -> Complex:
    """Shared float-mode Kuhn complex for ``grid``."""
    return build_grid_complex(grid.origin, grid.spacing, grid.counts)


@lru_cache(maxsize=64)
def grid_dual(grid: GridSpec) -> DualComplex:
    return DualComplex(grid_complex(grid))


def make_grid(counts, lower=-1.0, upper=1.0) -> GridSpec:
    """Uniform grid over ``[lower, upper]^d`` with ``counts`` cells per axis."""
    counts = (counts,) if np.isscalar(counts) else tuple(counts)
    d = len(counts)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (d,))
    return GridSpec(tuple(float(v) for v in lo), tuple(float((b - a) / c) for a, b, c in zip(lo, hi, counts)),
                    tuple(int(c) for c in counts))


@dataclass(eq=False)
class SampledField:
    """Per-vertex values in ``R^m`` on a grid, extended PL over the triangulation."""

    grid: GridSpec
    values: np.ndarray
    target: str | None = None
    _grad: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n_vertices:
            raise FieldError(f"expected {self.grid.n_vertices} vertex values, found {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise FieldError("field values must be finite")
        self.values = v
        self.values.setflags(write=False)

    @classmethod
    def from_function(cls, grid: GridSpec, fn, target: str | None = None) -> "SampledField":
        return cls(grid, fn(grid.vertex_coords()), target)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def complex(self) -> Complex:
        return grid_complex(self.grid)

    @property
    def dual(self) -> DualComplex:
        return grid_dual(self.grid)

    @property
    def Lambda(self) -> float:
        """Sup norm of the field (attained at a vertex for PL interpolation)."""
        return float(np.max(np.linalg.norm(self.values, axis=1))) if len(self.values) else 0.0

    def target_manifold(self) -> TargetManifold | None:
        return get_target(self.target) if self.target else None

    def with_values(self, values) -> "SampledField":
        return SampledField(self.grid, values, self.target)

    def scaled(self, c: float) -> "SampledField":
        return self.with_values(c * self.values)

    def reflected(self) -> "SampledField":
        """The field ``x -> u(-x)``; requires a grid symmetric about the origin."""
        if not np.allclose(self.grid.lower, -self.grid.upper):
            raise FieldError("reflection needs a grid symmetric about 0")
        arr = self.values.reshape(*self.grid.shape, self.m)
        flipped = arr[tuple(slice(None, None, -1) for _ in range(self.dim))]
        return self.with_values(flipped.reshape(-1, self.m))

    # -- PL structure ------------------------------------------------------
    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Top-simplex id and barycentric weights (N, d+1) for each point in the box."""
        g = self.grid
        d = g.dim
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        h = np.array([float(s) for s in g.spacing])
        rel = (pts - g.lower) / h
        if np.any(rel < -1e-9) or np.any(rel > np.array(g.counts) + 1e-9):
            raise FieldError("point outside the grid box")
        base = np.clip(np.floor(rel).astype(np.int64), 0, np.array(g.counts) - 1)
        frac = np.clip(rel - base, 0.0, 1.0)
        # the Kuhn simplex containing a point steps along axes in decreasing order of the fractional part
        order = np.argsort(-frac, axis=1, kind="stable")
        perms = list(itertools.permutations(range(d)))
        perm_index = {p: i for i, p in enumerate(perms)}
        pid = np.array([perm_index[tuple(o)] for o in order])
        base_id = np.ravel_multi_index(base.T, g.counts)
        top = pid * int(np.prod(g.counts)) + base_id
        fs = np.take_along_axis(frac, order, axis=1)
        w = np.empty((len(pts), d + 1))
        w[:, 0] = 1.0 - fs[:, 0]
        w[:, 1:d] = fs[:, :-1] - fs[:, 1:]
        w[:, d] = fs[:, -1]
        # weights follow the step order; map them to the stored vertex order
        cells = self.complex.cells[d][top]
        steps = np.zeros((len(pts), d + 1, d), dtype=np.int64)
        for k in range(1, d + 1):
            steps[:, k] = steps[:, k - 1]
            steps[np.arange(len(pts)), k, order[:, k - 1]] += 1
        path_ids = np.ravel_multi_index(np.moveaxis(base[:, None, :] + steps, -1, 0), g.shape)
        out = np.zeros_like(w)
        for k in range(d + 1):
            hit = cells == path_ids[:, k:k + 1]
            out += hit * w[:, k:k + 1]
        return top, out

    def evaluate(self, points) -> np.ndarray:
        top, w = self.locate(points)
        cells = self.complex.cells[self.dim][top]
        return np.einsum("nk,nkm->nm", w, self.values[cells])

    def gradients(self) -> np.ndarray:
        """PL gradient ``Du`` per top simplex, shape ``(n_top, m, d)``."""
        if self._grad is None:
            cx = self.complex
            cells = cx.cells[self.dim]
            X = cx.vertices[cells]
            E = X[:, 1:] - X[:, :1]
            F = self.values[cells[:, 1:]] - self.values[cells[:, :1]]
            self._grad = np.swapaxes(np.linalg.solve(E, F), 1, 2)
        return self._grad

    def sobolev(self, p: float = 1.0) -> float:
        """``int |Du|^p`` with the Frobenius norm, exact for the PL field."""
        vol = self.complex.float_volumes(self.dim)
        return float(np.dot(vol, np.linalg.norm(self.gradients(), axis=(1, 2)) ** p))

    def total_variation(self) -> float:
        return self.sobolev(1.0)

    def is_N_valued(self, t: TargetManifold, tol: float = 1e-9) -> bool:
        return bool(np.all(t.on_N(self.values, tol)))

    def to_json_header(self) -> dict:
        return {"d": self.dim, "m": self.m, **self.grid.to_json(),
                **({"target": self.target} if self.target else {})}


# -- presets --------------------------------------------------------------------

#: generic default vortex center, off every grid hyperplane
DEFAULT_CENTER = (0.013, -0.021)
DEFAULT_PAIR = ((-0.4 + 0.013, 0.011), (0.4 - 0.017, -0.023))


def _polar(coords, center):
    r = coords[:, :2] - np.asarray(center, dtype=float)
    return r, np.arctan2(r[:, 1], r[:, 0])


def vortex(counts: int = 64, center=DEFAULT_CENTER, lower=-1.0, upper=1.0) -> SampledField:
    """Unit vortex ``(x - x0)/|x - x0|``."""
    return degree_n(1, counts, center, lower, upper)


def degree_n(n: int, counts: int = 64, center=DEFAULT_CENTER, lower=-1.0, upper=1.0) -> SampledField:
    """N-valued field ``e^{i n theta}`` about ``center``."""
    grid = make_grid((counts, counts), lower, upper)
    _, th = _polar(grid.vertex_coords(), center)
    return SampledField(grid, np.c_[np.cos(n * th), np.sin(n * th)], "circle")


def cored_vortex(eps: float, counts: int = 64, center=DEFAULT_CENTER, lower=-1.0, upper=1.0) -> SampledField:
    """Smooth vortex ``(x - x0)/sqrt(|x - x0|^2 + eps^2)``, Sobolev-regular for every exponent."""
    grid = make_grid((counts, counts), lower, upper)
    r, _ = _polar(grid.vertex_coords(), center)
    return SampledField(grid, r / np.sqrt((r ** 2).sum(axis=1, keepdims=True) + eps ** 2), "circle")


def vortex_pair(counts: int = 64, plus=DEFAULT_PAIR[0], minus=DEFAULT_PAIR[1], lower=-1.0, upper=1.0) -> SampledField:
    """Degree +1 at ``plus`` and -1 at ``minus``."""
    grid = make_grid((counts, counts), lower, upper)
    xs = grid.vertex_coords()
    _, t1 = _polar(xs, plus)
    _, t2 = _polar(xs, minus)
    phi = t1 - t2
    return SampledField(grid, np.c_[np.cos(phi), np.sin(phi)], "circle")


def disclination_half(counts: int = 64, plus=DEFAULT_PAIR[0], minus=DEFAULT_PAIR[1], lower=-1.0,
                      upper=1.0) -> SampledField:
    """Planar director ``phi = (theta_+ - theta_-)/2`` as unit Q-tensors: a +1/2 and -1/2 pair."""
    grid = make_grid((counts, counts), lower, upper)
    xs = grid.vertex_coords()
    _, t1 = _polar(xs, plus)
    _, t2 = _polar(xs, minus)
    phi = 0.5 * (t1 - t2)
    n = np.c_[np.cos(phi), np.sin(phi), np.zeros(len(phi))]
    return SampledField(grid, director_to_q(n), "rp2q")


def line_defect_3d(counts: int = 16, axis_point=DEFAULT_CENTER, lower=-1.0, upper=1.0) -> SampledField:
    """``(x1 - a, x2 - b)`` normalized: a straight defect line parallel to the x3-axis."""
    grid = make_grid((counts,) * 3, lower, upper)
    r, _ = _polar(grid.vertex_coords(), axis_point)
    return SampledField(grid, r / np.linalg.norm(r, axis=1, keepdims=True), "circle")


def vortex_ring(counts: int = 16, radius: float = 0.5 + 0.013, height: float = -0.021, lower=-1.0,
                upper=1.0) -> SampledField:
    """Closed defect loop of radius ``radius`` in the plane ``x3 = height``."""
    grid = make_grid((counts,) * 3, lower, upper)
    xs = grid.vertex_coords()
    rho = np.linalg.norm(xs[:, :2], axis=1)
    v = np.c_[rho - radius, xs[:, 2] - height]
    return SampledField(grid, v / np.linalg.norm(v, axis=1, keepdims=True), "circle")


def defect_free(counts: int = 64, amplitude: float = 0.8, lower=-1.0, upper=1.0) -> SampledField:
    """``e^{i phi}`` with a smooth bounded phase; winding 0 everywhere."""
    grid = make_grid((counts, counts), lower, upper)
    x, y = grid.vertex_coords().T
    phi = amplitude * (np.sin(np.pi * x) * np.cos(0.5 * np.pi * y) + 0.5 * x * y)
    return SampledField(grid, np.c_[np.cos(phi), np.sin(phi)], "circle")


def smooth_noise(counts, m: int = 2, modes: int = 3, amplitude: float = 1.0, offset=None, rng=None,
                 lower=-1.0, upper=1.0) -> SampledField:
    """Random low-frequency Fourier field ``R^d -> R^m`` with coefficients decaying like ``1/|k|^2``."""
    rng = np.random.default_rng(rng)
    grid = make_grid(counts, lower, upper)
    xs = grid.vertex_coords()
    d = grid.dim
    ks = np.array([k for k in itertools.product(range(modes + 1), repeat=d) if any(k)], dtype=float)
    decay = 1.0 / (ks ** 2).sum(axis=1)
    phase = np.pi * xs @ ks.T
    vals = np.zeros((len(xs), m))
    for j in range(m):
        a = rng.normal(size=len(ks)) * decay
        b = rng.normal(size=len(ks)) * decay
        vals[:, j] = np.cos(phase) @ a + np.sin(phase) @ b
    vals *= amplitude / max(np.abs(vals).max(), 1e-300)
    if offset is not None:
        vals += np.asarray(offset, dtype=float)
    return SampledField(grid, vals, "circle" if m == 2 else None)


def constant(counts, value, lower=-1.0, upper=1.0, target: str | None = None) -> SampledField:
    grid = make_grid(counts, lower, upper)
    return SampledField(grid, np.tile(np.asarray(value, dtype=float), (grid.n_vertices, 1)), target)


PRESETS = {
    "vortex": vortex,
    "vortex-pair": vortex_pair,
    "degree-n": degree_n,
    "disclination-half": disclination_half,
    "line-defect-3d": line_defect_3d,
    "vortex-ring": vortex_ring,
    "defect-free": defect_free,
    "noise": smooth_noise,
}


def preset(name: str, **kwargs) -> SampledField:
    try:
        fn = PRESETS[name]
    except KeyError:
        raise FieldError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if name == "noise":
        kwargs.setdefault("counts", (32, 32))
    return fn(**kwargs)


def unit_disk_ball_volume(k: int) -> float:
    """Volume of the unit ``k``-ball."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)
