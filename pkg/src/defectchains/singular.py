"""The singular-set operator ``S_y(u)``: defect chains of sampled fields.

Two backends produce the same dual chain for PL fields:

* ``link``: every primal edge carries a transport of ``rho o (u - y)`` along
  its path; summing transports around each primal 2-face gives the loop class
  of that face, which becomes the coefficient of the transverse dual
  ``(d-2)``-cell.
* ``preimage`` (sphere targets): every primal ``k``-face whose affine image
  contains ``y`` contributes the sign of its face map.

Chains live on the truncated barycentric dual of the grid triangulation and
are indexed by primal face ids. The geometric preimage (exact points or
segments) is available separately through :func:`preimage_geometry`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import Chain, cell_mask
from .field import SampledField
from .mesh import Complex
from .target import TargetManifold, get_target

#: Maximum y-jitter resamples before giving up.
MAX_RESAMPLES = 8
#: Jitter radius as a fraction of ``delta0``.
JITTER_SCALE = 1e-6
#: Barycentric coordinates this close to 0 put ``y`` on a face boundary.
BARY_TOL = 1e-10


class DegeneracyError(RuntimeError):
    """Offset ``y`` stayed non-generic after the maximum number of resamples."""


class SingularError(ValueError):
    pass


@dataclass(eq=False)
class SingularChain:
    """``S_y(u)`` as a dual chain of dimension ``d - k``, with provenance of its computation."""

    chain: Chain
    y: np.ndarray
    backend: str
    target: str
    interpolation: str = "pl"
    resamples: int = 0
    field: SampledField | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.chain.dim

    def locations(self) -> np.ndarray:
        """Centroid of the primal face pierced by each carrier cell."""
        return self.chain.complex.centroids(self.chain.dim)[self.chain.ids]

    def augmentation(self):
        return self.chain.augmentation()

    def interior_boundary(self) -> Chain | None:
        """``boundary(S)`` restricted to interior dual cells; ``None`` for 0-chains."""
        if self.chain.dim == 0:
            return None
        bd = self.chain.boundary()
        return bd.restrict(self.chain.complex.interior(bd.dim))

    def same_cells(self, other: "SingularChain") -> bool:
        return (np.array_equal(self.chain.ids, other.chain.ids)
                and np.array_equal(self.chain.coeffs, other.chain.coeffs))

    def to_json(self) -> dict:
        return {"chain": self.chain.to_json(), "y": [float(v) for v in self.y], "backend": self.backend,
                "target": self.target, "interpolation": self.interpolation, "resamples": self.resamples,
                "locations": self.locations().tolist()}


# -- helpers --------------------------------------------------------------------

def _resolve_target(u: SampledField, t) -> TargetManifold:
    if t is None:
        if u.target is None:
            raise SingularError("no target given and the field carries none")
        return get_target(u.target)
    return get_target(t) if isinstance(t, str) else t


def _resolve_mode(u: SampledField, t: TargetManifold, interpolation: str) -> str:
    if interpolation == "auto":
        return "geodesic" if u.is_N_valued(t) else "pl"
    if interpolation not in ("pl", "geodesic"):
        raise SingularError(f"unknown interpolation {interpolation!r}")
    if interpolation == "geodesic" and not u.is_N_valued(t):
        raise SingularError("geodesic interpolation needs N-valued samples")
    return interpolation


def _edge_transports(u: SampledField, t: TargetManifold, y, mode: str):
    edges = u.complex.cells[1]
    return t.edge_transports(u.values[edges[:, 0]], u.values[edges[:, 1]], y, mode)


def _link_coefficients(u: SampledField, t: TargetManifold, y, mode: str):
    """Per-2-face loop classes ``(n_faces, rank)``, or ``None`` when ``y`` is degenerate."""
    vals, deg = _edge_transports(u, t, y, mode)
    if deg.any():
        return None
    B2 = u.complex.boundary_matrix(2)
    return t.loop_class(B2.T @ vals)


def _face_solve(images: np.ndarray, y: np.ndarray):
    """Barycentric coordinates of ``y`` in affine images ``(n, k+1, k)`` plus determinants."""
    k = images.shape[2]
    M = np.swapaxes(images[:, 1:] - images[:, :1], 1, 2)
    det = np.linalg.det(M)
    rhs = (y - images[:, 0])[..., None]
    ok = np.abs(det) > 1e-300
    lam = np.full((len(images), k + 1), np.nan)
    if ok.any():
        sol = np.linalg.solve(M[ok], rhs[ok])[..., 0]
        lam[ok, 1:] = sol
        lam[ok, 0] = 1.0 - sol.sum(axis=1)
    return lam, det


def _preimage_coefficients(u: SampledField, t: TargetManifold, y):
    """Per-``k``-face signs ``(n_faces, 1)``, or ``None`` when ``y`` is degenerate."""
    k = t.k
    cx = u.complex
    faces = cx.cells[k]
    images = u.values[faces]
    lam, det = _face_solve(images, y)
    scale = np.max(np.abs(images - images[:, :1]), axis=(1, 2)) ** k
    flat = np.abs(det) <= 1e-12 * np.maximum(scale, 1e-300)
    finite = ~np.isnan(lam).any(axis=1)
    near = finite & (np.abs(lam).min(axis=1) <= BARY_TOL) & (lam.min(axis=1) >= -BARY_TOL)
    if np.any(near & ~flat):
        return None
    if flat.any() and _flat_faces_hit(images[flat], y):
        return None
    inside = finite & ~flat & (lam.min(axis=1) > BARY_TOL)
    coeff = np.zeros((len(faces), 1), dtype=np.int64)
    coeff[inside, 0] = np.sign(det[inside]).astype(np.int64)
    return coeff


def _flat_faces_hit(images: np.ndarray, y: np.ndarray) -> bool:
    """Whether ``y`` lies within tolerance of any collapsed face image."""
    k1 = images.shape[1]
    for i in range(k1):
        for j in range(i + 1, k1):
            a, b = images[:, i], images[:, j]
            d = b - a
            dd = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
            s = np.clip(np.einsum("ij,ij->i", y - a, d) / dd, 0, 1)
            if np.any(np.linalg.norm(a + s[:, None] * d - y, axis=1) <= BARY_TOL):
                return True
    return False


def _choose_backend(t: TargetManifold, backend: str) -> str:
    if backend == "auto":
        return "link" if t.supports_link else "preimage"
    if backend == "link" and not t.supports_link:
        raise SingularError(f"link backend needs k = 2; {t.name} has k = {t.k}")
    if backend == "preimage" and not t.is_sphere:
        raise SingularError("preimage backend needs a sphere target")
    if backend not in ("link", "preimage"):
        raise SingularError(f"unknown backend {backend!r}")
    return backend


def _jittered(y0: np.ndarray, t: TargetManifold, rng) -> np.ndarray:
    v = rng.normal(size=y0.shape)
    r = JITTER_SCALE * t.delta0 * rng.uniform() ** (1.0 / len(y0))
    return y0 + r * v / np.linalg.norm(v)


def _check_inputs(u: SampledField, t: TargetManifold):
    if u.m != t.ambient_dim:
        raise SingularError(f"field has {u.m} components, target {t.name} lives in R^{t.ambient_dim}")
    if u.dim < t.k:
        raise SingularError(f"domain dimension {u.dim} is below the link dimension {t.k}")


def _with_resampling(y, t: TargetManifold, rng, compute, max_resamples: int):
    y0 = np.zeros(t.ambient_dim) if y is None else np.asarray(y, dtype=float).reshape(t.ambient_dim)
    rng = np.random.default_rng(rng)
    yy = y0
    for attempt in range(max_resamples + 1):
        out = compute(yy)
        if out is not None:
            return out, yy, attempt
        yy = _jittered(y0, t, rng)
    raise DegeneracyError(f"offset {y0.tolist()} still degenerate after {max_resamples} resamples")


# -- public operations -----------------------------------------------------------

def singular_set(u: SampledField, t: TargetManifold | str | None = None, y=None, *, backend: str = "auto",
                 interpolation: str = "auto", rng=None, max_resamples: int = MAX_RESAMPLES) -> SingularChain:
    """Extract ``S_y(u)`` as a dual ``(d-k)``-chain with coefficients in ``pi_{k-1}(N)``.

    Non-generic offsets are replaced by a jittered ``y`` within
    ``1e-6 * delta0`` of the request; the number of resamples is recorded.
    With ``interpolation="auto"`` fields whose samples all lie on ``N`` are
    interpolated along geodesics of ``N``, all others piecewise linearly.
    """
    t = _resolve_target(u, t)
    _check_inputs(u, t)
    backend = _choose_backend(t, backend)
    if backend == "link":
        mode = _resolve_mode(u, t, interpolation)

        def compute(yy):
            return _link_coefficients(u, t, yy, mode)
    else:
        if interpolation == "geodesic":
            raise SingularError("the preimage backend works with PL interpolation only")
        mode = "pl"

        def compute(yy):
            return _preimage_coefficients(u, t, yy)
    coeffs, yy, attempts = _with_resampling(y, t, rng, compute, max_resamples)
    dual = u.dual
    n = u.dim - t.k
    nz = np.flatnonzero(np.any(coeffs != 0, axis=1))
    chain = Chain(dual, n, t.group, nz, coeffs[nz])
    return SingularChain(chain, yy, backend, t.name, mode, attempts, u)


def singular_boundary(u: SampledField, t: TargetManifold | str | None = None, y=None, region=None, *,
                      S: SingularChain | None = None, **kwargs) -> Chain:
    """``boundary(S_y(u) restricted to region)``, checked to sit where ``region`` is cut.

    ``region`` is a cell predicate evaluated on dual cells (centroids of the
    pierced primal faces).
    """
    if S is None:
        S = singular_set(u, t, y, **kwargs)
    if S.chain.dim == 0:
        raise SingularError("the boundary of a 0-dimensional singular set is undefined")
    dual = S.chain.complex
    inside = cell_mask(dual, S.chain.dim, region)
    bd = S.chain.restrict(inside).boundary()
    if bd.is_zero():
        return bd
    # each boundary cell must touch carrier cells on both sides of the region
    B = dual.boundary_matrix(S.chain.dim).tocsr()
    carrier = np.zeros(dual.n_cells(S.chain.dim), dtype=bool)
    carrier[S.chain.ids] = True
    for cid in bd.ids:
        row = B.getrow(int(cid)).indices
        if not (carrier[row] & inside[row]).any() or not (~inside[row]).any():
            raise SingularError(f"boundary cell {int(cid)} is not on the cut of the region")
    return bd


@dataclass(eq=False)
class Cobordism:
    """Witness ``R`` with ``boundary(R) = S1 - S0`` on the dual complex."""

    chain: Chain
    y: np.ndarray
    S0: SingularChain
    S1: SingularChain
    resamples: int = 0

    def verify(self) -> bool:
        return self.chain.boundary() == self.S1.chain - self.S0.chain


def _cobordism_coefficients(u0, u1, t, y, m0, m1):
    cx = u0.complex
    e = cx.cells[1]
    T0, d0 = t.edge_transports(u0.values[e[:, 0]], u0.values[e[:, 1]], y, m0)
    T1, d1 = t.edge_transports(u1.values[e[:, 0]], u1.values[e[:, 1]], y, m1)
    V, dv = t.vertical_transports(u0.values, u1.values, y)
    if d0.any() or d1.any() or dv.any():
        return None
    loop = T0 + V[e[:, 1]] - T1 - V[e[:, 0]]
    B2 = cx.boundary_matrix(2)
    return t.loop_class(loop), t.loop_class(B2.T @ T0), t.loop_class(B2.T @ T1)


def homotopy_cobordism(u0: SampledField, u1: SampledField, t: TargetManifold | str | None = None, y=None, *,
                       interpolation: str | tuple[str, str] = "auto", rng=None,
                       max_resamples: int = MAX_RESAMPLES) -> Cobordism:
    """Project ``S_y`` of the straight homotopy ``(1-s) u0 + s u1`` onto ``Omega``.

    Each primal edge ``a -> b`` receives the class of the loop
    ``u0(a) -> u0(b) -> u1(b) -> u1(a) -> u0(a)``, which is the multiplicity of
    the homotopy's singular set crossing the prism over that edge. The result
    lives on dual ``(d-1)``-cells and satisfies ``boundary(R) = S_y(u1) - S_y(u0)``.
    ``interpolation`` is one mode for both fields or a pair ``(mode0, mode1)``.
    """
    if u0.grid != u1.grid:
        raise SingularError("fields must share a grid")
    t = _resolve_target(u0 if u0.target else u1, t)
    _check_inputs(u0, t)
    _check_inputs(u1, t)
    if not t.supports_link:
        raise SingularError("homotopy cobordisms are built with link transports (k = 2)")
    i0, i1 = (interpolation, interpolation) if isinstance(interpolation, str) else interpolation
    m0 = _resolve_mode(u0, t, i0)
    m1 = _resolve_mode(u1, t, i1)
    out, yy, attempts = _with_resampling(y, t, rng, lambda yy: _cobordism_coefficients(u0, u1, t, yy, m0, m1),
                                         max_resamples)
    R, c0, c1 = out
    dual = u0.dual
    d = u0.dim

    def mk(c, n):
        nz = np.flatnonzero(np.any(c != 0, axis=1))
        return Chain(dual, n, t.group, nz, c[nz])

    S0 = SingularChain(mk(c0, d - 2), yy, "link", t.name, m0, attempts, u0)
    S1 = SingularChain(mk(c1, d - 2), yy, "link", t.name, m1, attempts, u1)
    cob = Cobordism(mk(R, d - 1), yy, S0, S1, attempts)
    if not cob.verify():
        raise SingularError("cobordism boundary does not match S(u1) - S(u0)")
    return cob


# -- geometric preimage -----------------------------------------------------------

def preimage_geometry(u: SampledField, t: TargetManifold | str | None = None, y=None) -> Chain:
    """Exact PL preimage ``(u - y)^{-1}(0)`` as a chain on its own point or segment complex.

    Points (``d = k``) carry the sign of the face map. Segments (``d = 3``,
    ``k = 2``) join the two crossing points of each tetrahedron and are
    oriented along ``grad u1 x grad u2``.
    """
    t = _resolve_target(u, t)
    if not t.is_sphere:
        raise SingularError("geometric preimages need a sphere target")
    _check_inputs(u, t)
    y = np.zeros(t.ambient_dim) if y is None else np.asarray(y, dtype=float)
    cx = u.complex
    k, d = t.k, u.dim
    coeff = _preimage_coefficients(u, t, y)
    if coeff is None:
        raise DegeneracyError("offset is not generic for this field")
    faces = cx.cells[k]
    lam, _ = _face_solve(u.values[faces], y)
    hit = np.flatnonzero(coeff[:, 0])
    pts = np.einsum("nk,nkd->nd", lam[hit], cx.vertices[faces[hit]]) if len(hit) else np.zeros((0, d))
    if d == k:
        pc = Complex(pts, {0: np.arange(len(pts)).reshape(-1, 1)})
        return Chain.from_cells(pc, 0, [(i, int(c)) for i, c in enumerate(coeff[hit, 0])], t.group)
    if not (d == 3 and k == 2):
        raise SingularError("geometric preimages are built for d = k or (d, k) = (3, 2)")
    where = {int(f): i for i, f in enumerate(hit)}
    B3 = cx.boundary_matrix(3).tocsc()
    grads = u.gradients()
    seg_pts, segs = [], []
    for tet in range(cx.n_cells(3)):
        fs = [int(f) for f in B3.indices[B3.indptr[tet]:B3.indptr[tet + 1]] if int(f) in where]
        if not fs:
            continue
        if len(fs) != 2:
            raise DegeneracyError(f"tetrahedron {tet} meets the preimage in {len(fs)} faces")
        a, b = pts[where[fs[0]]], pts[where[fs[1]]]
        ell = np.cross(grads[tet][0], grads[tet][1])
        if np.dot(b - a, ell) < 0:
            a, b = b, a
        seg_pts.extend([a, b])
        segs.append([len(seg_pts) - 2, len(seg_pts) - 1])
    if not segs:
        pc = Complex(np.zeros((0, d)), {1: np.zeros((0, 2), dtype=np.int64)})
        return Chain.zero(pc, 0, t.group) if pc.dim == 0 else Chain.zero(pc, 1, t.group)
    sc = Complex.from_simplices(np.array(seg_pts), segs, tol=1e-12)
    entries = [((int(sc.point_map[s[0]]), int(sc.point_map[s[1]])), 1) for s in segs]
    return Chain.from_simplices(sc, entries, t.group)
