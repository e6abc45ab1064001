"""Push-forward under piecewise-affine maps and intersections of polyhedral chains.

Orientation of an intersection follows the concatenated-frame rule: if ``u``
is an oriented basis of the intersection, ``(u, v)`` an oriented basis of the
first chain's plane and ``(u, w)`` one of the second chain's plane, then
``(u, v, w)`` is positively oriented in ``R^d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space, qr
from scipy.optimize import lsq_linear

from .chain import Chain
from .coeff import GroupElement, GroupError
from .mesh import Complex

#: Relative smallest-singular-value threshold below which a pair is not transverse.
TRANSVERSALITY_TOL = 1e-8
#: Barycentric tolerance for a point landing on a face of a simplex.
FACE_TOL = 1e-10


class RemeshError(ValueError):
    """Image of a cell cannot be written as a union of target cells."""


class IntersectionError(ValueError):
    """Support condition violated or sampled indices disagree."""


# -- piecewise-affine maps ----------------------------------------------------

def _tangent_norms(src: np.ndarray, img: np.ndarray) -> np.ndarray:
    """Operator norm of the affine map of each simplex restricted to its tangent plane.

    ``src``: (N, j+1, d) source simplices; ``img``: (N, j+1, m) images.
    """
    E = src[:, 1:] - src[:, :1]
    F = img[:, 1:] - img[:, :1]
    GE = np.einsum("nik,njk->nij", E, E)
    GF = np.einsum("nik,njk->nij", F, F)
    # largest generalized eigenvalue of GF v = mu GE v
    L = np.linalg.cholesky(GE)
    Linv = np.linalg.inv(L)
    M = Linv @ GF @ np.swapaxes(Linv, 1, 2)
    mu = np.linalg.eigvalsh(M)[:, -1]
    return np.sqrt(np.clip(mu, 0, None))


@dataclass
class PLMap:
    """Simplex-wise affine map given by vertex images."""

    source: Complex
    images: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        if self.images.ndim == 1:
            self.images = self.images[:, None]
        if len(self.images) != self.source.n_cells(0):
            raise ValueError("one image point per source vertex is required")
        if not np.all(np.isfinite(self.images)):
            raise ValueError("images must be finite")

    @property
    def target_dim(self) -> int:
        return self.images.shape[1]

    def lipschitz(self) -> float:
        """Largest tangent-restricted operator norm over all cells of positive dimension."""
        lam = 0.0
        for j in range(1, self.source.dim + 1):
            cells = self.source.cells[j]
            if len(cells):
                lam = max(lam, float(_tangent_norms(self.source.cell_points(j), self.images[cells]).max()))
        return lam

    def __call__(self, x):
        """Evaluate at points lying in the source complex (top cells searched)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = self.source.dim
        pts = self.source.cell_points(d)
        out = np.full((len(x), self.target_dim), np.nan)
        T = pts[:, 1:] - pts[:, :1]
        for i, p in enumerate(x):
            for c in range(len(pts)):
                coef, *_ = np.linalg.lstsq(T[c].T, p - pts[c, 0], rcond=None)
                bary = np.concatenate([[1 - coef.sum()], coef])
                if np.all(bary >= -1e-12) and np.allclose(T[c].T @ coef, p - pts[c, 0], atol=1e-12):
                    out[i] = bary @ self.images[self.source.cells[d][c]]
                    break
        return out


def _orientation_in_plane(frame_ref: np.ndarray, frame: np.ndarray) -> int:
    """Sign of ``frame`` (rows) relative to ``frame_ref`` (rows) spanning the same plane."""
    coef, *_ = np.linalg.lstsq(frame_ref.T, frame.T, rcond=None)
    det = np.linalg.det(coef)
    return 1 if det > 0 else -1


def pushforward(f: PLMap, S: Chain, target_complex: Complex | None = None, tol: float = 1e-12) -> Chain:
    """Image chain ``f_* S``.

    Without ``target_complex`` the image simplices form a new complex (coincident
    image points are merged). With it, every image cell must be a union of target
    cells of the same dimension. Rank-deficient images contribute zero.
    """
    if S.complex is not f.source:
        raise ValueError("chain does not live on the map's source complex")
    n = S.dim
    cells = S.complex.cells[n][S.ids]
    img = f.images[cells]  # (k, n+1, m)
    if n == 0:
        keep = np.ones(len(cells), dtype=bool)
    else:
        E = img[:, 1:] - img[:, :1]
        gram = np.einsum("nik,njk->nij", E, E)
        scale = np.maximum(np.einsum("nii->n", gram), 1e-300) ** (n / 2)
        keep = np.sqrt(np.clip(np.linalg.det(gram), 0, None)) > tol * scale
        if n > f.target_dim:
            keep[:] = False
    ids = np.flatnonzero(keep)
    if target_complex is None:
        pts = img[ids].reshape(-1, f.target_dim)
        simp = np.arange(len(pts)).reshape(len(ids), n + 1)
        cx = Complex.from_simplices(pts, simp.tolist(), tol=1e-12)
        if cx.dim < n:
            # every simplex collapsed: hand back an empty complex of the right dimension
            cx = Complex(np.zeros((n + 1, f.target_dim)), {n: [list(range(n + 1))]}) if n else cx
            return Chain.zero(cx, n, S.group)
        entries = [(tuple(int(cx.point_map[v]) for v in s), S.coeffs[i]) for s, i in zip(simp, ids)]
        out = Chain.from_simplices(cx, entries, S.group)
    else:
        out = _remesh(img[ids], S.coeffs[ids], S.group, n, target_complex, tol)
    lam = f.lipschitz()
    if float(out.mass()) > (lam ** n) * float(S.mass()) * (1 + 1e-9) + 1e-12:
        raise RuntimeError("push-forward mass bound violated")
    return out


def _remesh(img: np.ndarray, coeffs: np.ndarray, group, n: int, target: Complex, tol: float) -> Chain:
    if target.ambient_dim != img.shape[2] or target.dim < n:
        raise RemeshError("target complex has the wrong dimension")
    tpts = target.cell_points(n)
    tvol = target.float_volumes(n)
    ids, out = [], []
    for simplex, g in zip(img, coeffs):
        base = simplex[0]
        E = (simplex[1:] - base)  # n x m
        # barycentric coordinates of every target vertex of every n-cell
        if n == 0:
            hit = np.flatnonzero(np.linalg.norm(tpts[:, 0] - base, axis=1) <= 1e-9)
            signs = np.ones(len(hit), dtype=int)
        else:
            rel = tpts - base
            coef = np.einsum("ij,ckj->cki", np.linalg.pinv(E).T, rel)  # (C, n+1, n)
            resid = np.linalg.norm(np.einsum("cki,ij->ckj", coef, E) - rel, axis=2)
            bary0 = 1 - coef.sum(axis=2)
            inside = (np.all(coef >= -1e-9, axis=(1, 2)) & np.all(bary0 >= -1e-9, axis=1)
                      & np.all(resid <= 1e-9 * (1 + np.abs(rel).max()), axis=1))
            hit = np.flatnonzero(inside)
            vol = np.sqrt(max(np.linalg.det(E @ E.T), 0)) / np.prod(np.arange(1, n + 1))
            if not np.isclose(tvol[hit].sum(), vol, rtol=1e-9, atol=1e-12):
                raise RemeshError("image cell is not a union of target cells")
            signs = np.array([_orientation_in_plane(E, tpts[c, 1:] - tpts[c, 0]) for c in hit], dtype=int)
        if n == 0 and len(hit) != 1:
            raise RemeshError("image point is not a target vertex")
        ids.extend(hit.tolist())
        out.extend((s * g).tolist() for s in signs)
    return Chain(target, n, group, np.array(ids, dtype=np.int64),
                 np.array(out, dtype=np.int64).reshape(len(ids), group.rank))


# -- intersections ------------------------------------------------------------

@dataclass
class IntersectionResult:
    chain: Chain
    index: GroupElement | None
    degenerate: bool
    n_degenerate: int = 0

    @property
    def zero_chain(self) -> Chain:
        return self.chain


def _orthonormal_complement(frame_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Rows spanning the part of span(frame_rows) orthogonal to ``u``."""
    q, _ = qr(frame_rows.T, mode="economic")
    proj = q - np.outer(u, u @ q)
    basis, s, _ = np.linalg.svd(proj, full_matrices=False)
    return basis[:, : frame_rows.shape[0] - 1].T


def _pair_intersection(A: np.ndarray, B: np.ndarray):
    """Intersect simplex ``A`` ((n+1, d)) with simplex ``B`` ((m+1, d)), n + m - d in {0, 1}.

    Returns ``(status, points, sign)``; status is 'empty', 'ok' or 'degenerate'.
    """
    d = A.shape[1]
    n, m = len(A) - 1, len(B) - 1
    k = n + m - d
    EA = A[1:] - A[0]
    EB = B[1:] - B[0]
    M = np.concatenate([EA, -EB]).T  # d x (n+m)
    colnorm = np.linalg.norm(M, axis=0)
    sv = np.linalg.svd(M / colnorm, compute_uv=False)
    # transverse iff the combined frame spans R^d
    if sv[d - 1] < TRANSVERSALITY_TOL:
        return "degenerate", None, 0
    rhs = B[0] - A[0]
    if k == 0:
        st = np.linalg.solve(M, rhs)
        s, t = st[:n], st[n:]
        ba = np.concatenate([[1 - s.sum()], s])
        bb = np.concatenate([[1 - t.sum()], t])
        if ba.min() < -FACE_TOL or bb.min() < -FACE_TOL:
            return "empty", None, 0
        if ba.min() <= FACE_TOL or bb.min() <= FACE_TOL:
            return "degenerate", None, 0
        sign = 1 if np.linalg.det(np.concatenate([EA, EB]).T) > 0 else -1
        return "ok", (A[0] + s @ EA)[None], sign
    # k == 1: a line of solutions
    st0, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    ns = null_space(M)
    if ns.shape[1] != 1:
        return "degenerate", None, 0
    ns = ns[:, 0]
    # barycentric coordinates as affine functions a + lam * b
    a_cols = np.concatenate([[1 - st0[:n].sum()], st0[:n], [1 - st0[n:].sum()], st0[n:]])
    b_cols = np.concatenate([[-ns[:n].sum()], ns[:n], [-ns[n:].sum()], ns[n:]])
    lo, hi = -np.inf, np.inf
    for a, b in zip(a_cols, b_cols):
        if abs(b) < 1e-14:
            if a < -FACE_TOL:
                return "empty", None, 0
            continue
        r = -a / b
        if b > 0:
            lo = max(lo, r)
        else:
            hi = min(hi, r)
    if not hi - lo > 1e-12:
        return "empty", None, 0
    p0 = A[0] + (st0[:n] + lo * ns[:n]) @ EA
    p1 = A[0] + (st0[:n] + hi * ns[:n]) @ EA
    u = p1 - p0
    u = u / np.linalg.norm(u)
    v = _orthonormal_complement(EA, u)
    w = _orthonormal_complement(EB, u)
    s1 = _orientation_in_plane(EA, np.concatenate([u[None], v]))
    s2 = _orientation_in_plane(EB, np.concatenate([u[None], w]))
    s3 = 1 if np.linalg.det(np.concatenate([u[None], v, w]).T) > 0 else -1
    eps = s1 * s2 * s3
    return "ok", np.stack([p0, p1]), eps


def _bbox(points: np.ndarray):
    return points.min(axis=1), points.max(axis=1)


def intersect_chains(S: Chain, R: Chain, y=None) -> IntersectionResult:
    """``S ∩ τ_y R`` for an ``n``-chain ``S`` and an integer ``m``-chain ``R`` with ``n + m - d`` in {0, 1}."""
    if R.group.rank != 1 or R.group.torsion_orders:
        raise GroupError("the second chain must have integer coefficients")
    d = S.complex.ambient_dim
    if R.complex.ambient_dim != d:
        raise ValueError("chains live in different ambient spaces")
    k = S.dim + R.dim - d
    if k not in (0, 1):
        raise ValueError("intersection dimension must be 0 or 1")
    y = np.zeros(d) if y is None else np.asarray(y, dtype=float)
    A_all = S.complex.cell_points(S.dim, S.ids) if len(S) else np.zeros((0, S.dim + 1, d))
    B_all = R.complex.cell_points(R.dim, R.ids) + y if len(R) else np.zeros((0, R.dim + 1, d))
    loA, hiA = _bbox(A_all) if len(A_all) else (np.zeros((0, d)), np.zeros((0, d)))
    loB, hiB = _bbox(B_all) if len(B_all) else (np.zeros((0, d)), np.zeros((0, d)))
    pts, simp, coeffs = [], [], []
    ndeg = 0
    for i in range(len(A_all)):
        cand = np.flatnonzero(np.all(loB <= hiA[i] + 1e-12, axis=1) & np.all(hiB >= loA[i] - 1e-12, axis=1))
        for j in cand:
            status, p, sign = _pair_intersection(A_all[i], B_all[j])
            if status == "empty":
                continue
            if status == "degenerate":
                ndeg += 1
                continue
            base = len(pts)
            pts.extend(p)
            simp.append(list(range(base, base + len(p))))
            coeffs.append(sign * int(R.coeffs[j, 0]) * S.coeffs[i])
    if k == 0:
        cx = Complex(np.array(pts).reshape(-1, d) if pts else np.zeros((0, d)), {0: []})
        chain = Chain(cx, 0, S.group, np.arange(len(pts)), np.array(coeffs, dtype=np.int64).reshape(-1, S.group.rank))
    else:
        cx = Complex.from_simplices(np.array(pts).reshape(-1, d), simp, tol=1e-9)
        if cx.dim < 1:
            cx = Complex(np.zeros((2, d)), {1: [[0, 1]]})
            chain = Chain.zero(cx, 1, S.group)
        else:
            entries = [(tuple(int(cx.point_map[v]) for v in s), c) for s, c in zip(simp, coeffs)]
            entries = [(s, c) for s, c in entries if len(set(s)) == 2]
            chain = Chain.from_simplices(cx, entries, S.group) if entries else Chain.zero(cx, 1, S.group)
    index = chain.augmentation() if k == 0 and ndeg == 0 else None
    return IntersectionResult(chain, index, ndeg > 0, ndeg)


def point_measure(chain: Chain, tol: float = 1e-9) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    """Collapse a geometric 0-chain to (point, coefficient) pairs with coincident points summed."""
    pts = chain.complex.centroids(0)[chain.ids]
    if not len(pts):
        return []
    from .mesh import merge_points

    reps, lab = merge_points(pts, tol)
    total = np.zeros((len(reps), chain.group.rank), dtype=np.int64)
    np.add.at(total, lab, chain.coeffs)
    total = chain.group.reduce(total)
    return [(reps[i], tuple(int(c) for c in total[i])) for i in range(len(reps)) if np.any(total[i])]


def same_point_measure(a: Chain, b: Chain, tol: float = 1e-9) -> bool:
    """Whether two geometric 0-chains (possibly on different complexes) agree as point measures."""
    if a.group != b.group:
        return False
    pa, pb = point_measure(a, tol), point_measure(b, tol)
    if len(pa) != len(pb):
        return False
    used = set()
    for p, c in pa:
        match = None
        for j, (q, e) in enumerate(pb):
            if j not in used and np.linalg.norm(p - q) <= 10 * tol and c == e:
                match = j
                break
        if match is None:
            return False
        used.add(match)
    return True


def simplex_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Euclidean distance between the convex hulls of two point sets."""
    w = 1e4
    na, nb = len(A), len(B)
    M = np.zeros((A.shape[1] + 2, na + nb))
    M[: A.shape[1], :na] = A.T
    M[: A.shape[1], na:] = -B.T
    M[-2, :na] = w
    M[-1, na:] = w
    rhs = np.zeros(A.shape[1] + 2)
    rhs[-2:] = w
    res = lsq_linear(M, rhs, bounds=(0, 1))
    a, b = res.x[:na], res.x[na:]
    a, b = a / a.sum(), b / b.sum()
    return float(np.linalg.norm(a @ A - b @ B))


def support_distance(S: Chain, R: Chain) -> float:
    """Distance between the carriers of two chains (inf if either is zero)."""
    if S.is_zero() or R.is_zero():
        return np.inf
    A = S.complex.cell_points(S.dim, S.ids)
    B = R.complex.cell_points(R.dim, R.ids)
    best = np.inf
    loB, hiB = _bbox(B)
    for a in A:
        lo, hi = a.min(axis=0), a.max(axis=0)
        gap = np.maximum(0, np.maximum(loB - hi, lo - hiB))
        lower = np.linalg.norm(gap, axis=1)
        for j in np.argsort(lower):
            if lower[j] >= best:
                break
            best = min(best, simplex_distance(a, B[j]))
    return best


def intersection_index(S: Chain, R: Chain, samples: int = 16, radius: float = 1e-3, rng=None,
                       max_halvings: int = 12) -> GroupElement:
    """Common value of ``χ(S ∩ τ_y R)`` over random small translations ``y``.

    Requires ``spt ∂S ∩ spt R = spt S ∩ spt ∂R = ∅``. The radius is capped by half
    the relevant support distance and halved until all samples agree.
    """
    if S.dim + R.dim != S.complex.ambient_dim:
        raise ValueError("chains must have complementary dimensions")
    rng = np.random.default_rng(rng)
    gaps = []
    if S.dim > 0:
        gaps.append(support_distance(S.boundary(), R))
    if R.dim > 0:
        gaps.append(support_distance(S, R.boundary()))
    gap = min(gaps) if gaps else np.inf
    if gap <= 1e-12:
        raise IntersectionError("support condition violated: boundary of one chain meets the other")
    r = min(radius, 0.5 * gap)
    d = S.complex.ambient_dim
    for _ in range(max_halvings + 1):
        values = []
        attempts = 0
        while len(values) < samples and attempts < 8 * samples:
            attempts += 1
            y = rng.normal(size=d)
            y *= r * rng.random() ** (1 / d) / np.linalg.norm(y)
            res = intersect_chains(S, R, y)
            if res.degenerate:
                continue
            values.append(res.index)
        if values and all(v == values[0] for v in values):
            return values[0]
        r /= 2
    raise IntersectionError("sampled intersection indices disagree at the minimal radius")


def identity_map(cx: Complex) -> PLMap:
    return PLMap(cx, np.asarray(cx.vertices, dtype=float))


__all__ = ["PLMap", "pushforward", "intersect_chains", "intersection_index", "IntersectionResult",
           "RemeshError", "IntersectionError", "point_measure", "same_point_measure", "support_distance",
           "identity_map"]
