"""Registry of target manifolds ``N`` with exceptional set ``X`` and retraction ``rho``.

Each target supplies five evaluators: retraction, distance to ``X``, loop
classification into ``pi_{k-1}(N)``, and per-edge transports used by the
link backend. A transport is an additive quantity attached to an oriented
path whose sum around a closed loop determines the loop class exactly:
principal angle increments for the circle, sign-continuation bits for the
projective plane.

Paths between two vertex values are either straight segments in ``R^m``
(``"pl"``) or, when both values lie on ``N``, geodesics on ``N``
(``"geodesic"``). Every path is shifted by the offset ``y`` and retracted.
Circle arcs have a closed-form transport. Projective-plane paths are
sampled with a certified step: a path with speed at most ``L`` moves at
most ``L h`` in a step ``h``, so choosing ``h`` below a fraction of the
distance to ``X`` bounds the rotation of the retracted point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeff import CoefficientGroup, GroupElement, Z, Z2

#: Points closer than this to ``X`` are treated as degenerate input.
X_TOL = 1e-10
#: Vertex values this close to ``N`` count as ``N``-valued.
ON_N_TOL = 1e-9
#: Maximum adaptive steps per path before giving up.
MAX_PATH_STEPS = 4096


class DegenerateInputError(ValueError):
    """Point within tolerance of the exceptional set ``X``."""


class RefineNeeded(ValueError):
    """Consecutive loop samples are too far apart to classify safely."""

    def __init__(self, message: str, segment: tuple[int, int]):
        super().__init__(message)
        self.segment = segment


# -- projective-plane helpers --------------------------------------------------

_S2 = math.sqrt(2.0)
_S6 = math.sqrt(6.0)


def _q_basis() -> np.ndarray:
    """Orthonormal basis (Frobenius) of traceless symmetric 3x3 matrices, shape (5, 3, 3)."""
    E = np.zeros((5, 3, 3))
    E[0] = np.diag([1, -1, 0]) / _S2
    E[1] = np.diag([1, 1, -2]) / _S6
    E[2][0, 1] = E[2][1, 0] = 1 / _S2
    E[3][0, 2] = E[3][2, 0] = 1 / _S2
    E[4][1, 2] = E[4][2, 1] = 1 / _S2
    return E


Q_BASIS = _q_basis()


def q_to_matrix(z: np.ndarray) -> np.ndarray:
    return np.einsum("...a,aij->...ij", np.asarray(z, dtype=float), Q_BASIS)


def matrix_to_q(M: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,aij->...a", M, Q_BASIS)


def director_to_q(n: np.ndarray) -> np.ndarray:
    """Unit uniaxial Q-tensor ``sqrt(3/2)(n n^T - I/3)`` of a director, in R^5 coordinates."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    M = math.sqrt(1.5) * (np.einsum("...i,...j->...ij", n, n) - np.eye(3) / 3)
    return matrix_to_q(M)


def _leading(z: np.ndarray):
    """Leading eigenvector and top eigen-gap of Q-coordinates ``z`` (..., 5)."""
    w, v = np.linalg.eigh(q_to_matrix(z))
    return v[..., :, 2], w[..., 2] - w[..., 1]


def _canonical_sign(n: np.ndarray) -> np.ndarray:
    """Flip directors so the largest-magnitude component is positive (deterministic representative)."""
    idx = np.argmax(np.abs(n), axis=-1)
    s = np.sign(np.take_along_axis(n, idx[..., None], axis=-1))
    s[s == 0] = 1
    return n * s


def _compute_rp2_delta0() -> float:
    """dist(N, X) by minimizing the eigen-gap distance over random directors."""
    rng = np.random.default_rng(0)
    n = rng.normal(size=(2000, 3))
    w = np.linalg.eigvalsh(q_to_matrix(director_to_q(n)))
    return float(np.min((w[:, 2] - w[:, 1]) / _S2))


#: dist(N, X) for the projective plane; computed once by :func:`_compute_rp2_delta0`.
RP2_DELTA0 = 0.8660254037844386


# -- target base ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TargetManifold:
    name: str
    ambient_dim: int
    k: int
    group: CoefficientGroup
    delta0: float
    #: sup of |x| over X (bounds where y can make S_y(u) nonempty)
    x_radius: float = 0.0

    # evaluators overridden by subclasses
    def retract(self, z):
        raise NotImplementedError

    def dist_to_X(self, z):
        raise NotImplementedError

    def classify_loop(self, samples) -> GroupElement:
        raise NotImplementedError

    def on_N(self, z, tol: float = ON_N_TOL) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.linalg.norm(z - self.retract(z), axis=1) <= tol

    # link-backend support
    def edge_transports(self, za, zb, y, mode: str = "pl"):
        """Transports along paths ``za -> zb`` shifted by ``y``; returns (values, degenerate mask)."""
        raise NotImplementedError

    def vertical_transports(self, za, zb, y):
        """Transports along straight homotopy segments ``za -> zb`` (same as ``pl``)."""
        return self.edge_transports(za, zb, y, "pl")

    def loop_class(self, total: np.ndarray) -> np.ndarray:
        """Group coordinates (N, rank) of loops from summed transports."""
        raise NotImplementedError

    @property
    def supports_link(self) -> bool:
        return self.k == 2

    @property
    def is_sphere(self) -> bool:
        return False

    def __repr__(self) -> str:
        return f"TargetManifold({self.name})"


class SphereTarget(TargetManifold):
    """``S^{k-1}`` in ``R^k`` with ``X = {0}`` and radial retraction."""

    def __init__(self, k: int, name: str | None = None):
        super().__init__(name or ("circle" if k == 2 else f"sphere{k}"), k, k, Z, 1.0, 0.0)

    @property
    def is_sphere(self) -> bool:
        return True

    def dist_to_X(self, z):
        z = np.asarray(z, dtype=float)
        return np.linalg.norm(z, axis=-1)

    def retract(self, z):
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1, keepdims=True)
        if np.any(r <= X_TOL):
            raise DegenerateInputError("point within tolerance of X = {0}")
        return z / r

    def retraction_jacobian_norm(self, z):
        """Operator norm of D(rho) at ``z``: ``1/|z|``."""
        return 1.0 / self.dist_to_X(z)

    def classify_loop(self, samples) -> GroupElement:
        if self.k != 2:
            raise NotImplementedError("loop classification is implemented for k = 2")
        pts = self.retract(np.asarray(samples, dtype=float))
        if len(pts) < 2:
            return Z.zero()
        nxt = np.roll(pts, -1, axis=0)
        ang = np.arctan2(pts[:, 0] * nxt[:, 1] - pts[:, 1] * nxt[:, 0], np.einsum("ij,ij->i", pts, nxt))
        bad = np.flatnonzero(np.abs(ang) >= np.pi / 2)
        if len(bad):
            i = int(bad[0])
            raise RefineNeeded(f"angular gap {abs(ang[i]):.3f} >= pi/2", (i, (i + 1) % len(pts)))
        return Z.element(int(round(ang.sum() / (2 * np.pi))))

    # -- transports ---------------------------------------------------------
    def edge_transports(self, za, zb, y, mode: str = "pl"):
        if self.k != 2:
            raise NotImplementedError("link transports need k = 2")
        za = np.asarray(za, dtype=float) - y
        zb = np.asarray(zb, dtype=float) - y
        if mode == "pl":
            # a straight segment missing 0 subtends its principal angle exactly
            d = zb - za
            t = np.clip(-np.einsum("ij,ij->i", za, d) / np.maximum(np.einsum("ij,ij->i", d, d), 1e-300), 0, 1)
            closest = np.linalg.norm(za + t[:, None] * d, axis=1)
            ang = np.arctan2(za[:, 0] * zb[:, 1] - za[:, 1] * zb[:, 0], np.einsum("ij,ij->i", za, zb))
            return ang, closest <= X_TOL
        if mode == "geodesic":
            return self._arc_transports(za + y, zb + y, y)
        raise ValueError(f"unknown interpolation mode {mode!r}")

    def _arc_transports(self, a, b, y):
        """Angle swept by ``gamma(t) - y`` where gamma is the short arc from ``a`` to ``b`` on S^1.

        The arc and its chord bound a circular segment. The arc sweeps the
        chord's principal angle, plus ``2 pi sign(span)`` when ``y`` lies
        inside that segment.
        """
        a = a / np.linalg.norm(a, axis=1, keepdims=True)
        b = b / np.linalg.norm(b, axis=1, keepdims=True)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        span = np.arctan2(cross, np.einsum("ij,ij->i", a, b))
        chord, degenerate = self.edge_transports(a, b, y, "pl")
        mid = a + b
        mn = np.linalg.norm(mid, axis=1)
        degenerate |= mn <= 1e-12
        mid = mid / np.maximum(mn, 1e-300)[:, None]
        yn = float(np.linalg.norm(y))
        # height of y above the chord line toward the arc
        height = mid @ y - np.einsum("ij,ij->i", mid, a)
        inside = (yn < 1.0) & (height > 0)
        # y on the arc itself
        on_arc = (abs(yn - 1.0) <= X_TOL) & (height >= -X_TOL)
        degenerate |= on_arc
        return chord + 2 * np.pi * np.sign(span) * inside, degenerate

    def loop_class(self, total):
        return np.rint(np.asarray(total) / (2 * np.pi)).astype(np.int64).reshape(-1, 1)


class RP2QTarget(TargetManifold):
    """Projective plane as unit uniaxial Q-tensors in ``R^5``; ``X`` is the top-eigenvalue tie locus."""

    def __init__(self):
        super().__init__("rp2q", 5, 2, Z2, RP2_DELTA0, math.sqrt(2.0 / 3.0))

    def dist_to_X(self, z):
        # nearest tie: average the top two eigenvalues (Hoffman-Wielandt), distance (l1 - l2)/sqrt(2)
        w = np.linalg.eigvalsh(q_to_matrix(z))
        return (w[..., 2] - w[..., 1]) / _S2

    def retract(self, z):
        z = np.asarray(z, dtype=float)
        n, gap = _leading(z)
        if np.any(gap / _S2 <= X_TOL):
            raise DegenerateInputError("point within tolerance of the eigenvalue-tie locus")
        return director_to_q(n)

    def director(self, z) -> np.ndarray:
        n, gap = _leading(np.asarray(z, dtype=float))
        if np.any(gap / _S2 <= X_TOL):
            raise DegenerateInputError("point within tolerance of the eigenvalue-tie locus")
        return _canonical_sign(n)

    def classify_loop(self, samples) -> GroupElement:
        n = self.director(np.asarray(samples, dtype=float))
        if len(n) < 2:
            return Z2.zero()
        cur = n[0]
        for i in range(1, len(n) + 1):
            nxt = n[i % len(n)]
            dot = float(cur @ nxt)
            if abs(dot) <= 1e-12:
                raise RefineNeeded("lifted gap reaches pi/2", (i - 1, i % len(n)))
            cur = nxt if dot > 0 else -nxt
        # cur is the lift of the start point after one turn
        return Z2.element(0 if float(cur @ n[0]) > 0 else 1)

    def representatives(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Canonical director of each point and a mask of points too close to ``X``."""
        n, gap = _leading(np.asarray(z, dtype=float))
        return _canonical_sign(n), gap / _S2 <= X_TOL

    def _lift_paths(self, path, L, start, y):
        """Continue directors along ``path(idx, t) - y`` for all paths at once.

        ``L`` bounds the speed of each path in R^5 and ``start`` holds the
        shifted start points. Returns the end director of each lifted path
        begun at the canonical representative of its start, plus a
        degeneracy mask.
        """
        n_paths = len(start)
        t = np.zeros(n_paths)
        cur, gap = _leading(start)
        cur = _canonical_sign(cur)
        degenerate = gap / _S2 <= X_TOL
        active = np.flatnonzero(~degenerate & (L > 0))
        steps = 0
        while len(active):
            steps += 1
            if steps > MAX_PATH_STEPS:
                degenerate[active] = True
                break
            # distance to X is 1-Lipschitz; step keeps it above half and the rotation under 1/2 rad
            g = gap[active] / _S2
            h = np.minimum(1 - t[active], g / (4 * L[active]))
            t_new = t[active] + h
            t_new[1 - t_new < 1e-15] = 1.0
            n_new, gap_new = _leading(path(active, t_new) - y)
            flip = np.einsum("ij,ij->i", n_new, cur[active]) < 0
            n_new[flip] *= -1
            cur[active] = n_new
            gap[active] = gap_new
            t[active] = t_new
            bad = gap_new / _S2 <= X_TOL
            degenerate[active[bad]] = True
            active = active[(t_new < 1.0) & ~bad]
        return cur, degenerate

    def edge_transports(self, za, zb, y, mode: str = "pl"):
        za = np.asarray(za, dtype=float)
        zb = np.asarray(zb, dtype=float)
        y = np.asarray(y, dtype=float)
        if mode == "pl":
            d = zb - za

            def path(idx, t):
                return za[idx] + t[:, None] * d[idx]
            L = np.linalg.norm(d, axis=1)
        elif mode == "geodesic":
            na = self.director(za)
            nb = self.director(zb)
            flip = np.einsum("ij,ij->i", na, nb) < 0
            nb = np.where(flip[:, None], -nb, nb)
            ang = np.arccos(np.clip(np.einsum("ij,ij->i", na, nb), -1, 1))
            perp = nb - np.einsum("ij,ij->i", na, nb)[:, None] * na
            pn = np.linalg.norm(perp, axis=1, keepdims=True)
            perp = np.where(pn > 1e-15, perp / np.maximum(pn, 1e-300), 0.0)

            def path(idx, t):
                a = ang[idx] * t
                return director_to_q(np.cos(a)[:, None] * na[idx] + np.sin(a)[:, None] * perp[idx])
            # |d/dt Q(n(t))| <= sqrt(6) * angle in Frobenius norm
            L = _S6 * ang
        else:
            raise ValueError(f"unknown interpolation mode {mode!r}")
        end, degenerate = self._lift_paths(path, L, za - y, y)
        target_rep, bad_b = self.representatives(zb - y)
        degenerate |= bad_b
        bits = (np.einsum("ij,ij->i", end, target_rep) < 0).astype(np.int64)
        return bits, degenerate

    def loop_class(self, total):
        return (np.rint(np.asarray(total)).astype(np.int64) % 2).reshape(-1, 1)


CIRCLE = SphereTarget(2)
SPHERE3 = SphereTarget(3)
RP2Q = RP2QTarget()

TARGETS = {"circle": CIRCLE, "sphere3": SPHERE3, "rp2q": RP2Q}


def sphere(k: int) -> SphereTarget:
    return {2: CIRCLE, 3: SPHERE3}.get(k) or SphereTarget(k)


def get_target(name: str) -> TargetManifold:
    try:
        return TARGETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown target {name!r}; choose from {sorted(TARGETS)}") from None


def retract(t: TargetManifold, z):
    return t.retract(z)


def classify_loop(t: TargetManifold, samples) -> GroupElement:
    return t.classify_loop(samples)


def dist_to_X(t: TargetManifold, z):
    return t.dist_to_X(z)
