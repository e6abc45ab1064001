"""BV lifting of circle-valued fields across a cut chain.

A cut ``R`` is a dual ``(d-1)``-chain with ``boundary(R) = S(u)``. Dual
``(d-1)``-cells correspond to primal edges, so ``R`` assigns an integer ``m(e)``
to every edge. A lift ``theta`` satisfies, on every edge ``a -> b``,

    theta(b) - theta(a) = T(e) + 2 pi m(e)

where ``T(e)`` is the phase increment of ``u`` along the edge. The right-hand
side sums to zero around every primal 2-face exactly when ``boundary(R) = S``,
so the equations are consistent and a spanning tree determines ``theta``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .chain import Chain
from .field import SampledField
from .flatnorm import minimize_mass_in_class
from .singular import SingularChain, SingularError, homotopy_cobordism, singular_set
from .target import CIRCLE

#: Tolerance for the holonomy check on each edge.
HOLONOMY_TOL = 1e-9


class LiftingError(RuntimeError):
    pass


def _phase_increments(u: SampledField) -> np.ndarray:
    """Principal phase increments of ``u`` along primal edges (exact arc angles for ``S^1`` samples)."""
    e = u.complex.cells[1]
    mode = "geodesic" if u.is_N_valued(CIRCLE) else "pl"
    vals, deg = CIRCLE.edge_transports(u.values[e[:, 0]], u.values[e[:, 1]], np.zeros(2), mode)
    if deg.any():
        raise LiftingError("field vanishes on an edge")
    return vals


def cut_chain(S: SingularChain, complex=None, *, minimize: bool = True, anchor=None) -> Chain:
    """A dual ``(d-1)``-chain ``R`` with ``boundary(R) = S``.

    ``R`` starts as the cobordism witness between a constant field and the
    field that produced ``S``, which is the branch cut along the ray opposite
    the constant value. With ``minimize`` it is then replaced by the
    smallest-mass chain with the same boundary.
    """
    u = S.field
    if u is None:
        raise LiftingError("singular chain carries no field")
    if complex is not None and complex is not S.chain.complex:
        raise LiftingError("cut chains live on the complex of the singular chain")
    if S.target != CIRCLE.name:
        raise LiftingError("cut chains are built for circle-valued fields")
    d = u.dim
    if anchor is None:
        # a far constant in a fixed generic direction
        direction = np.array([np.cos(2.0), np.sin(2.0)])
        anchor = S.y + 3.0 * (u.Lambda + 1.0) * direction
    u0 = SampledField(u.grid, np.tile(np.asarray(anchor, dtype=float), (u.grid.n_vertices, 1)), "circle")
    cob = homotopy_cobordism(u0, u, CIRCLE, S.y, interpolation=("pl", S.interpolation))
    if not cob.S1.same_cells(S):
        raise SingularError("cobordism was computed at a different offset than the singular chain")
    R = cob.chain
    if minimize and not R.is_zero():
        R = minimize_mass_in_class(R)
    if R.dim != d - 1 or not R.boundary() == S.chain:
        raise LiftingError("cut chain boundary does not match the singular set")
    return R


@dataclass
class LiftedField:
    """Per-vertex phase ``theta`` with ``u = (cos theta, sin theta)`` and its cut."""

    theta: np.ndarray
    cut: Chain
    jumps: dict = field(default_factory=dict)
    variation: dict = field(default_factory=dict)
    base_vertex: int = 0

    def to_json(self) -> dict:
        return {"theta": self.theta.tolist(), "cut": self.cut.to_json(),
                "jumps": {str(k): v for k, v in self.jumps.items()}, "variation": self.variation,
                "base_vertex": self.base_vertex}


def _spanning_order(n_vertices: int, edges: np.ndarray, cut_mask: np.ndarray, base: int):
    """0-1 BFS parents: cut edges cost 1, others 0; ties broken by vertex index."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_vertices)]
    for eid, (a, b) in enumerate(edges):
        adj[a].append((b, eid))
        adj[b].append((a, eid))
    for lst in adj:
        lst.sort()
    dist = np.full(n_vertices, np.iinfo(np.int64).max)
    parent = np.full(n_vertices, -1)
    dist[base] = 0
    dq = deque([base])
    order = []
    done = np.zeros(n_vertices, dtype=bool)
    while dq:
        v = dq.popleft()
        if done[v]:
            continue
        done[v] = True
        order.append(v)
        for w, eid in adj[v]:
            c = int(cut_mask[eid])
            if dist[v] + c < dist[w]:
                dist[w] = dist[v] + c
                parent[w] = eid
                (dq.append if c else dq.appendleft)(w)
    return order, parent


def lift_circle_field(u: SampledField, S: SingularChain | None = None, R: Chain | None = None, *,
                      minimize_cut: bool = True) -> LiftedField:
    """Unwrap the phase of an ``S^1``-valued field with jumps of ``2 pi m(e)`` across ``R``."""
    if not u.is_N_valued(CIRCLE, tol=1e-9):
        raise LiftingError("lifting needs samples on the unit circle")
    if S is None:
        S = singular_set(u, CIRCLE)
    if R is None:
        R = cut_chain(S, minimize=minimize_cut)
    cx = u.complex
    edges = cx.cells[1]
    m = R.to_dense()[:, 0] if not R.is_zero() else np.zeros(len(edges), dtype=np.int64)
    T = _phase_increments(u)
    target_inc = T + 2 * np.pi * m
    cut_mask = m != 0
    touched = np.zeros(cx.n_cells(0), dtype=bool)
    touched[edges[cut_mask].ravel()] = True
    free = np.flatnonzero(~touched)
    base = int(free[0]) if len(free) else 0
    order, parent = _spanning_order(cx.n_cells(0), edges, cut_mask, base)
    if len(order) != cx.n_cells(0):
        raise LiftingError("grid is disconnected")
    raw = np.arctan2(u.values[:, 1], u.values[:, 0])
    theta = np.zeros(cx.n_cells(0))
    theta[base] = raw[base]
    for v in order[1:]:
        eid = parent[v]
        a, b = edges[eid]
        theta[v] = theta[a] + target_inc[eid] if v == b else theta[b] - target_inc[eid]
    # snap to exact representatives of the sampled angle
    k = np.rint((theta - raw) / (2 * np.pi))
    theta = raw + 2 * np.pi * k
    resid = theta[edges[:, 1]] - theta[edges[:, 0]] - target_inc
    bad = np.flatnonzero(np.abs(resid) > HOLONOMY_TOL)
    if len(bad):
        raise LiftingError(f"holonomy inconsistent on {len(bad)} edges (first edge {int(bad[0])})")
    jumps = {int(e): int(m[e]) for e in np.flatnonzero(cut_mask)}
    variation = lift_variation(u, theta, T, R)
    return LiftedField(theta, R, jumps, variation, base)


def lift_variation(u: SampledField, theta: np.ndarray, T: np.ndarray, R: Chain) -> dict:
    """``|D theta|`` split into the absolutely continuous part and ``2 pi M(R)``, against ``|Du|``."""
    cx = u.complex
    d = u.dim
    tops = cx.cells[d]
    # unwrap within each simplex from its first vertex using the continuous increments
    edges = cx.cells[1]
    nv = cx.n_cells(0)
    keys = edges.min(axis=1) * nv + edges.max(axis=1)
    order = np.argsort(keys)
    local = np.zeros(tops.shape)
    for j in range(1, d + 1):
        a, b = tops[:, 0], tops[:, j]
        pos = order[np.searchsorted(keys, np.minimum(a, b) * nv + np.maximum(a, b), sorter=order)]
        forward = edges[pos, 0] == a
        local[:, j] = np.where(forward, T[pos], -T[pos])
    X = cx.vertices[tops]
    E = X[:, 1:] - X[:, :1]
    grad = np.linalg.solve(E, local[:, 1:, None])[..., 0]
    vol = cx.float_volumes(d)
    ac = float(np.dot(vol, np.linalg.norm(grad, axis=1)))
    jump = float(2 * np.pi * R.mass()) if not R.is_zero() else 0.0
    du = u.total_variation()
    total = ac + jump
    return {"absolutely_continuous": ac, "jump": jump, "total": total, "du": du,
            "ratio": total / du if du > 0 else 0.0, "cut_mass": float(R.mass()) if not R.is_zero() else 0.0}
