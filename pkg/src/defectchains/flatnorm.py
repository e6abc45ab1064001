"""Flat norm and relative flat norm of chains on a fixed background complex.

``F(S) = min M(P) + M(Q)`` over decompositions ``S = dP + Q`` with ``P`` an
``(n+1)``-chain and ``Q`` an ``n``-chain on the same complex. Each coefficient
is written as ``sum_j d_j gamma_j`` over the group generators, so
``|g| = min sum |d_j|`` turns the problem into a linear program in the
nonnegative parts of the ``d_j``. Torsion coordinates get one integer slack
per cell (``n * z``), which makes the torsion case a mixed-integer program.

The LP relaxation is tried first (it is integral for boundary matrices of
simplicial grids over ``Z``). Solutions are rounded and the identity
``S = dP + Q`` is re-checked in exact integer arithmetic before a value is
reported; otherwise branch-and-bound takes over and, failing that, the
trivial decomposition ``P = 0, Q = S`` is returned as an upper bound.
"""
from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse.csgraph import dijkstra

from .chain import Chain, cell_mask

#: Enumeration cap for the brute-force oracle (cells in dimensions n and n+1).
ORACLE_CELL_CAP = 14
#: Enumeration cap for the brute-force oracle (number of candidate P chains).
ORACLE_CANDIDATE_CAP = 20_000_000

EXACTNESS = ("oracle-verified", "optimal", "upper-bound")


class FlatNormCapError(RuntimeError):
    """Instance exceeds the enumeration or solver size cap."""


@dataclass
class FlatDecomposition:
    """Witness ``S = dP + Q`` with value ``M(P|U) + M(Q|U)``."""

    value: object
    P: Chain
    Q: Chain
    exactness: str
    S: Chain = field(repr=False)
    lower_bound: float | None = None
    region: object = field(default=None, repr=False)

    def verify(self) -> bool:
        """Re-check ``S = dP + Q`` exactly and recompute the value."""
        if not (self.S == self.P.boundary() + self.Q):
            return False
        return _close(self.value, _witness_value(self.P, self.Q, self.region))

    def to_json(self) -> dict:
        return {"value": float(self.value), "exactness": self.exactness,
                "lower_bound": self.lower_bound, "P": self.P.to_json(), "Q": self.Q.to_json()}


def _close(a, b) -> bool:
    try:
        return abs(float(a) - float(b)) <= 1e-9 * max(1.0, abs(float(a)))
    except TypeError:
        return a == b


def _witness_value(P: Chain, Q: Chain, region):
    if region is None:
        return P.mass() + Q.mass()
    return P.restrict(region).mass() + Q.restrict(region).mass()


def _cost_weights(S: Chain, region, p_scale: float = 1.0):
    cx, n = S.complex, S.dim
    wq = np.asarray(cx.volumes(n), dtype=float)
    wp = np.asarray(cx.volumes(n + 1), dtype=float) * p_scale
    if region is not None:
        wq = wq * cell_mask(cx, n, region)
        wp = wp * cell_mask(cx, n + 1, region)
    return wp, wq


def _assemble(S: Chain, wp, wq):
    cx, grp = S.complex, S.group
    B = cx.boundary_matrix(S.dim + 1).astype(float)
    n0, n1 = B.shape
    gens = np.array(grp.generator_list(), dtype=float).reshape(-1, grp.rank)
    ngen = len(gens)
    gamma = sp.csr_matrix(gens.T)  # rank x ngen
    KB = sp.kron(gamma, B, format="csr")
    KI = sp.kron(gamma, sp.identity(n0), format="csr")
    blocks = [KB, -KB, KI, -KI]
    ntor = len(grp.torsion_orders)
    if ntor:
        T = np.zeros((grp.rank, ntor))
        for i, order in enumerate(grp.torsion_orders):
            T[grp.free_rank + i, i] = -order
        blocks.append(sp.kron(sp.csr_matrix(T), sp.identity(n0), format="csr"))
    A = sp.hstack(blocks, format="csr")
    b = S.to_dense().T.reshape(-1).astype(float)
    cost = np.concatenate([np.tile(wp, ngen), np.tile(wp, ngen), np.tile(wq, ngen), np.tile(wq, ngen),
                           np.zeros(ntor * n0)])
    nfree = 2 * ngen * (n0 + n1)
    lb = np.concatenate([np.zeros(nfree), np.full(ntor * n0, -np.inf)])
    ub = np.full(len(cost), np.inf)
    # a generator of order q is never worth stacking more than q // 2 times on one cell
    orders = np.array([grp.torsion_orders[int(np.flatnonzero(g)[0]) - grp.free_rank]
                       if np.count_nonzero(g) == 1 and np.flatnonzero(g)[0] >= grp.free_rank else 0
                       for g in gens], dtype=float)
    cap = np.where(orders > 0, orders // 2, np.inf)
    ub[:nfree] = np.concatenate([np.repeat(cap, n1), np.repeat(cap, n1), np.repeat(cap, n0), np.repeat(cap, n0)])
    if ntor and grp.free_rank == 0 and np.all(np.isfinite(cap)):
        # then every torsion multiple is bounded by the largest possible row sum
        reach = (np.abs(B).sum(axis=1).A.ravel().max(initial=0) + 1) * cap.max() * ngen + np.abs(b).max(initial=0)
        for i, order in enumerate(grp.torsion_orders):
            t = np.ceil(reach / order)
            lb[nfree + i * n0:nfree + (i + 1) * n0] = -t
            ub[nfree + i * n0:nfree + (i + 1) * n0] = t
    layout = dict(n0=n0, n1=n1, ngen=ngen, gens=gens.astype(np.int64))
    return A, b, cost, lb, ub, layout


def _decode(S: Chain, x: np.ndarray, layout) -> tuple[Chain, Chain]:
    n0, n1, ngen, gens = layout["n0"], layout["n1"], layout["ngen"], layout["gens"]
    xi = np.rint(x).astype(np.int64)
    o = 0
    pp = xi[o:o + ngen * n1].reshape(ngen, n1); o += ngen * n1
    pm = xi[o:o + ngen * n1].reshape(ngen, n1); o += ngen * n1
    qp = xi[o:o + ngen * n0].reshape(ngen, n0); o += ngen * n0
    qm = xi[o:o + ngen * n0].reshape(ngen, n0)
    Pd = (pp - pm).T @ gens
    Qd = (qp - qm).T @ gens
    cx, grp = S.complex, S.group
    return (Chain.from_dense(cx, S.dim + 1, Pd, grp), Chain.from_dense(cx, S.dim, Qd, grp))


def _solve(S: Chain, region, time_limit: float, p_scale: float = 1.0):
    """Return (P, Q, exactness, lower_bound)."""
    wp, wq = _cost_weights(S, region, p_scale)
    A, b, cost, lb, ub, layout = _assemble(S, wp, wq)
    has_torsion = bool(S.group.torsion_orders)
    if not has_torsion:
        res = linprog(cost, A_eq=A, b_eq=b, bounds=np.stack([lb, ub], axis=1), method="highs")
        if res.status == 0:
            x = res.x
            if np.all(np.abs(x - np.rint(x)) < 1e-6):
                P, Q = _decode(S, x, layout)
                if S == P.boundary() + Q:
                    val = float(np.dot(cost, np.rint(x)))
                    exact = "optimal" if val <= res.fun + 1e-7 * max(1.0, abs(res.fun)) else "upper-bound"
                    return P, Q, exact, float(res.fun)
    res = milp(cost, constraints=LinearConstraint(A, b, b), bounds=Bounds(lb, ub),
               integrality=np.ones(len(cost)),
               # HiGHS presolve has returned a non-optimal point as optimal on bounded torsion models
               options={"time_limit": time_limit, "presolve": False})
    if res.x is not None:
        P, Q = _decode(S, res.x, layout)
        if S == P.boundary() + Q:
            bound = getattr(res, "mip_dual_bound", None)
            exact = "optimal" if res.status == 0 else "upper-bound"
            return P, Q, exact, None if bound is None else float(bound)
    return Chain.zero(S.complex, S.dim + 1, S.group), S, "upper-bound", None


def flat_norm(S: Chain, *, certify: bool = False, time_limit: float = 60.0) -> FlatDecomposition:
    """Minimize ``M(P) + M(Q)`` over ``S = dP + Q`` on the complex of ``S``."""
    return _flat(S, None, certify, time_limit)


def relative_flat_norm(S: Chain, U, *, certify: bool = False, time_limit: float = 60.0) -> FlatDecomposition:
    """Minimize ``M(P|U) + M(Q|U)``; cells outside ``U`` are free.

    ``U`` is any predicate accepted by :func:`defectchains.chain.cell_mask`
    (callables are evaluated on cell centroids of both dimensions).
    """
    return _flat(S, U, certify, time_limit)


def _flat(S: Chain, region, certify: bool, time_limit: float) -> FlatDecomposition:
    if S.dim + 1 > S.complex.dim:
        raise ValueError("flat norm needs (n+1)-cells in the complex")
    if S.is_zero():
        P = Chain.zero(S.complex, S.dim + 1, S.group)
        return FlatDecomposition(0.0 if not S.complex.exact else 0, P, S, "optimal", S, 0.0, region)
    P, Q, exact, lower = _solve(S, region, time_limit)
    value = _witness_value(P, Q, region)
    dec = FlatDecomposition(value, P, Q, exact, S, lower, region)
    if certify and _oracle_size(S) is not None:
        ref = _oracle(S, region, coefficient_bound=2)
        if _close(ref.value, value):
            dec.exactness = "oracle-verified"
        elif float(ref.value) < float(value):
            dec = ref
    return dec


def minimize_mass_in_class(R: Chain, region=None, *, time_limit: float = 60.0) -> Chain:
    """Smallest-mass chain ``R - dP`` (mass counted in ``region``), with ``P`` free of charge."""
    if R.is_zero() or R.dim + 1 > R.complex.dim:
        return R
    P, Q, _, _ = _solve(R, region, time_limit, p_scale=0.0)
    return Q


# -- brute-force oracle ---------------------------------------------------

def _oracle_size(S: Chain):
    cx, n = S.complex, S.dim
    if cx.n_cells(n) + cx.n_cells(n + 1) > ORACLE_CELL_CAP:
        return None
    return cx.n_cells(n + 1)


def _candidate_coeffs(group, bound: int) -> np.ndarray:
    ranges = [range(-bound, bound + 1)] * group.free_rank + [range(n) for n in group.torsion_orders]
    return np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, group.rank)


def flat_norm_oracle(S: Chain, coefficient_bound: int = 2, U=None) -> FlatDecomposition:
    """Exhaustive minimum over every ``P`` with coefficients in a bounded set.

    Free coordinates of ``P`` range over ``[-coefficient_bound, coefficient_bound]``
    and torsion coordinates over all residues; ``Q = S - dP`` is then forced.
    """
    if _oracle_size(S) is None:
        raise FlatNormCapError(
            f"oracle needs at most {ORACLE_CELL_CAP} cells in dimensions {S.dim} and {S.dim + 1}")
    return _oracle(S, U, coefficient_bound)


def _oracle(S: Chain, region, coefficient_bound: int) -> FlatDecomposition:
    cx, grp, n = S.complex, S.group, S.dim
    n1 = cx.n_cells(n + 1)
    cand = _candidate_coeffs(grp, coefficient_bound)
    total = len(cand) ** n1
    if total > ORACLE_CANDIDATE_CAP:
        raise FlatNormCapError(f"{total} candidates exceed the oracle cap {ORACLE_CANDIDATE_CAP}")
    wp, wq = _cost_weights(S, region)
    B = cx.boundary_matrix(n + 1).toarray()
    s = S.to_dense()
    best_cost, best_idx = np.inf, None
    chunk = max(1, 2 ** 18 // max(1, n1 * grp.rank))
    digits = len(cand)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        choice = np.stack(np.unravel_index(idx, (digits,) * n1), axis=1) if n1 else np.zeros((len(idx), 0), int)
        P = cand[choice]  # (m, n1, rank)
        dP = np.einsum("ij,mjr->mir", B, P)
        Q = grp.reduce(s[None] - dP)
        m = len(idx)
        pn = grp.norms(P.reshape(-1, grp.rank)).reshape(m, n1) if n1 else np.zeros((m, 0))
        qn = grp.norms(Q.reshape(-1, grp.rank)).reshape(m, -1)
        cost = pn @ wp + qn @ wq
        k = int(np.argmin(cost))
        if cost[k] < best_cost - 1e-12:
            best_cost, best_idx = cost[k], idx[k]
    choice = np.array(np.unravel_index(best_idx, (digits,) * n1)) if n1 else np.zeros(0, int)
    Pbest = Chain.from_dense(cx, n + 1, cand[choice].reshape(n1, grp.rank), grp)
    Qbest = S - Pbest.boundary()
    value = _witness_value(Pbest, Qbest, region)
    return FlatDecomposition(value, Pbest, Qbest, "oracle-verified", S, float(best_cost), region)


# -- Euclidean 0-chains -----------------------------------------------------

def _transport(dist: np.ndarray, a: np.ndarray, mass: np.ndarray, ground=None) -> float:
    """Min cost to cancel supplies ``a`` by moving them at cost ``dist`` or discarding them at ``mass``.

    ``ground`` optionally gives the cost of moving one unit from each point
    to a free sink and source.
    """
    k = len(a)
    pairs = [(i, j) for i in range(k) for j in range(k) if i != j]
    n_g = 2 * k if ground is not None else 0
    ncols = len(pairs) + 2 * k + n_g
    A = np.zeros((k, ncols))
    cost = np.zeros(ncols)
    for c, (i, j) in enumerate(pairs):
        A[i, c] += 1
        A[j, c] -= 1
        cost[c] = dist[i, j]
    off = len(pairs)
    for i in range(k):
        A[i, off + 2 * i] = 1
        A[i, off + 2 * i + 1] = -1
        cost[off + 2 * i:off + 2 * i + 2] = mass[i]
        if ground is not None:
            A[i, off + 2 * k + 2 * i] = 1
            A[i, off + 2 * k + 2 * i + 1] = -1
            cost[off + 2 * k + 2 * i:off + 2 * k + 2 * i + 2] = ground[i]
    cost = np.where(np.isfinite(cost), cost, 1e300)
    res = linprog(cost, A_eq=A, b_eq=a, bounds=(0, None), method="highs")
    return float(res.fun)


def flat_norm_points(points, coeffs) -> float:
    """Flat norm in ``R^d`` of an integer 0-chain ``sum a_i [x_i]``.

    Solved as a transport problem: mass moves between points at Euclidean
    cost or is discarded at unit cost per unit multiplicity.
    """
    a = np.asarray(coeffs, dtype=float).ravel()
    k = len(a)
    if k == 0 or not np.any(a):
        return 0.0
    pts = np.asarray(points, dtype=float).reshape(k, -1)
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    return _transport(dist, a, np.ones(k))


_GRAPHS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _skeleton_graph(cx):
    """Weighted 1-skeleton with a ground node for 1-cells that have a single boundary vertex."""
    if cx in _GRAPHS:
        return _GRAPHS[cx]
    B = cx.boundary_matrix(1).tocsc()
    n0 = cx.n_cells(0)
    w = np.asarray(cx.float_volumes(1), dtype=float)
    counts = np.diff(B.indptr)
    two = np.flatnonzero(counts == 2)
    one = np.flatnonzero(counts == 1)
    a = np.concatenate([B.indices[B.indptr[two]], B.indices[B.indptr[one]]])
    b = np.concatenate([B.indices[B.indptr[two] + 1], np.full(len(one), n0)])
    wt = np.concatenate([w[two], w[one]])
    rows, cols, vals = np.concatenate([a, b]), np.concatenate([b, a]), np.concatenate([wt, wt])
    # parallel edges (several boundary cells of one vertex) keep their minimum weight
    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    first = np.ones(len(rows), dtype=bool)
    first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    G = sp.csr_matrix((vals[first], (rows[first], cols[first])), shape=(n0 + 1, n0 + 1))
    _GRAPHS[cx] = (G, n0)
    return G, n0


def flat_norm_graph(S: Chain) -> float:
    """Flat norm of a 0-chain over ``Z`` on its complex, via shortest paths on the 1-skeleton.

    A 1-chain ``P`` decomposes into paths between support points, so the
    minimum is a transport problem on graph distances. A 1-cell with a
    single boundary vertex (a truncated dual cell) acts as an edge to a free
    ground node. The transport matrix is totally unimodular, so the value
    equals the integer flat norm computed by :func:`flat_norm`.
    """
    if S.dim != 0 or S.group.rank != 1 or S.group.torsion_orders:
        raise ValueError("flat_norm_graph handles 0-chains over Z")
    if S.is_zero():
        return 0.0
    G, ground = _skeleton_graph(S.complex)
    cx = S.complex
    src = np.asarray(S.ids)
    D = dijkstra(G, directed=False, indices=src)
    dist = D[:, src]
    has_ground = np.isfinite(D[:, ground]).any()
    mass = np.asarray(cx.float_volumes(0), dtype=float)[src]
    return _transport(dist, S.coeffs[:, 0].astype(float), mass, D[:, ground] if has_ground else None)
