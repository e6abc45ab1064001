"""Oriented simplicial complexes, triangulated grids and their barycentric duals.

Top-dimensional cells of a grid complex are stored positively oriented;
lower-dimensional cells are stored as increasing vertex tuples. Boundary
signs follow the simplicial rule: omitting vertex ``i`` carries ``(-1)**i``.

The dual complex of a grid complex is the barycentric dual truncated at the
domain boundary, so its boundary operator is ``-(primal boundary)^T``. A chain
on the dual complex whose boundary vanishes is a cycle relative to the domain.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    pass


def permutation_parity(rows: np.ndarray) -> np.ndarray:
    """Parity (0 even, 1 odd) of the permutation sorting each row."""
    rows = np.asarray(rows)
    n = rows.shape[1] if rows.ndim == 2 else 0
    inv = np.zeros(rows.shape[0], dtype=np.int64)
    for a in range(n):
        for b in range(a + 1, n):
            inv += rows[:, a] > rows[:, b]
    return inv % 2


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box ``origin + [0, counts*spacing]`` subdivided into cubes."""

    origin: tuple
    spacing: tuple
    counts: tuple[int, ...]

    def __post_init__(self):
        # strings such as "1/3" become exact fractions
        for name in ("origin", "spacing"):
            vals = tuple(Fraction(v) if isinstance(v, str) else v for v in getattr(self, name))
            object.__setattr__(self, name, vals)
        if not (len(self.origin) == len(self.spacing) == len(self.counts)):
            raise MeshError("origin, spacing and counts must have equal length")
        if any(c < 1 for c in self.counts):
            raise MeshError("counts must be >= 1 on every axis")
        if any(not (float(h) > 0) for h in self.spacing):
            raise MeshError("spacing must be positive")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        """Number of vertices per axis."""
        return tuple(c + 1 for c in self.counts)

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_diameter(self) -> float:
        return float(np.sqrt(sum(float(h) ** 2 for h in self.spacing)))

    @property
    def lower(self) -> np.ndarray:
        return np.array([float(o) for o in self.origin])

    @property
    def upper(self) -> np.ndarray:
        return self.lower + np.array([float(h) * c for h, c in zip(self.spacing, self.counts)])

    def vertex_coords(self, exact: bool = False) -> np.ndarray:
        idx = np.indices(self.shape).reshape(self.dim, -1).T
        if exact:
            out = np.empty(idx.shape, dtype=object)
            for a in range(self.dim):
                o, h = Fraction(self.origin[a]), Fraction(self.spacing[a])
                out[:, a] = [o + h * int(i) for i in idx[:, a]]
            return out
        return np.array([float(o) for o in self.origin]) + idx * np.array([float(h) for h in self.spacing])

    def to_json(self) -> dict:
        return {"origin": [float(o) for o in self.origin],
                "spacing": [float(h) for h in self.spacing],
                "counts": [int(c) for c in self.counts]}

    @classmethod
    def from_json(cls, d: dict) -> "GridSpec":
        return cls(tuple(d["origin"]), tuple(d["spacing"]), tuple(int(c) for c in d["counts"]))


def _simplex_volumes(points: np.ndarray) -> np.ndarray:
    """Volumes of simplices given as an ``(N, j+1, ambient)`` float array."""
    j = points.shape[1] - 1
    if j == 0:
        return np.ones(points.shape[0])
    edges = points[:, 1:, :] - points[:, :1, :]
    gram = np.einsum("nik,njk->nij", edges, edges)
    det = np.linalg.det(gram)
    return np.sqrt(np.clip(det, 0.0, None)) / math.factorial(j)


def _exact_volume(pts) -> object:
    import sympy

    j = len(pts) - 1
    if j == 0:
        return sympy.Integer(1)
    base = pts[0]
    edges = [[sympy.Rational(p[k] - base[k]) for k in range(len(base))] for p in pts[1:]]
    m = sympy.Matrix(edges)
    return sympy.sqrt((m * m.T).det()) / math.factorial(j)


def merge_points(points: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Cluster points closer than ``tol`` (transitively); return representatives and labels."""
    from scipy.sparse.csgraph import connected_components
    from scipy.spatial import cKDTree

    n = len(points)
    if n == 0:
        return points, np.zeros(0, dtype=np.int64)
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray") if tol > 0 else np.zeros((0, 2), int)
    graph = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # relabel in order of first appearance for determinism
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    inv = rank[np.ravel(inv)]
    return points[np.sort(first)], inv.astype(np.int64)


class Complex:
    """A finite oriented simplicial complex embedded in ``R^ambient``.

    Parameters
    ----------
    vertices : array (nv, ambient)
    cells : dict or list mapping dimension j -> int array (n_j, j+1)
        Every face of a listed cell is added automatically (as an increasing
        tuple) when it is not already present in some orientation.
    """

    def __init__(self, vertices, cells, grid: GridSpec | None = None, exact: bool = False):
        self.exact = exact
        if exact:
            self.vertices = np.asarray(vertices, dtype=object)
            self._fvertices = self.vertices.astype(float)
        else:
            self.vertices = np.asarray(vertices, dtype=float)
            self._fvertices = self.vertices
        if self.vertices.ndim != 2:
            raise MeshError("vertices must be a 2D array")
        self.grid = grid
        if isinstance(cells, dict):
            given = {int(k): np.asarray(v, dtype=np.int64).reshape(-1, int(k) + 1) for k, v in cells.items()}
        else:
            given = {j: np.asarray(v, dtype=np.int64).reshape(-1, j + 1) for j, v in enumerate(cells)}
        top = max([j for j, v in given.items() if len(v)] + [0])
        self.dim = top
        self.cells: list[np.ndarray] = [None] * (top + 1)
        self._keys: list[dict] = [None] * (top + 1)
        self.cells[0] = np.arange(len(self.vertices), dtype=np.int64).reshape(-1, 1)
        for j in range(top, 0, -1):
            rows = [given.get(j, np.zeros((0, j + 1), dtype=np.int64))]
            if j < top and self.cells[j + 1] is not None and len(self.cells[j + 1]):
                upper = self.cells[j + 1]
                faces = np.concatenate([np.delete(upper, i, axis=1) for i in range(j + 2)])
                rows.append(np.sort(faces, axis=1))
            allrows = np.concatenate(rows) if rows else np.zeros((0, j + 1), dtype=np.int64)
            keys = np.sort(allrows, axis=1)
            _, first = np.unique(keys, axis=0, return_index=True)
            first.sort()
            self.cells[j] = allrows[first]
        if top > 0 and np.any(self.cells[top] >= len(self.vertices)):
            raise MeshError("cell references unknown vertex")
        self._bd: dict[int, sp.csr_matrix] = {}
        self._vol: dict[int, np.ndarray] = {}
        self._cent: dict[int, np.ndarray] = {}

    # -- construction helpers -------------------------------------------
    @classmethod
    def from_simplices(cls, points, simplices: Sequence[Sequence[int]], tol: float = 1e-9) -> "Complex":
        """Build a complex from possibly repeated points, merging points closer than ``tol``.

        Simplices that collapse under the merge are dropped. The merged vertex
        index of input point ``i`` is available as ``complex.point_map[i]``.
        """
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(len(pts), -1) if len(pts) else np.zeros((0, 1))
        merged, inv = merge_points(pts, tol)
        by_dim: dict[int, list] = {}
        for s in simplices:
            s2 = [int(inv[v]) for v in s]
            if len(set(s2)) != len(s2):
                continue
            by_dim.setdefault(len(s2) - 1, []).append(s2)
        out = cls(merged, {j: np.array(v) for j, v in by_dim.items()})
        out.point_map = inv
        return out

    # -- sizes / lookup -------------------------------------------------
    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    def n_cells(self, j: int) -> int:
        if j < 0 or j > self.dim:
            return 0
        return len(self.cells[j])

    def _key_table(self, j: int) -> dict:
        if self._keys[j] is None:
            rows = np.sort(self.cells[j], axis=1)
            self._keys[j] = {tuple(int(v) for v in r): i for i, r in enumerate(rows)}
        return self._keys[j]

    def find_cell(self, vertex_tuple: Sequence[int]) -> tuple[int, int]:
        """Return ``(cell_id, sign)`` of a cell given as a vertex tuple in any order."""
        j = len(vertex_tuple) - 1
        key = tuple(sorted(int(v) for v in vertex_tuple))
        try:
            cid = self._key_table(j)[key]
        except (KeyError, IndexError, TypeError):
            raise MeshError(f"unknown cell {tuple(vertex_tuple)}") from None
        stored = self.cells[j][cid]
        sign = -1 if (permutation_parity(np.array([list(vertex_tuple)]))[0]
                      != permutation_parity(stored[None, :])[0]) else 1
        return cid, sign

    # -- boundary -------------------------------------------------------
    def boundary_matrix(self, j: int) -> sp.csr_matrix:
        """Sparse integer matrix of shape (n_{j-1}, n_j)."""
        if j < 1 or j > self.dim:
            raise MeshError(f"no boundary map in dimension {j}")
        if j not in self._bd:
            cells = self.cells[j]
            n = len(cells)
            faces_sorted = np.sort(self.cells[j - 1], axis=1)
            stored_parity = permutation_parity(self.cells[j - 1])
            rows, cols, vals = [], [], []
            lookup = self._face_lookup(j - 1, faces_sorted)
            for i in range(j + 1):
                face = np.delete(cells, i, axis=1)
                fid = lookup(np.sort(face, axis=1))
                par = permutation_parity(face) ^ stored_parity[fid]
                sign = ((-1) ** i) * np.where(par == 1, -1, 1)
                rows.append(fid)
                cols.append(np.arange(n))
                vals.append(sign)
            mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(len(self.cells[j - 1]), n), dtype=np.int64)
            self._bd[j] = mat
        return self._bd[j]

    def _face_lookup(self, j: int, faces_sorted: np.ndarray):
        nv = max(len(self.vertices), 1)
        width = faces_sorted.shape[1]
        if width * math.log2(nv + 1) < 62:
            weights = (nv ** np.arange(width, dtype=np.int64)).astype(np.int64)
            keys = faces_sorted @ weights
            order = np.argsort(keys)
            skeys = keys[order]

            def lookup(q):
                qk = q @ weights
                pos = np.searchsorted(skeys, qk)
                pos = np.clip(pos, 0, len(skeys) - 1)
                if len(qk) and not np.all(skeys[pos] == qk):
                    raise MeshError("face missing from complex")
                return order[pos]
            return lookup
        table = self._key_table(j)

        def lookup(q):
            return np.array([table[tuple(int(v) for v in r)] for r in q], dtype=np.int64)
        return lookup

    def boundary_incidence(self, j: int, cell: int) -> list[tuple[int, int]]:
        """``[(facet_id, sign), ...]`` for cell ``cell`` of dimension ``j``."""
        if j < 1:
            raise MeshError("cell dimension must be >= 1")
        if cell < 0 or cell >= self.n_cells(j):
            raise MeshError(f"unknown cell id {cell} in dimension {j}")
        pairs = []
        for i in range(j + 1):
            face = tuple(np.delete(self.cells[j][cell], i))
            fid, s = self.find_cell(face)
            pairs.append((fid, ((-1) ** i) * s))
        return pairs

    # -- geometry -------------------------------------------------------
    def volumes(self, j: int) -> np.ndarray:
        if j not in self._vol:
            if self.exact:
                self._vol[j] = np.array([_exact_volume(self.vertices[c]) for c in self.cells[j]], dtype=object)
            else:
                self._vol[j] = _simplex_volumes(self._fvertices[self.cells[j]])
        return self._vol[j]

    def float_volumes(self, j: int) -> np.ndarray:
        v = self.volumes(j)
        return v.astype(float) if v.dtype == object else v

    def centroids(self, j: int) -> np.ndarray:
        if j not in self._cent:
            self._cent[j] = self._fvertices[self.cells[j]].mean(axis=1)
        return self._cent[j]

    def cell_points(self, j: int, ids=None) -> np.ndarray:
        cells = self.cells[j] if ids is None else self.cells[j][np.asarray(ids)]
        return self._fvertices[cells]

    def boundary_faces(self) -> np.ndarray:
        """Boolean mask over (dim-1)-cells lying on the boundary of the complex."""
        bd = self.boundary_matrix(self.dim)
        return np.asarray(abs(bd).sum(axis=1)).ravel() == 1

    def boundary_cells(self, j: int) -> np.ndarray:
        """Boolean mask over j-cells contained in the boundary of the complex."""
        d = self.dim
        mask = self.boundary_faces()
        if j == d:
            return np.zeros(self.n_cells(d), dtype=bool)
        for q in range(d - 1, j, -1):
            bdq = abs(self.boundary_matrix(q))
            mask = np.asarray(bdq @ mask.astype(np.int64)).ravel() > 0
        return mask

    def to_json(self) -> dict:
        if self.grid is not None:
            return {"kind": "grid", **self.grid.to_json(), "exact": self.exact}
        return {"kind": "simplicial",
                "vertices": self._fvertices.tolist(),
                "cells": {str(j): self.cells[j].tolist() for j in range(1, self.dim + 1)}}

    def __repr__(self) -> str:
        counts = ", ".join(str(self.n_cells(j)) for j in range(self.dim + 1))
        return f"Complex(dim={self.dim}, cells=[{counts}])"


def build_grid_complex(origin, spacing, counts, exact: bool = False) -> Complex:
    """Kuhn triangulation of a box: 2 triangles per square, 6 tetrahedra per cube."""
    d = len(counts)
    if np.isscalar(spacing):
        spacing = (spacing,) * d
    if np.isscalar(origin):
        origin = (origin,) * d
    grid = GridSpec(tuple(origin), tuple(spacing), tuple(int(c) for c in counts))
    shape = grid.shape
    base = np.indices(grid.counts).reshape(d, -1).T
    tops = []
    for perm in itertools.permutations(range(d)):
        steps = [np.zeros(d, dtype=np.int64)]
        for ax in perm:
            s = steps[-1].copy()
            s[ax] += 1
            steps.append(s)
        verts = [np.ravel_multi_index((base + s).T, shape) for s in steps]
        simplex = np.stack(verts, axis=1)
        # permutation sign equals the orientation of the Kuhn simplex
        sign = -1 if permutation_parity(np.array([perm]))[0] else 1
        if sign < 0:
            simplex[:, [-2, -1]] = simplex[:, [-1, -2]]
        tops.append(simplex)
    top = np.concatenate(tops)
    return Complex(grid.vertex_coords(exact=exact), {d: top}, grid=grid, exact=exact)


class DualComplex:
    """Barycentric dual of a full-dimensional simplicial complex, truncated at its boundary.

    Dual ``j``-cells are indexed by primal ``(d-j)``-cells. A dual cell is
    oriented so that (dual frame, primal frame) is positively oriented, which
    gives ``boundary_j = -(primal boundary_{d-j+1})^T`` for positively
    oriented top cells.
    """

    exact = False

    def __init__(self, primal: Complex):
        if primal.dim != primal.ambient_dim:
            raise MeshError("dual complex needs a full-dimensional primal complex")
        self.primal = primal
        self.dim = primal.dim
        self._vol: dict[int, np.ndarray] = {}
        self._bd: dict[int, sp.csr_matrix] = {}

    @property
    def grid(self) -> GridSpec | None:
        return self.primal.grid

    @property
    def ambient_dim(self) -> int:
        return self.dim

    def n_cells(self, j: int) -> int:
        return self.primal.n_cells(self.dim - j)

    def boundary_matrix(self, j: int) -> sp.csr_matrix:
        if j < 1 or j > self.dim:
            raise MeshError(f"no boundary map in dimension {j}")
        if j not in self._bd:
            self._bd[j] = (-self.primal.boundary_matrix(self.dim - j + 1).T).tocsr()
        return self._bd[j]

    def boundary_incidence(self, j: int, cell: int) -> list[tuple[int, int]]:
        col = self.boundary_matrix(j).getcol(cell).tocoo()
        return [(int(r), int(v)) for r, v in zip(col.row, col.data)]

    def centroids(self, j: int) -> np.ndarray:
        """Location of each dual j-cell: the barycenter of its primal partner."""
        return self.primal.centroids(self.dim - j)

    def interior(self, j: int) -> np.ndarray:
        """Mask of dual j-cells whose primal partner is not on the domain boundary."""
        return ~self.primal.boundary_cells(self.dim - j)

    def _flags(self, p: int):
        """Enumerate flags sigma_p < ... < sigma_d, returning (owner ids, barycenters)."""
        d = self.dim
        prim = self.primal
        owner = np.arange(prim.n_cells(d))
        pts = [prim.centroids(d)[owner]]
        for q in range(d - 1, p - 1, -1):
            bd = prim.boundary_matrix(q + 1).tocsc()
            new_owner, new_idx = [], []
            indptr, indices = bd.indptr, bd.indices
            counts = np.diff(indptr)[owner]
            rep = np.repeat(np.arange(len(owner)), counts)
            starts = indptr[owner]
            offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            new_owner = indices[np.repeat(starts, counts) + offs]
            new_idx = rep
            pts = [prim.centroids(q)[new_owner]] + [a[new_idx] for a in pts]
            owner = new_owner
        return owner, np.stack(pts, axis=1)

    def volumes(self, j: int) -> np.ndarray:
        if j not in self._vol:
            p = self.dim - j
            if j == 0:
                self._vol[j] = np.ones(self.n_cells(0))
            else:
                owner, pts = self._flags(p)
                vols = _simplex_volumes(pts)
                self._vol[j] = np.bincount(owner, weights=vols, minlength=self.n_cells(j))
        return self._vol[j]

    float_volumes = volumes

    def polyline(self, cell: int) -> np.ndarray:
        """Vertices of a dual 1-cell as a polyline oriented along the cell."""
        d = self.dim
        prim = self.primal
        bd = self.boundary_matrix(1).getcol(cell).tocoo()
        tops = {int(v): int(r) for r, v in zip(bd.row, bd.data)}
        mid = prim.centroids(d - 1)[cell]
        top_c = prim.centroids(d)
        pts = []
        if -1 in tops:
            pts.append(top_c[tops[-1]])
        pts.append(mid)
        if 1 in tops:
            pts.append(top_c[tops[1]])
        return np.array(pts)

    def to_json(self) -> dict:
        return {"kind": "dual", "primal": self.primal.to_json()}

    def __repr__(self) -> str:
        counts = ", ".join(str(self.n_cells(j)) for j in range(self.dim + 1))
        return f"DualComplex(dim={self.dim}, cells=[{counts}])"


def dual_complex(primal: Complex) -> DualComplex:
    return DualComplex(primal)


def complex_from_json(d: dict):
    kind = d.get("kind", "simplicial")
    if kind == "grid":
        g = GridSpec.from_json(d)
        return build_grid_complex(g.origin, g.spacing, g.counts, exact=bool(d.get("exact", False)))
    if kind == "dual":
        return DualComplex(complex_from_json(d["primal"]))
    if kind == "simplicial":
        cells = {int(k): np.asarray(v, dtype=np.int64) for k, v in d.get("cells", {}).items()}
        return Complex(np.asarray(d["vertices"], dtype=float), cells)
    raise MeshError(f"unknown complex kind {kind!r}")
