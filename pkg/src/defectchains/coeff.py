"""Finitely generated abelian coefficient groups with a word-length norm.

A group is ``Z^r x Z/n_1 x ... x Z/n_s``. Elements are stored as integer
coordinate vectors of length ``r + s`` (free coordinates first, torsion
residues reduced into ``[0, n_i)`` after). The norm of an element is the
length of the shortest word in a fixed generating set that represents it.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

#: Radius cap for BFS norm evaluation with non-standard generators.
BFS_RADIUS_CAP = 64


class GroupError(ValueError):
    """Invalid group descriptor or mismatched operands."""


class GroupNormError(RuntimeError):
    """Norm evaluation exceeded the BFS radius cap."""


def _hnf_pivots(rows: list[list[int]], ncols: int) -> list[int]:
    """Row-reduce an integer matrix (Euclid steps) and return the pivot values."""
    mat = [list(r) for r in rows]
    pivots = []
    r0 = 0
    for c in range(ncols):
        # gather rows with nonzero entry in column c and reduce them to one
        while True:
            nz = [i for i in range(r0, len(mat)) if mat[i][c] != 0]
            if len(nz) <= 1:
                break
            piv = min(nz, key=lambda i: abs(mat[i][c]))
            for i in nz:
                if i == piv:
                    continue
                q = mat[i][c] // mat[piv][c]
                mat[i] = [a - q * b for a, b in zip(mat[i], mat[piv])]
        nz = [i for i in range(r0, len(mat)) if mat[i][c] != 0]
        if not nz:
            pivots.append(0)
            continue
        i = nz[0]
        mat[r0], mat[i] = mat[i], mat[r0]
        pivots.append(abs(mat[r0][c]))
        r0 += 1
    return pivots


@dataclass(frozen=True)
class CoefficientGroup:
    """Descriptor of ``Z^free_rank x Z/n_1 x ... x Z/n_s``.

    ``generators`` is a tuple of coordinate tuples; ``None`` means the
    standard basis. Descriptors compare structurally.
    """

    free_rank: int = 1
    torsion_orders: tuple[int, ...] = ()
    generators: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "torsion_orders", tuple(int(n) for n in self.torsion_orders))
        if self.free_rank < 0:
            raise GroupError("free_rank must be nonnegative")
        for n in self.torsion_orders:
            if n < 2:
                raise GroupError(f"torsion order {n} < 2")
        if self.generators is not None:
            gens = tuple(tuple(self._reduce_tuple(g)) for g in self.generators)
            if any(len(g) != self.rank for g in gens):
                raise GroupError("generator length does not match group rank")
            object.__setattr__(self, "generators", gens)
            if not self._generates(gens):
                raise GroupError("generators do not generate the group")

    # -- basic structure -------------------------------------------------
    @property
    def rank(self) -> int:
        """Number of stored coordinates (free + torsion)."""
        return self.free_rank + len(self.torsion_orders)

    @property
    def is_standard(self) -> bool:
        return self.generators is None or self.generators == self.standard_generators()

    @property
    def is_finite(self) -> bool:
        return self.free_rank == 0

    @property
    def order(self) -> int | None:
        if not self.is_finite:
            return None
        return int(np.prod(self.torsion_orders, dtype=np.int64)) if self.torsion_orders else 1

    def standard_generators(self) -> tuple[tuple[int, ...], ...]:
        eye = np.eye(self.rank, dtype=int)
        return tuple(tuple(int(v) for v in row) for row in eye)

    def generator_list(self) -> tuple[tuple[int, ...], ...]:
        return self.generators if self.generators is not None else self.standard_generators()

    def _reduce_tuple(self, coords: Sequence[int]) -> tuple[int, ...]:
        coords = [int(c) for c in coords]
        r = self.free_rank
        for i, n in enumerate(self.torsion_orders):
            coords[r + i] %= n
        return tuple(coords)

    def _generates(self, gens) -> bool:
        rows = [list(g) for g in gens]
        r = self.free_rank
        for i, n in enumerate(self.torsion_orders):
            rel = [0] * self.rank
            rel[r + i] = n
            rows.append(rel)
        if not rows:
            return self.rank == 0
        pivots = _hnf_pivots(rows, self.rank)
        return all(p == 1 for p in pivots)

    # -- element construction -------------------------------------------
    def element(self, *coords: int) -> "GroupElement":
        if len(coords) == 1 and isinstance(coords[0], (tuple, list, np.ndarray)):
            coords = tuple(coords[0])
        if len(coords) != self.rank:
            raise GroupError(f"expected {self.rank} coordinates, got {len(coords)}")
        return GroupElement(self, self._reduce_tuple(coords))

    def zero(self) -> "GroupElement":
        return GroupElement(self, (0,) * self.rank)

    def generator(self, j: int) -> "GroupElement":
        return GroupElement(self, self.generator_list()[j])

    def reduce(self, coords: np.ndarray) -> np.ndarray:
        """Reduce torsion columns of an ``(..., rank)`` integer array in place-safe copy."""
        out = np.array(coords, dtype=np.int64, copy=True)
        r = self.free_rank
        for i, n in enumerate(self.torsion_orders):
            out[..., r + i] %= n
        return out

    def elements(self) -> list["GroupElement"]:
        """All elements of a finite group."""
        if not self.is_finite:
            raise GroupError("infinite group")
        grids = np.indices(self.torsion_orders).reshape(len(self.torsion_orders), -1).T
        return [GroupElement(self, tuple(int(v) for v in row)) for row in grids]

    # -- norm -----------------------------------------------------------
    def norms(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized word-length norm of an ``(N, rank)`` array of reduced coordinates."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.rank)
        if self.is_standard:
            r = self.free_rank
            out = np.abs(coords[:, :r]).sum(axis=1)
            for i, n in enumerate(self.torsion_orders):
                t = coords[:, r + i] % n
                out = out + np.minimum(t, n - t)
            return out
        uniq, inv = np.unique(coords, axis=0, return_inverse=True)
        vals = np.array([_bfs_norm(self, tuple(int(v) for v in row)) for row in uniq], dtype=np.int64)
        return vals[np.ravel(inv)]

    # -- serialization --------------------------------------------------
    def to_json(self) -> dict:
        d = {"free_rank": self.free_rank, "torsion": list(self.torsion_orders)}
        if self.generators is not None and not self.is_standard:
            d["generators"] = [list(g) for g in self.generators]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "CoefficientGroup":
        gens = d.get("generators")
        return cls(int(d["free_rank"]), tuple(d.get("torsion", ())),
                   None if gens is None else tuple(tuple(g) for g in gens))

    def __repr__(self) -> str:
        parts = ["Z"] * self.free_rank + [f"Z/{n}" for n in self.torsion_orders]
        name = " x ".join(parts) if parts else "0"
        if not self.is_standard:
            name += f" gens={list(self.generators)}"
        return f"CoefficientGroup({name})"


@dataclass(frozen=True)
class GroupElement:
    group: CoefficientGroup
    coords: tuple[int, ...] = field(default=())

    @property
    def free_part(self) -> tuple[int, ...]:
        return self.coords[: self.group.free_rank]

    @property
    def torsion_part(self) -> tuple[int, ...]:
        return self.coords[self.group.free_rank:]

    def _check(self, other: "GroupElement"):
        if not isinstance(other, GroupElement):
            return NotImplemented
        if other.group != self.group:
            raise GroupError(f"mismatched groups {self.group!r} and {other.group!r}")
        return None

    def __add__(self, other):
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        return self.group.element([a + b for a, b in zip(self.coords, other.coords)])

    def __sub__(self, other):
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        return self.group.element([a - b for a, b in zip(self.coords, other.coords)])

    def __neg__(self):
        return self.group.element([-a for a in self.coords])

    def __mul__(self, k: int):
        if not isinstance(k, (int, np.integer)):
            return NotImplemented
        return self.group.element([int(k) * a for a in self.coords])

    __rmul__ = __mul__

    def __bool__(self) -> bool:
        return any(self.coords)

    def norm(self) -> int:
        return group_norm(self)

    def to_json(self) -> list[int]:
        return list(self.coords)

    def __repr__(self) -> str:
        return f"{self.group!r}{list(self.coords)}"


def add(a: GroupElement, b: GroupElement) -> GroupElement:
    return a + b


def neg(a: GroupElement) -> GroupElement:
    return -a


def group_norm(g: GroupElement) -> int:
    """Word-length norm: minimal ``sum |d_j|`` over ``g = sum d_j gamma_j``."""
    grp = g.group
    return int(grp.norms(np.array([g.coords]))[0])


@lru_cache(maxsize=None)
def _finite_distance_table(group: CoefficientGroup) -> dict[tuple[int, ...], int]:
    gens = group.generator_list()
    steps = [g for g in gens] + [group._reduce_tuple([-c for c in g]) for g in gens]
    start = (0,) * group.rank
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for s in steps:
            nxt = group._reduce_tuple([a + b for a, b in zip(cur, s)])
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


@lru_cache(maxsize=4096)
def _bfs_norm(group: CoefficientGroup, target: tuple[int, ...]) -> int:
    if group.is_finite:
        return _finite_distance_table(group)[target]
    gens = group.generator_list()
    steps = [g for g in gens] + [group._reduce_tuple([-c for c in g]) for g in gens]
    start = (0,) * group.rank
    if target == start:
        return 0
    seen = {start}
    frontier = [start]
    for radius in range(1, BFS_RADIUS_CAP + 1):
        nxt_frontier = []
        for cur in frontier:
            for s in steps:
                nxt = group._reduce_tuple([a + b for a, b in zip(cur, s)])
                if nxt == target:
                    return radius
                if nxt not in seen:
                    seen.add(nxt)
                    nxt_frontier.append(nxt)
        frontier = nxt_frontier
    raise GroupNormError(f"norm of {list(target)} exceeds BFS radius cap {BFS_RADIUS_CAP}")


def enumerate_word_norms(group: CoefficientGroup, max_len: int) -> dict[tuple[int, ...], int]:
    """Brute-force norms of every element reachable by words of length <= max_len."""
    gens = group.generator_list()
    letters = [np.array(g) for g in gens] + [-np.array(g) for g in gens]
    best: dict[tuple[int, ...], int] = {(0,) * group.rank: 0}
    words: list[np.ndarray] = [np.zeros(group.rank, dtype=np.int64)]
    for length in range(1, max_len + 1):
        new_words = []
        for w in words:
            for letter in letters:
                v = group.reduce(w + letter)
                key = tuple(int(c) for c in v)
                if key not in best:
                    best[key] = length
                new_words.append(v)
        words = new_words
    return best


#: Integers with generator 1.
Z = CoefficientGroup(1)
#: Integers mod 2.
Z2 = CoefficientGroup(0, (2,))


def cyclic(n: int) -> CoefficientGroup:
    return CoefficientGroup(0, (n,))


def elements_from(group: CoefficientGroup, rows: Iterable[Sequence[int]]) -> list[GroupElement]:
    return [group.element(list(r)) for r in rows]
