"""Chains with group coefficients over a fixed background complex.

A chain stores a sorted array of cell ids and an ``(k, rank)`` integer array of
coefficients, one row per cell, with zero rows removed. Cells carry the
orientation stored in the complex; a simplex given in the opposite order is
folded in with its coefficient negated.
"""
from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

from .coeff import CoefficientGroup, GroupElement, GroupError, Z


class ChainError(ValueError):
    pass


def _as_coords(group: CoefficientGroup, value) -> tuple[int, ...]:
    if isinstance(value, GroupElement):
        if value.group != group:
            raise GroupError(f"mismatched groups {value.group!r} and {group!r}")
        return value.coords
    if isinstance(value, (int, np.integer)):
        if group.rank != 1:
            raise ChainError("integer coefficient needs a rank-1 group")
        return (int(value),)
    return tuple(int(v) for v in value)


class Chain:
    """Formal sum of oriented cells of one dimension with coefficients in ``group``."""

    __slots__ = ("complex", "dim", "group", "ids", "coeffs")

    def __init__(self, complex, dim: int, group: CoefficientGroup = Z, ids=None, coeffs=None):
        self.complex = complex
        self.dim = int(dim)
        self.group = group
        if dim < 0 or dim > complex.dim:
            raise ChainError(f"dimension {dim} not present in {complex!r}")
        if ids is None:
            ids = np.zeros(0, dtype=np.int64)
            coeffs = np.zeros((0, group.rank), dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64).ravel()
        coeffs = np.asarray(coeffs, dtype=np.int64).reshape(len(ids), group.rank)
        if len(ids) and (ids.min() < 0 or ids.max() >= complex.n_cells(dim)):
            raise ChainError("cell id out of range")
        ids, coeffs = self._canonical(ids, coeffs)
        self.ids = ids
        self.coeffs = coeffs
        self.ids.setflags(write=False)
        self.coeffs.setflags(write=False)

    def _canonical(self, ids, coeffs):
        if len(ids) == 0:
            return ids, coeffs
        uniq, inv = np.unique(ids, return_inverse=True)
        summed = np.zeros((len(uniq), self.group.rank), dtype=np.int64)
        np.add.at(summed, np.ravel(inv), coeffs)
        summed = self.group.reduce(summed)
        keep = np.any(summed != 0, axis=1)
        return uniq[keep], summed[keep]

    # -- constructors ---------------------------------------------------
    @classmethod
    def zero(cls, complex, dim: int, group: CoefficientGroup = Z) -> "Chain":
        return cls(complex, dim, group)

    @classmethod
    def from_cells(cls, complex, dim: int, entries: Mapping | Iterable, group: CoefficientGroup = Z) -> "Chain":
        """Build from ``{cell_id: coefficient}`` or ``[(cell_id, coefficient), ...]``."""
        items = entries.items() if isinstance(entries, Mapping) else entries
        ids, coeffs = [], []
        for cid, val in items:
            ids.append(int(cid))
            coeffs.append(_as_coords(group, val))
        return cls(complex, dim, group, np.array(ids, dtype=np.int64),
                   np.array(coeffs, dtype=np.int64).reshape(len(ids), group.rank))

    @classmethod
    def from_simplices(cls, complex, entries: Iterable, group: CoefficientGroup = Z) -> "Chain":
        """Build from ``[(vertex_tuple, coefficient), ...]``; orientation is aligned to storage."""
        ids, coeffs, dim = [], [], None
        for verts, val in entries:
            cid, sign = complex.find_cell(verts)
            if dim is None:
                dim = len(verts) - 1
            elif dim != len(verts) - 1:
                raise ChainError("mixed simplex dimensions")
            ids.append(cid)
            coeffs.append([sign * c for c in _as_coords(group, val)])
        if dim is None:
            raise ChainError("no simplices given; use Chain.zero")
        return cls(complex, dim, group, np.array(ids, dtype=np.int64),
                   np.array(coeffs, dtype=np.int64).reshape(len(ids), group.rank))

    @classmethod
    def from_dense(cls, complex, dim: int, dense, group: CoefficientGroup = Z) -> "Chain":
        dense = np.asarray(dense, dtype=np.int64).reshape(complex.n_cells(dim), group.rank)
        nz = np.flatnonzero(np.any(group.reduce(dense) != 0, axis=1))
        return cls(complex, dim, group, nz, dense[nz])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.complex.n_cells(self.dim), self.group.rank), dtype=np.int64)
        out[self.ids] = self.coeffs
        return out

    # -- group structure -----------------------------------------------
    def _compatible(self, other: "Chain"):
        if not isinstance(other, Chain):
            raise ChainError("can only combine chains")
        if other.complex is not self.complex:
            raise ChainError("chains live on different complexes")
        if other.dim != self.dim:
            raise ChainError(f"dimension mismatch {self.dim} vs {other.dim}")
        if other.group != self.group:
            raise GroupError(f"mismatched groups {self.group!r} and {other.group!r}")

    def __add__(self, other: "Chain") -> "Chain":
        self._compatible(other)
        return Chain(self.complex, self.dim, self.group,
                     np.concatenate([self.ids, other.ids]), np.concatenate([self.coeffs, other.coeffs]))

    def __neg__(self) -> "Chain":
        return Chain(self.complex, self.dim, self.group, self.ids, -self.coeffs)

    def __sub__(self, other: "Chain") -> "Chain":
        return self + (-other)

    def __mul__(self, k: int) -> "Chain":
        return Chain(self.complex, self.dim, self.group, self.ids, int(k) * self.coeffs)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Chain):
            return NotImplemented
        return (other.complex is self.complex and other.dim == self.dim and other.group == self.group
                and np.array_equal(self.ids, other.ids) and np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None

    def __len__(self) -> int:
        return len(self.ids)

    def __bool__(self) -> bool:
        return len(self.ids) > 0

    def is_zero(self) -> bool:
        return len(self.ids) == 0

    def coefficient(self, cell: int) -> GroupElement:
        pos = np.searchsorted(self.ids, cell)
        if pos < len(self.ids) and self.ids[pos] == cell:
            return GroupElement(self.group, tuple(int(c) for c in self.coeffs[pos]))
        return self.group.zero()

    def items(self):
        for cid, row in zip(self.ids, self.coeffs):
            yield int(cid), GroupElement(self.group, tuple(int(c) for c in row))

    def with_group_map(self, group: CoefficientGroup, fn: Callable[[np.ndarray], np.ndarray]) -> "Chain":
        """Apply a coefficient homomorphism given on coordinate rows."""
        return Chain(self.complex, self.dim, group, self.ids, fn(self.coeffs))

    # -- operations ----------------------------------------------------
    def boundary(self) -> "Chain":
        if self.dim == 0:
            raise ChainError("boundary of a 0-chain is undefined")
        bd = self.complex.boundary_matrix(self.dim)
        sub = bd[:, self.ids]
        out = np.asarray(sub @ self.coeffs) if len(self.ids) else np.zeros((bd.shape[0], self.group.rank), dtype=np.int64)
        return Chain.from_dense(self.complex, self.dim - 1, out, self.group)

    def norms(self) -> np.ndarray:
        return self.group.norms(self.coeffs) if len(self.ids) else np.zeros(0, dtype=np.int64)

    def mass(self):
        if not len(self.ids):
            return 0 if getattr(self.complex, "exact", False) else 0.0
        vols = self.complex.volumes(self.dim)[self.ids]
        w = self.norms()
        if vols.dtype == object:
            return sum((int(a) * b for a, b in zip(w, vols)), 0)
        return float(np.dot(w, vols))

    def restrict(self, predicate) -> "Chain":
        mask = cell_mask(self.complex, self.dim, predicate)
        keep = mask[self.ids]
        return Chain(self.complex, self.dim, self.group, self.ids[keep], self.coeffs[keep])

    def augmentation(self) -> GroupElement:
        if self.dim != 0:
            raise ChainError("augmentation is defined on 0-chains only")
        total = self.coeffs.sum(axis=0) if len(self.ids) else np.zeros(self.group.rank, dtype=np.int64)
        return self.group.element(*[int(t) for t in total])

    def support(self) -> dict[int, set[int]]:
        """Closed support: carrier cells and all their faces, keyed by dimension."""
        out = {self.dim: set(int(i) for i in self.ids)}
        current = np.zeros(self.complex.n_cells(self.dim), dtype=bool)
        current[self.ids] = True
        for j in range(self.dim, 0, -1):
            bd = abs(self.complex.boundary_matrix(j))
            current = np.asarray(bd @ current.astype(np.int64)).ravel() > 0
            out[j - 1] = set(int(i) for i in np.flatnonzero(current))
        return out

    def support_points(self) -> np.ndarray:
        """Vertex coordinates of the closed support."""
        sup = self.support()
        verts = sorted(sup.get(0, set()))
        return self.complex.centroids(0)[verts]

    def to_json(self) -> dict:
        return {"dim": self.dim,
                "cells": [[cid, el.to_json()] for cid, el in self.items()],
                "group": self.group.to_json()}

    @classmethod
    def from_json(cls, d: dict, complex) -> "Chain":
        grp = CoefficientGroup.from_json(d["group"])
        return cls.from_cells(complex, int(d["dim"]), [(c, v) for c, v in d["cells"]], grp)

    def __repr__(self) -> str:
        return f"Chain(dim={self.dim}, cells={len(self.ids)}, group={self.group!r})"


def cell_mask(complex, dim: int, predicate) -> np.ndarray:
    """Turn a predicate into a boolean mask over cells of ``dim``.

    Accepted predicates: ``None`` (all cells), a boolean array, an iterable of
    cell ids, or a callable on ``(N, ambient)`` cell centroids returning a mask.
    """
    n = complex.n_cells(dim)
    if predicate is None:
        return np.ones(n, dtype=bool)
    if callable(predicate):
        mask = np.asarray(predicate(complex.centroids(dim)), dtype=bool).ravel()
        if mask.shape != (n,):
            raise ChainError("predicate must return one boolean per cell")
        return mask
    arr = np.asarray(list(predicate) if not isinstance(predicate, np.ndarray) else predicate)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ChainError("mask length does not match cell count")
        return arr
    mask = np.zeros(n, dtype=bool)
    mask[arr.astype(np.int64)] = True
    return mask


def boundary(S: Chain) -> Chain:
    return S.boundary()


def mass(S: Chain):
    return S.mass()


def restrict(S: Chain, predicate) -> Chain:
    return S.restrict(predicate)


def augmentation(S: Chain) -> GroupElement:
    return S.augmentation()


def support(S: Chain) -> dict[int, set[int]]:
    return S.support()
