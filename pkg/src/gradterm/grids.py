"""Lattice discretizations of disks, annuli and their products.

Nodes sit on the uniform lattice ``((i + offset) * h, (j + offset) * h)``
clipped to the open annulus ``inner < |z| < outer``.  The default offset of
one half keeps the origin off the lattice, so a disk grid is automatically a
punctured-disk grid as well.

Fields are plain numpy arrays.  On a :class:`PlanarGrid` a scalar field has
shape ``(M,)``; on a :class:`ProductGrid` it has shape ``grid.shape`` and
section-valued fields carry trailing fiber axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

INTERIOR = 0
NEAR_OUTER = 1
NEAR_INNER = 2


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PlanarGrid:
    """Lattice nodes of a disk (``inner == 0``) or an annulus."""

    outer: float
    inner: float
    spacing: float
    offset: float = 0.5
    nodes: np.ndarray = field(init=False, repr=False)
    ij: np.ndarray = field(init=False, repr=False)
    boundary_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 <= self.inner < self.outer):
            raise GridError(f"need 0 <= inner < outer, got inner={self.inner}, outer={self.outer}")
        if self.spacing <= 0:
            raise GridError("spacing must be positive")
        h = self.spacing
        n = int(np.ceil(self.outer / h)) + 1
        k = np.arange(-n, n + 1)
        i, j = np.meshgrid(k, k, indexing="ij")
        i, j = i.ravel(), j.ravel()
        z = (i + self.offset) * h + 1j * (j + self.offset) * h
        r = np.abs(z)
        keep = (r > self.inner) & (r < self.outer)
        if not keep.any():
            raise GridError(f"spacing {h} too coarse: no lattice node inside the domain")
        z, i, j, r = z[keep], i[keep], j[keep], r[keep]
        mask = np.full(z.shape, INTERIOR, dtype=np.int8)
        mask[r > self.outer - h] = NEAR_OUTER
        if self.inner > 0:
            mask[r < self.inner + h] = NEAR_INNER
        object.__setattr__(self, "nodes", z)
        object.__setattr__(self, "ij", np.stack([i, j], axis=1))
        object.__setattr__(self, "boundary_mask", mask)
        for arr in (z, self.ij, mask):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2

    @property
    def kind(self) -> str:
        return "disk" if self.inner == 0 else "annulus"

    @property
    def exact_area(self) -> float:
        return np.pi * (self.outer ** 2 - self.inner ** 2)

    @cached_property
    def _index_map(self) -> tuple:
        lo = self.ij.min(axis=0) - 2
        hi = self.ij.max(axis=0) + 2
        table = np.full(tuple(hi - lo + 1), -1, dtype=np.intp)
        table[self.ij[:, 0] - lo[0], self.ij[:, 1] - lo[1]] = np.arange(self.size)
        return table, lo

    def neighbor(self, di: int, dj: int) -> np.ndarray:
        """Index of the node at lattice offset ``(di, dj)``; -1 where absent."""
        table, lo = self._index_map
        return table[self.ij[:, 0] - lo[0] + di, self.ij[:, 1] - lo[1] + dj]

    def _difference_matrix(self, axis: int) -> sp.csr_matrix:
        # central where both neighbours exist, else second-order one-sided,
        # else first-order one-sided
        step = (1, 0) if axis == 0 else (0, 1)
        fwd = self.neighbor(*step)
        bwd = self.neighbor(-step[0], -step[1])
        fwd2 = self.neighbor(2 * step[0], 2 * step[1])
        bwd2 = self.neighbor(-2 * step[0], -2 * step[1])
        h = self.spacing
        rows, cols, vals = [], [], []

        def put(m, idx, coef):
            rows.append(m)
            cols.append(idx)
            vals.append(coef / h)

        for m in range(self.size):
            if fwd[m] >= 0 and bwd[m] >= 0:
                put(m, fwd[m], 0.5)
                put(m, bwd[m], -0.5)
            elif fwd[m] >= 0 and fwd2[m] >= 0:
                put(m, m, -1.5)
                put(m, fwd[m], 2.0)
                put(m, fwd2[m], -0.5)
            elif bwd[m] >= 0 and bwd2[m] >= 0:
                put(m, m, 1.5)
                put(m, bwd[m], -2.0)
                put(m, bwd2[m], 0.5)
            elif fwd[m] >= 0:
                put(m, m, -1.0)
                put(m, fwd[m], 1.0)
            elif bwd[m] >= 0:
                put(m, m, 1.0)
                put(m, bwd[m], -1.0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.size, self.size))

    @cached_property
    def dx(self) -> sp.csr_matrix:
        return self._difference_matrix(0)

    @cached_property
    def dy(self) -> sp.csr_matrix:
        return self._difference_matrix(1)

    @cached_property
    def dz(self) -> sp.csr_matrix:
        return ((self.dx - 1j * self.dy) * 0.5).tocsr()

    @cached_property
    def dzbar(self) -> sp.csr_matrix:
        return ((self.dx + 1j * self.dy) * 0.5).tocsr()

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "outer_radius": self.outer,
            "inner_radius": self.inner,
            "spacing": self.spacing,
            "offset": self.offset,
            "node_count": self.size,
        }


def build_annulus_grid(outer: float, inner: float, spacing: float, offset: float = 0.5) -> PlanarGrid:
    """Lattice grid of ``{inner < |z| < outer}``.

    Raises :class:`GridError` for an empty annulus or a spacing coarser than a
    quarter of the annulus width.
    """
    if not (0 <= inner < outer):
        raise GridError(f"need 0 <= inner < outer, got inner={inner}, outer={outer}")
    if spacing >= (outer - inner) / 4:
        raise GridError(f"spacing {spacing} must be < (outer - inner)/4 = {(outer - inner) / 4}")
    return PlanarGrid(outer=float(outer), inner=float(inner), spacing=float(spacing), offset=offset)


def build_disk_grid(radius: float, spacing: float, offset: float = 0.5) -> PlanarGrid:
    return build_annulus_grid(radius, 0.0, spacing, offset)


@dataclass(frozen=True, eq=False)
class ProductGrid:
    """Cartesian product of planar grids; factor 0 is the ``z1`` plane.

    ``bound_radius`` is the radius of the enclosing polydisk: every node must
    satisfy ``|z_k| < bound_radius`` in every factor.
    """

    factors: tuple
    bound_radius: float

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise GridError("a product grid needs at least one factor")
        for k, g in enumerate(self.factors):
            if np.max(np.abs(g.nodes)) >= self.bound_radius:
                raise GridError(f"factor {k} is not contained in the polydisk of radius {self.bound_radius}")

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple:
        return tuple(g.size for g in self.factors)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([g.cell_area for g in self.factors]))

    def coordinate(self, k: int) -> np.ndarray:
        """``z_k`` broadcast against ``self.shape``."""
        idx = [1] * self.n
        idx[k] = -1
        return self.factors[k].nodes.reshape(idx)

    def coordinates(self) -> list:
        return [np.broadcast_to(self.coordinate(k), self.shape) for k in range(self.n)]

    def abs2(self) -> np.ndarray:
        """``|z|^2 = sum_k |z_k|^2`` on every node."""
        return sum(np.abs(self.coordinate(k)) ** 2 for k in range(self.n)) * np.ones(self.shape)

    def boundary_mask(self, k: int) -> np.ndarray:
        """Nodes whose ``k``-th coordinate lies in the boundary collar of factor ``k``."""
        idx = [1] * self.n
        idx[k] = -1
        flag = (self.factors[k].boundary_mask != INTERIOR).reshape(idx)
        return np.broadcast_to(flag, self.shape)

    def describe(self) -> dict:
        return {
            "n": self.n,
            "bound_radius": self.bound_radius,
            "node_count": self.size,
            "factors": [g.describe() for g in self.factors],
        }


def product_grid(factors: Sequence[PlanarGrid], bound_radius: float | None = None) -> ProductGrid:
    if bound_radius is None:
        bound_radius = 1.0 + max(g.outer for g in factors)
    return ProductGrid(tuple(factors), float(bound_radius))


def apply_along(op, values: np.ndarray, axis: int) -> np.ndarray:
    """Apply a sparse matrix to ``values`` along ``axis``."""
    moved = np.moveaxis(values, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    out = op @ flat
    return np.moveaxis(out.reshape((op.shape[0],) + moved.shape[1:]), 0, axis)


def integrate(values: np.ndarray, grid) -> complex | float:
    """Midpoint rule: node values times the (product) cell area.

    ``values`` must have the grid's node shape; summation runs in node-index
    order so results are reproducible bit for bit.
    """
    values = np.asarray(values)
    expected = (grid.size,) if isinstance(grid, PlanarGrid) else grid.shape
    if values.shape != expected:
        raise GridError(f"field shape {values.shape} does not match grid shape {expected}")
    w = grid.cell_area if isinstance(grid, PlanarGrid) else grid.cell_volume
    return values.ravel().sum() * w


def wirtinger_derivatives(values: np.ndarray, grid, axis: int = 0):
    """Return ``(d/dz, d/dzbar)`` of a field along the planar factor ``axis``.

    On a :class:`PlanarGrid` ``axis`` must be 0; on a :class:`ProductGrid` it
    selects the complex coordinate ``z_{axis+1}``.  Trailing fiber axes are
    carried along untouched.
    """
    plane = grid if isinstance(grid, PlanarGrid) else grid.factors[axis]
    values = np.asarray(values, dtype=complex)
    return apply_along(plane.dz, values, axis), apply_along(plane.dzbar, values, axis)


def field_to_pairs(values: np.ndarray) -> list:
    """Flatten a complex field to ``[[re, im], ...]`` in node-index order."""
    v = np.asarray(values, dtype=complex).ravel()
    return np.stack([v.real, v.imag], axis=1).tolist()


def field_from_pairs(pairs, shape) -> np.ndarray:
    a = np.asarray(pairs, dtype=float)
    return (a[:, 0] + 1j * a[:, 1]).reshape(shape)
