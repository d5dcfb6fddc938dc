"""Hermitian metrics, Chern connection and curvature on product grids.

Conventions
-----------
A metric is stored as its Gram matrix ``G`` at every node, shape
``grid.shape + (r, r)``, so that ``<f, g>_h = g^H G f`` and
``|f|^2 = f^H G f = sum h_{a b-bar} f^a conj(f^b)``.

The Chern connection in the holomorphic frame is
``nabla_j f = d_j f + G^{-1} (d_j G) f`` and ``nabla_{j-bar} = dbar_j``.
Curvature is stored as the Hermitian-form matrices

    T[j, k] = -d_j dbar_k G + (dbar_k G) G^{-1} (d_j G),

so that ``f^H T[j, k] f = sum Theta_{a b-bar j k-bar} f^a conj(f^b)``.  With this
sign, for ``f`` vanishing on ``(dD) x W``,

    ||dbar_1 f||^2 = -(Theta_11 f, f) + ||nabla_1 f||^2,

and the Gaussian weight ``exp(-K|z|^2)`` has curvature ``+K`` in every
diagonal direction.  The sign was fixed by requiring that identity on the
rank-one Gaussian case.

Curvature norms are Frobenius norms in an ``h``-orthonormal fiber frame,
summed Euclidean-orthonormally over the base directions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ProductGrid, apply_along, integrate


class MetricError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MetricField:
    """Gram matrices of a Hermitian metric on a product grid.

    ``twist`` is the exponent ``K`` of the extra weight; :meth:`twisted`
    returns the Gram matrices of ``exp(-K|z|^2) h``.
    """

    values: np.ndarray
    grid: ProductGrid
    twist: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape[:-2] != self.grid.shape or v.shape[-1] != v.shape[-2]:
            raise MetricError(f"metric shape {v.shape} does not match grid {self.grid.shape} + (r, r)")
        dev = np.max(np.abs(v - np.conj(np.swapaxes(v, -1, -2))))
        if dev > 1e-12 * max(1.0, np.max(np.abs(v))):
            raise MetricError(f"metric is not Hermitian (max deviation {dev:.3g})")
        v = 0.5 * (v + np.conj(np.swapaxes(v, -1, -2)))
        lam = np.linalg.eigvalsh(v)[..., 0]
        if np.any(lam <= 0):
            bad = np.unravel_index(int(np.argmin(lam)), lam.shape)
            raise MetricError(f"metric is not positive definite at node {bad} (eigenvalue {lam[bad]:.3g})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.twist < 0:
            raise MetricError("twist exponent must be >= 0")

    @property
    def rank(self) -> int:
        return self.values.shape[-1]

    def weight(self) -> np.ndarray:
        return np.exp(-self.twist * self.grid.abs2())

    def twisted(self) -> np.ndarray:
        return self.values * self.weight()[..., None, None]

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.values)


def _d(values, grid, j, bar):
    plane = grid.factors[j]
    return apply_along(plane.dzbar if bar else plane.dz, values, j)


def connection_form(h: MetricField, j: int) -> np.ndarray:
    """``G^{-1} d_j G`` at every node."""
    return h.inverse() @ _d(h.values, h.grid, j, bar=False)


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """``values[..., j, k, :, :]`` is the form matrix ``T[j, k]``.

    Only the requested base directions are stored; ``directions`` lists them.
    """

    values: np.ndarray
    directions: tuple
    metric: MetricField

    def component(self, j: int, k: int) -> np.ndarray:
        return self.values[..., self.directions.index(j), self.directions.index(k), :, :]


def chern_curvature(h: MetricField, grid: ProductGrid | None = None, directions=None,
                    include_twist: bool = False) -> CurvatureField:
    """Curvature forms of ``h`` by finite differences.

    With ``include_twist`` the result is the curvature of
    ``exp(-K|z|^2) h``, obtained from that of ``h`` by the exact additive
    term ``K delta_{jk} G`` and the overall weight.
    """
    grid = h.grid if grid is None else grid
    dirs = tuple(range(grid.n)) if directions is None else tuple(directions)
    G = h.values
    Ginv = h.inverse()
    dG = {j: _d(G, grid, j, bar=False) for j in dirs}
    dbG = {k: _d(G, grid, k, bar=True) for k in dirs}
    m = len(dirs)
    out = np.empty(grid.shape + (m, m, h.rank, h.rank), dtype=complex)
    for a, j in enumerate(dirs):
        for b, k in enumerate(dirs):
            mixed = _d(dbG[k], grid, j, bar=False)
            out[..., a, b, :, :] = -mixed + dbG[k] @ Ginv @ dG[j]
    if include_twist and h.twist:
        eye = np.eye(m)
        out = out + h.twist * eye[:, :, None, None] * G[..., None, None, :, :]
        out = out * h.weight()[..., None, None, None, None]
    return CurvatureField(out, dirs, h)


def covariant_derivative(f: np.ndarray, h: MetricField, j: int, holomorphic: bool = True) -> np.ndarray:
    """``nabla_{z_j} f`` (holomorphic) or ``nabla_{zbar_j} f = dbar_j f``."""
    f = np.asarray(f, dtype=complex)
    if not holomorphic:
        return _d(f, h.grid, j, bar=True)
    theta = connection_form(h, j)
    return _d(f, h.grid, j, bar=False) + np.einsum("...ab,...b->...a", theta, f)


def inner(a: np.ndarray, b: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Pointwise ``<a, b> = b^H G a``."""
    return np.einsum("...b,...ba,...a->...", np.conj(b), G, a)


def pointwise_norm2(f: np.ndarray, h) -> np.ndarray:
    """``|f|_h^2``; ``h`` is a :class:`MetricField`, a Gram array, or ``None`` for Euclidean."""
    f = np.asarray(f)
    if h is None:
        return np.sum(np.abs(f) ** 2, axis=-1)
    G = h.values if isinstance(h, MetricField) else h
    return np.maximum(inner(f, f, G).real, 0.0)


def lp_norm(f: np.ndarray, h, p: float, grid: ProductGrid) -> float:
    """``(\\int |f|_h^p)^(1/p)`` by the midpoint rule."""
    if p < 1:
        raise ValueError("p must be >= 1")
    a2 = pointwise_norm2(f, h)
    return float(integrate(a2 ** (p / 2), grid).real ** (1 / p))


def orthonormal_frame(G: np.ndarray) -> np.ndarray:
    """``L^{-1}`` with ``G = L L^H``; maps form matrices to an orthonormal frame."""
    return np.linalg.inv(np.linalg.cholesky(G))


def curvature_pointwise_norm(theta: CurvatureField, h: MetricField | None = None, component=None) -> np.ndarray:
    """``|Theta|`` (all stored directions) or ``|Theta_{jk}|`` for ``component=(j, k)``."""
    h = theta.metric if h is None else h
    Linv = orthonormal_frame(h.values)
    Lh = np.conj(np.swapaxes(Linv, -1, -2))
    if component is not None:
        T = theta.component(*component)
        return np.linalg.norm(Linv @ T @ Lh, axis=(-2, -1))
    T = Linv[..., None, None, :, :] @ theta.values @ Lh[..., None, None, :, :]
    return np.sqrt(np.sum(np.abs(T) ** 2, axis=(-4, -3, -2, -1)))


def curvature_form(theta: CurvatureField, f: np.ndarray, j: int = 0, k: int = 0) -> np.ndarray:
    """``sum Theta_{a b-bar j k-bar} f^a conj(f^b)`` pointwise."""
    return np.einsum("...b,...ba,...a->...", np.conj(f), theta.component(j, k), f)


def curvature_budget(norm: np.ndarray, N: int, grid: ProductGrid) -> float:
    """``\\int |Theta|^(N/(N-2))`` over the grid."""
    return float(integrate(np.asarray(norm) ** (N / (N - 2)), grid).real)
