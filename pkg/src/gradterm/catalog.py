"""Named test metrics, sections and scalar functions used by the checks and the CLI."""
from __future__ import annotations

import numpy as np

from .bundle import MetricField
from .grids import ProductGrid

# ---------------------------------------------------------------- scalar functions on the unit disk
# (phi, dbar phi); all vanish on |z| = 1


def _bump1(z):
    return 1 - np.abs(z) ** 2


SCALAR_FUNCTIONS = {
    "bump": (lambda z: _bump1(z) ** 2, lambda z: -2 * z * _bump1(z)),
    "z_bump3": (lambda z: z * _bump1(z) ** 3, lambda z: -3 * z * z * _bump1(z) ** 2),
    "zbar_bump2": (
        lambda z: np.conj(z) * _bump1(z) ** 2,
        lambda z: _bump1(z) ** 2 - 2 * np.abs(z) ** 2 * _bump1(z),
    ),
    "linear_bump": (lambda z: _bump1(z) + 0j, lambda z: -z),
    "zbar_bump": (lambda z: np.conj(z) * _bump1(z), lambda z: 1 - 2 * np.abs(z) ** 2 + 0j),
    "zero": (lambda z: np.zeros_like(z, dtype=complex), lambda z: np.zeros_like(z, dtype=complex)),
}

# smooth at the rim: dbar phi also vanishes there, so lattice clipping costs O(h^2)
SMOOTH_RIM_FUNCTIONS = ("bump", "z_bump3", "zbar_bump2")


def scalar_function(name: str):
    try:
        return SCALAR_FUNCTIONS[name]
    except KeyError:
        raise KeyError(f"unknown test function {name!r}; choose from {sorted(SCALAR_FUNCTIONS)}") from None


# ---------------------------------------------------------------- metrics


def metric_identity(grid: ProductGrid, rank: int = 1, **_):
    return np.broadcast_to(np.eye(rank, dtype=complex), grid.shape + (rank, rank)).copy()


def metric_gaussian(grid: ProductGrid, rank: int = 1, K: float = 1.0, **_):
    w = np.exp(-K * grid.abs2())
    return w[..., None, None] * np.eye(rank)


def metric_rank2(grid: ProductGrid, rank: int = 2, c: float = 0.5, **_):
    """``[[1 + |z1|^2, c z1], [c conj(z1), 1 + |z1|^2 / 2]]``; positive for ``|c| < 1``."""
    if rank != 2:
        raise ValueError("rank2 metric has rank 2")
    z1 = np.broadcast_to(grid.coordinate(0), grid.shape)
    a = np.abs(z1) ** 2
    G = np.empty(grid.shape + (2, 2), dtype=complex)
    G[..., 0, 0] = 1 + a
    G[..., 0, 1] = c * z1
    G[..., 1, 0] = c * np.conj(z1)
    G[..., 1, 1] = 1 + 0.5 * a
    return G


def metric_singular(grid: ProductGrid, rank: int = 1, a: float = 0.75, scale: float = 1.0, **_):
    """``exp(-scale |z1|^(2a)) I``; curvature ``scale a^2 |z1|^(2a-2)`` is L^p for ``p < 1/(1-a)``."""
    z1 = np.broadcast_to(grid.coordinate(0), grid.shape)
    w = np.exp(-scale * np.abs(z1) ** (2 * a))
    return w[..., None, None] * np.eye(rank)


METRICS = {
    "identity": metric_identity,
    "gaussian": metric_gaussian,
    "rank2": metric_rank2,
    "singular": metric_singular,
}


def make_metric(name: str, grid: ProductGrid, rank: int = 1, twist: float = 0.0, **params) -> MetricField:
    try:
        build = METRICS[name]
    except KeyError:
        raise KeyError(f"unknown metric {name!r}; choose from {sorted(METRICS)}") from None
    return MetricField(build(grid, rank=rank, **params), grid, twist=twist, name=name)


def singular_curvature_integral(a: float, p: float, radius: float, scale: float = 1.0) -> float:
    """Closed form of ``\\int_{|z| < radius} (scale a^2 |z|^(2a-2))^p dA``; ``inf`` if divergent."""
    e = (2 * a - 2) * p + 2
    if e <= 0:
        return np.inf
    return (scale * a * a) ** p * 2 * np.pi * radius ** e / e


def singular_budget_table(a: float, N: int, spacings=(0.1, 0.05, 0.025), w_spacing: float = 0.2,
                          radius: float = 1.0, bound_radius: float = 1.1) -> list:
    """Measured ``\\int |Theta|^(N/(N-2))`` for the singular metric at each spacing.

    Each row carries the closed-form value over the same polydisk and the ratio
    to the previous (coarser) row.  A stable budget has ratios near 1; a
    divergent one keeps growing as the lattice approaches the origin.
    """
    from .bundle import chern_curvature, curvature_budget, curvature_pointwise_norm
    from .grids import build_disk_grid, product_grid

    p = N / (N - 2)
    rows = []
    for s in spacings:
        G = product_grid([build_disk_grid(radius, s), build_disk_grid(radius, w_spacing)], bound_radius=bound_radius)
        theta = chern_curvature(make_metric("singular", G, a=a), directions=(0,))
        value = curvature_budget(curvature_pointwise_norm(theta), N, G)
        wvol = G.factors[1].size * G.factors[1].cell_area
        rows.append({"spacing": s, "budget": value, "closed_form": singular_curvature_integral(a, p, radius) * wvol,
                     "ratio": value / rows[-1]["budget"] if rows else None})
    return rows


# ---------------------------------------------------------------- sections


def rim_profile(grid: ProductGrid) -> np.ndarray:
    """Smooth function of ``z1`` vanishing on the boundary circles of factor 0."""
    plane = grid.factors[0]
    a = np.abs(np.broadcast_to(grid.coordinate(0), grid.shape)) ** 2
    prof = (plane.outer ** 2 - a) / plane.outer ** 2
    if plane.inner > 0:
        prof = prof * (a - plane.inner ** 2) / plane.outer ** 2
    return prof


def transverse_cutoff(grid: ProductGrid) -> np.ndarray:
    """``prod_k (1 - |z_k|^2/R_k^2)^2`` over the non-``z1`` factors."""
    out = np.ones(grid.shape)
    for k in range(1, grid.n):
        plane = grid.factors[k]
        a = np.abs(np.broadcast_to(grid.coordinate(k), grid.shape)) ** 2
        out = out * ((plane.outer ** 2 - a) / plane.outer ** 2) ** 2
    return out


def section_bump(grid: ProductGrid, rank: int = 1, vector=None, cutoff: bool = True, **_):
    """``(1 - |z1|^2/R^2) v``, optionally times the transverse cutoff."""
    v = np.ones(rank, dtype=complex) if vector is None else np.asarray(vector, dtype=complex)
    base = rim_profile(grid) * (transverse_cutoff(grid) if cutoff else 1.0)
    return base[..., None] * v


def section_bump_poly(grid: ProductGrid, rank: int = 1, vector=None, slope=None, cutoff: bool = True, **_):
    """``rim(z1) (v + w z1 + conj(w) z2) cutoff``: pointwise ``|dbar f| != |nabla f|``."""
    v = np.ones(rank, dtype=complex) if vector is None else np.asarray(vector, dtype=complex)
    w = (0.7 - 0.4j) * np.ones(rank) if slope is None else np.asarray(slope, dtype=complex)
    z1 = np.broadcast_to(grid.coordinate(0), grid.shape)
    poly = v + z1[..., None] * w
    if grid.n > 1:
        poly = poly + np.broadcast_to(grid.coordinate(1), grid.shape)[..., None] * np.conj(w) * 0.5
    base = rim_profile(grid) * (transverse_cutoff(grid) if cutoff else 1.0)
    return base[..., None] * poly


def section_random(grid: ProductGrid, rank: int = 1, rng=None, terms: int = 4, **_):
    """Random smooth section vanishing on ``(dD) x W`` and near ``dW``."""
    rng = np.random.default_rng() if rng is None else rng
    coords = [np.broadcast_to(grid.coordinate(k), grid.shape) for k in range(grid.n)]
    out = np.zeros(grid.shape + (rank,), dtype=complex)
    for _ in range(terms):
        arg = rng.uniform(0, 2 * np.pi)
        for z in coords:
            arg = arg + rng.normal(0, 1.5) * z.real + rng.normal(0, 1.5) * z.imag
        amp = rng.normal(size=rank) + 1j * rng.normal(size=rank)
        out = out + np.exp(1j * arg)[..., None] * amp
    return out * (rim_profile(grid) * transverse_cutoff(grid))[..., None]


SECTIONS = {
    "bump": section_bump,
    "bump_poly": section_bump_poly,
    "random": section_random,
}


def make_section(name: str, grid: ProductGrid, rank: int = 1, **params) -> np.ndarray:
    try:
        build = SECTIONS[name]
    except KeyError:
        raise KeyError(f"unknown section {name!r}; choose from {sorted(SECTIONS)}") from None
    return build(grid, rank=rank, **params)
