"""Integral operators with nonnegative kernels and the Young-type bound

    ||V f||_q <= A^(1/r) ||f||_p,   1/r = 1 + 1/q - 1/p,
    A = sup_x \\int h(x, y)^r dy.

The discrete operator is ``(V f)_x = sum_y K[x, y] f_y w``.  Off-diagonal
``K`` is the kernel at the node pair; the diagonal is the cell average of the
kernel, integrated exactly.  The constant ``A`` uses cell averages of ``h^r``
on the diagonal, which dominate ``K[x, x]^r`` by Jensen, so the three-factor
Hoelder argument carries over to the discrete sums without loss.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _quad

from .cauchy import cell_integral_invabs
from .grids import PlanarGrid, ProductGrid
from .report import Report, inequality, timed

Q_INFINITY = 1e6


@dataclass(frozen=True)
class KernelSpec:
    """``kind`` is ``"cauchy_slice"`` (``1/(pi |z1 - w1|)``) or ``"custom"``.

    A custom kernel is a vectorized callable ``func(x, y)`` of node
    coordinates (complex arrays; for product grids, arrays with a trailing
    axis of length ``n``), evaluated on the dense node-pair matrix.  It must be
    finite on the diagonal.
    """

    kind: str = "cauchy_slice"
    func: Optional[Callable] = None

    @classmethod
    def constant(cls, c: float = 1.0) -> "KernelSpec":
        return cls("custom", lambda x, y: np.full(np.broadcast(x, y).shape[:2], float(c)))


def _plane(grid):
    return grid if isinstance(grid, PlanarGrid) else grid.factors[0]


def _transverse_volume(grid) -> float:
    """Discrete volume of the factors other than ``z1``."""
    if isinstance(grid, PlanarGrid):
        return 1.0
    return float(np.prod([g.size * g.cell_area for g in grid.factors[1:]]))


def _weight(grid) -> float:
    return grid.cell_area if isinstance(grid, PlanarGrid) else grid.cell_volume


def self_cell_average(r: float, spacing: float) -> float:
    """Mean of ``(pi |w|)^(-r)`` over the square cell of side ``spacing`` centred at 0.

    Finite for ``r < 2``; for ``r >= 2`` (non-integrable) the ``r``-th power
    of the ``r = 1`` average is returned instead.
    """
    a = spacing / 2
    if r == 1:
        total = float(cell_integral_invabs(0j, 0j, spacing)) / np.pi
    elif r < 2:
        # polar coordinates over the eighth-triangle 0 <= theta <= pi/4
        ang = _quad.quad(lambda t: np.cos(t) ** (r - 2), 0, np.pi / 4)[0]
        total = 8 * a ** (2 - r) / (2 - r) * ang * np.pi ** (-r)
    else:
        return self_cell_average(1.0, spacing) ** r
    return total / spacing ** 2


def cauchy_slice_matrix(plane: PlanarGrid, r: float = 1.0) -> np.ndarray:
    """``K[x, y] = (pi |x - y|)^(-r)`` with the cell average on the diagonal."""
    z = plane.nodes
    d = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(d, 1.0)
    k = (np.pi * d) ** (-r)
    np.fill_diagonal(k, self_cell_average(r, plane.spacing))
    return k


def _dense_nodes(grid):
    if isinstance(grid, PlanarGrid):
        return grid.nodes
    return np.stack([c.ravel() for c in grid.coordinates()], axis=-1)


def _custom_matrix(kernel: KernelSpec, grid) -> np.ndarray:
    x = _dense_nodes(grid)
    if x.ndim == 1:
        k = kernel.func(x[:, None], x[None, :])
    else:
        k = kernel.func(x[:, None, :], x[None, :, :])
    k = np.asarray(k, dtype=float)
    if np.any(k < 0) or not np.all(np.isfinite(k)):
        raise ValueError("kernel must be finite and nonnegative on all node pairs")
    return k


def apply_potential(kernel: KernelSpec, f: np.ndarray, grid) -> np.ndarray:
    """``(V_h f)(x) = \\int h(x, y) f(y) dy`` at every node."""
    f = np.asarray(f)
    if kernel.kind == "cauchy_slice":
        plane = _plane(grid)
        k = cauchy_slice_matrix(plane)
        if isinstance(grid, PlanarGrid):
            return k @ f * grid.cell_area
        # kernel sees only z1: sum out the other factors first
        marginal = f.reshape(plane.size, -1).sum(axis=1) * (grid.cell_volume / plane.cell_area)
        out = k @ marginal * plane.cell_area
        return np.broadcast_to(out.reshape((-1,) + (1,) * (grid.n - 1)), grid.shape).copy()
    k = _custom_matrix(kernel, grid)
    return (k @ f.ravel() * _weight(grid)).reshape(f.shape)


def analytic_young_bound(r: float, n: int, bound_radius: float) -> float:
    """``(pi R)^(n-1) \\int_{|w| < 2R} (pi |w|)^(-r) dA`` for ``r < 2``."""
    if r >= 2:
        return np.inf
    R = bound_radius
    disk = np.pi ** (-r) * 2 * np.pi * (2 * R) ** (2 - r) / (2 - r)
    return (np.pi * R) ** (n - 1) * disk


def young_constant(kernel: KernelSpec, r: float, grid) -> dict:
    """``A = max_x sum_y K_r[x, y] w`` together with the analytic bound when known.

    Returns a dict with keys ``A``, ``A_root`` (``A^(1/r)``), ``argmax`` and
    ``analytic_bound`` (``None`` for custom kernels or planar grids).  For
    ``r = inf`` the constant is the supremum of the kernel.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if np.isinf(r):
        if kernel.kind == "cauchy_slice":
            raise ValueError("the cauchy_slice kernel is unbounded: r = inf is not allowed")
        k = _custom_matrix(kernel, grid)
        i = int(np.argmax(k.max(axis=1)))
        return {"A": float(k[i].max()), "A_root": float(k[i].max()), "argmax": i, "analytic_bound": None}
    if kernel.kind == "cauchy_slice":
        plane = _plane(grid)
        rows = cauchy_slice_matrix(plane, r).sum(axis=1) * plane.cell_area * _transverse_volume(grid)
        bound = None
        if isinstance(grid, ProductGrid):
            bound = analytic_young_bound(r, grid.n, grid.bound_radius)
    else:
        k = _custom_matrix(kernel, grid)
        rows = (k ** r).sum(axis=1) * _weight(grid)
        bound = None
    i = int(np.argmax(rows))
    return {"A": float(rows[i]), "A_root": float(rows[i]) ** (1 / r), "argmax": i, "analytic_bound": bound}


def lp_norm_plain(values: np.ndarray, p: float, grid) -> float:
    a = np.abs(np.asarray(values)).ravel()
    if np.isinf(p) or p >= Q_INFINITY:
        return float(a.max(initial=0.0))
    return float((np.sum(a ** p) * _weight(grid)) ** (1 / p))


def conjugate_exponent(p: float, q: float) -> float:
    """``r`` with ``1/r = 1 + 1/q - 1/p``."""
    inv_q = 0.0 if np.isinf(q) else 1 / q
    inv_r = 1 + inv_q - 1 / p
    return np.inf if inv_r <= 0 else 1.0 / inv_r


def verify_potential_estimate(kernel: KernelSpec, f: np.ndarray, p: float, q: float, grid) -> Report:
    """Evaluate both sides of ``||V|f| ||_q <= A^(1/r) ||f||_p`` on the grid."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p > q:
        raise ValueError(f"need p <= q, got p={p}, q={q}")
    r = conjugate_exponent(p, q)
    report = Report("potential-estimate", {
        "kernel": kernel.kind, "p": p, "q": Q_INFINITY if np.isinf(q) else q, "r": r,
        "grid": grid.describe(),
    })
    with timed(report):
        absf = np.abs(np.asarray(f))
        vf = apply_potential(kernel, absf, grid)
        yc = young_constant(kernel, r, grid)
        lhs = lp_norm_plain(vf, q, grid)
        rhs = yc["A_root"] * lp_norm_plain(absf, p, grid)
        report.data.update({"A": yc["A"], "A^(1/r)": yc["A_root"], "analytic_bound": yc["analytic_bound"]})
        report.add(inequality("potential estimate", lhs, rhs, "potential-estimate", rel_tol=1e-9,
                              A=yc["A"], A_root=yc["A_root"]))
    return report


def refinement_ratio(kernel: KernelSpec, r: float, coarse, fine) -> float:
    """``A(fine) / A(coarse)``; values above 1.5 flag a non-integrable power."""
    return young_constant(kernel, r, fine)["A"] / young_constant(kernel, r, coarse)["A"]


def random_smooth_field(rng: np.random.Generator, grid, terms: int = 6, nonnegative: bool = True) -> np.ndarray:
    """Random trigonometric polynomial in the real coordinates of the nodes."""
    coords = [_plane_coords(grid, k) for k in range(1 if isinstance(grid, PlanarGrid) else grid.n)]
    out = np.zeros(coords[0][0].shape if isinstance(grid, PlanarGrid) else grid.shape)
    for _ in range(terms):
        phase = rng.uniform(0, 2 * np.pi)
        arg = phase
        for x, y in coords:
            arg = arg + rng.normal(0, 2.0) * x + rng.normal(0, 2.0) * y
        out = out + rng.normal() * np.cos(arg)
    if nonnegative:
        out = out - out.min() + rng.uniform(0, 0.5)
    return out


def _plane_coords(grid, k):
    if isinstance(grid, PlanarGrid):
        return grid.nodes.real, grid.nodes.imag
    z = np.broadcast_to(grid.coordinate(k), grid.shape)
    return z.real, z.imag
