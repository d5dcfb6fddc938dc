"""Cauchy-Pompeiu representation on disks and annuli.

For smooth ``phi`` on the closure of a planar domain ``D``::

    phi(z) = 1/(2 pi i) \\oint phi(w) dw / (w - z)  +  1/pi \\iint dbar(phi)(w) / (z - w) dA(w)

The area term is evaluated by the midpoint rule on the lattice, except in the
cell that contains ``z``: there the kernel is integrated exactly over the
square (closed forms below), which removes the ``1/|w - z|`` singularity.
"""
from __future__ import annotations

import numpy as np

from .grids import INTERIOR, PlanarGrid, build_disk_grid, wirtinger_derivatives
from .report import Report, inequality, timed

_CHUNK = 512


def _inv_quadrant(a, b):
    """Integral of ``1/(x + iy)`` over ``[0, a] x [0, b]``, ``a, b >= 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sa = np.where(a > 0, a, 1.0)
    sb = np.where(b > 0, b, 1.0)
    re = np.where(a > 0, a * np.arctan2(b, sa), 0.0) + np.where(b > 0, 0.5 * b * np.log1p((a / sb) ** 2), 0.0)
    im = np.where(b > 0, b * np.arctan2(a, sb), 0.0) + np.where(a > 0, 0.5 * a * np.log1p((b / sa) ** 2), 0.0)
    return re - 1j * im


def _invabs_quadrant(a, b):
    """Integral of ``1/|x + iy|`` over ``[0, a] x [0, b]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sa = np.where(a > 0, a, 1.0)
    sb = np.where(b > 0, b, 1.0)
    return np.where(a > 0, a * np.arcsinh(b / sa), 0.0) + np.where(b > 0, b * np.arcsinh(a / sb), 0.0)


def _split(f, x0, x1, y0, y1, reflect):
    # rectangle [x0,x1]x[y0,y1] around the origin, summed over the four quadrants
    def box(a0, a1, b0, b1):
        return f(a1, b1) - f(a0, b1) - f(a1, b0) + f(a0, b0)

    px = (np.maximum(x0, 0), np.maximum(x1, 0))
    nx = (-np.minimum(x1, 0), -np.minimum(x0, 0))
    py = (np.maximum(y0, 0), np.maximum(y1, 0))
    ny = (-np.minimum(y1, 0), -np.minimum(y0, 0))
    q1 = box(*px, *py)
    q2 = box(*nx, *py)
    q3 = box(*nx, *ny)
    q4 = box(*px, *ny)
    return q1 + reflect[0](q2) + reflect[1](q3) + reflect[2](q4)


def rect_integral_inv(x0, x1, y0, y1):
    """Exact integral of ``1/w`` over the rectangle ``[x0,x1] x [y0,y1]``.

    The rectangle may contain the origin; the singularity is integrable.
    """
    # w -> -conj(w), w -> -w, w -> conj(w) map quadrants II, III, IV onto I
    return _split(_inv_quadrant, x0, x1, y0, y1,
                  (lambda q: -np.conj(q), lambda q: -q, np.conj))


def rect_integral_invabs(x0, x1, y0, y1):
    """Exact integral of ``1/|w|`` over the rectangle ``[x0,x1] x [y0,y1]``."""
    same = (lambda q: q,) * 3
    return _split(_invabs_quadrant, x0, x1, y0, y1, same)


def cell_integral_inv(center, z, h):
    """Integral over the square cell of side ``h`` at ``center`` of ``1/(w - z)``."""
    d = np.asarray(center) - np.asarray(z)
    return rect_integral_inv(d.real - h / 2, d.real + h / 2, d.imag - h / 2, d.imag + h / 2)


def cell_integral_invabs(center, z, h):
    d = np.asarray(center) - np.asarray(z)
    return rect_integral_invabs(d.real - h / 2, d.real + h / 2, d.imag - h / 2, d.imag + h / 2)


def _nearest_nodes(grid: PlanarGrid, z: np.ndarray) -> np.ndarray:
    h, off = grid.spacing, grid.offset
    i = np.round(z.real / h - off).astype(np.intp)
    j = np.round(z.imag / h - off).astype(np.intp)
    table, lo = grid._index_map
    ii, jj = i - lo[0], j - lo[1]
    inside = (ii >= 0) & (jj >= 0) & (ii < table.shape[0]) & (jj < table.shape[1])
    out = np.full(z.shape, -1, dtype=np.intp)
    out[inside] = table[ii[inside], jj[inside]]
    return out


def cauchy_boundary_integral(phi_outer, z, outer_radius: float = 1.0, phi_inner=None, inner_radius: float = 0.0):
    """Trapezoidal rule for ``1/(2 pi i) \\oint_{dD} phi(w) dw / (w - z)``.

    ``phi_outer`` (and ``phi_inner`` for an annulus) hold samples at the
    uniformly spaced angles ``2 pi k / m``.  The inner circle is traversed
    clockwise.  Points closer to a circle than one sample arc length are
    rejected.
    """
    z = np.asarray(z, dtype=complex)
    total = np.zeros(z.shape, dtype=complex)
    circles = [(np.asarray(phi_outer, dtype=complex), outer_radius, 1.0)]
    if phi_inner is not None:
        circles.append((np.asarray(phi_inner, dtype=complex), inner_radius, -1.0))
    for samples, radius, orient in circles:
        m = samples.size
        arc = 2 * np.pi * radius / m
        if np.any(np.abs(np.abs(z) - radius) < arc):
            raise ValueError(f"evaluation point within one boundary arc length ({arc:.3g}) of |z| = {radius}")
        w = radius * np.exp(2j * np.pi * np.arange(m) / m)
        # dw = i w dtheta, dtheta = 2 pi / m
        total = total + orient * np.mean(samples * w / (w - z[..., None]), axis=-1)
    return total


def cauchy_area_integral(dbar_phi: np.ndarray, grid: PlanarGrid, z=None) -> np.ndarray:
    """``1/pi \\iint dbar_phi(w) / (z - w) dA(w)`` at the points ``z``.

    ``z`` defaults to every grid node.  The lattice cell containing ``z`` (if
    any) is integrated exactly.
    """
    dbar_phi = np.asarray(dbar_phi, dtype=complex)
    if dbar_phi.shape != (grid.size,):
        raise ValueError("dbar_phi must be sampled on the grid nodes")
    targets = grid.nodes if z is None else np.atleast_1d(np.asarray(z, dtype=complex))
    self_idx = np.arange(grid.size) if z is None else _nearest_nodes(grid, targets)
    return _area_apply(dbar_phi, grid, targets, self_idx, absolute=False).reshape(np.shape(grid.nodes if z is None else z))


def _area_apply(density, grid, targets, self_idx, absolute):
    h2 = grid.cell_area
    nodes = grid.nodes
    out = np.empty(targets.shape, dtype=float if absolute else complex)
    for s in range(0, targets.size, _CHUNK):
        zz = targets[s:s + _CHUNK]
        diff = zz[:, None] - nodes[None, :]
        rows = np.arange(zz.size)
        own = self_idx[s:s + _CHUNK]
        has = own >= 0
        diff[rows[has], own[has]] = 1.0
        kern = 1.0 / np.abs(diff) if absolute else 1.0 / diff
        kern[rows[has], own[has]] = 0.0
        vals = kern @ density * h2
        if has.any():
            centers = nodes[own[has]]
            if absolute:
                cell = cell_integral_invabs(centers, zz[has], grid.spacing)
            else:
                # 1/(z - w) = -1/(w - z)
                cell = -cell_integral_inv(centers, zz[has], grid.spacing)
            vals[has] += cell * density[own[has]]
        out[s:s + _CHUNK] = vals / np.pi
    return out


def kernel_majorant(abs_dbar_phi: np.ndarray, grid: PlanarGrid) -> np.ndarray:
    """``1/pi \\iint |dbar phi(w)| / |z - w| dA(w)`` at every node."""
    dens = np.abs(np.asarray(abs_dbar_phi)).astype(float)
    return _area_apply(dens, grid, grid.nodes, np.arange(grid.size), absolute=True)


def kernel_bound_check(phi, grid: PlanarGrid, dbar_phi=None, boundary_samples: int = 256) -> Report:
    """Check ``|phi(z)| <= 1/pi \\iint |dbar phi| / |w - z|`` at every node.

    ``phi`` is a callable (so its vanishing on the outer circle can be
    verified) or an array of node values.  Without ``dbar_phi`` the
    derivative is taken by finite differences.  The discretization
    allowance is ``2 * spacing * max|dbar phi|``.
    """
    report = Report("cauchy-kernel-bound", {"grid": grid.describe()})
    with timed(report):
        if callable(phi):
            circle = grid.outer * np.exp(2j * np.pi * np.arange(boundary_samples) / boundary_samples)
            bmax = float(np.max(np.abs(phi(circle))))
            if bmax > 1e-8:
                raise ValueError(f"phi does not vanish on |z| = {grid.outer} (max {bmax:.3g})")
            values = phi(grid.nodes)
            if dbar_phi is None:
                dbar = wirtinger_derivatives(values, grid)[1]
            else:
                dbar = dbar_phi(grid.nodes) if callable(dbar_phi) else np.asarray(dbar_phi)
        else:
            values = np.asarray(phi, dtype=complex)
            dbar = wirtinger_derivatives(values, grid)[1] if dbar_phi is None else np.asarray(dbar_phi)
        lhs = np.abs(values)
        rhs = kernel_majorant(np.abs(dbar), grid)
        tol = 2 * grid.spacing * float(np.max(np.abs(dbar), initial=0.0))
        worst = int(np.argmax(lhs - rhs))
        report.add(inequality(
            "cauchy kernel bound (worst node)", lhs[worst], rhs[worst],
            "cauchy-kernel-bound", rel_tol=0.0, abs_tol=tol,
            node=worst, z=complex(grid.nodes[worst]),
            max_violation=float(np.max(lhs - rhs, initial=0.0)),
            min_slack=float(np.min(rhs - lhs)),
        ))
    return report


def reconstruction_error(phi, dbar_phi, grid: PlanarGrid, boundary_samples: int = 512) -> float:
    """Max relative error of the Cauchy-Pompeiu reconstruction at nodes off the collar.

    ``phi`` and ``dbar_phi`` are callables; the boundary term uses
    ``boundary_samples`` points per circle.
    """
    keep = grid.boundary_mask == INTERIOR
    z = grid.nodes[keep]
    theta = 2 * np.pi * np.arange(boundary_samples) / boundary_samples
    outer = phi(grid.outer * np.exp(1j * theta))
    inner = phi(grid.inner * np.exp(1j * theta)) if grid.inner > 0 else None
    rec = cauchy_boundary_integral(outer, z, grid.outer, inner, grid.inner)
    rec = rec + cauchy_area_integral(dbar_phi(grid.nodes), grid)[keep]
    exact = phi(z)
    return float(np.max(np.abs(rec - exact)) / max(np.max(np.abs(exact)), 1e-300))


def reconstruction_study(name: str, spacings=(0.04, 0.02), radius: float = 1.0,
                         max_error: float = 0.05, min_ratio: float = 1.7) -> Report:
    """Reconstruction error at two spacings plus the kernel bound at the finer one."""
    from .catalog import scalar_function

    phi, dphi = scalar_function(name)
    report = Report("cauchy-check", {"function": name, "spacings": list(spacings), "radius": radius})
    with timed(report):
        errs = [reconstruction_error(phi, dphi, build_disk_grid(radius, s)) for s in spacings]
        report.data.update({"errors": errs})
        report.add(inequality(f"{name}: reconstruction error at spacing {spacings[-1]:g}", errs[-1], max_error,
                              "cauchy-pompeiu", rel_tol=0.0))
        ratio = errs[0] / errs[1] if errs[1] > 0 else np.inf
        report.add(inequality(f"{name}: error ratio {spacings[0]:g}/{spacings[1]:g} >= {min_ratio:g}",
                              min_ratio, ratio, "cauchy-pompeiu", rel_tol=0.0))
        fine = build_disk_grid(radius, spacings[-1])
        kb = kernel_bound_check(phi, fine, dbar_phi=dphi)
        for c in kb.checks:
            c.label = f"{name}: {c.label}"
            report.add(c)
    return report
