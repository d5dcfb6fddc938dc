"""Integration-by-parts identity for sections vanishing on ``(dD) x W``:

    ||dbar_1 f||^2 = -(Theta_11 f, f) + ||nabla_1 f||^2.
"""
from __future__ import annotations

import numpy as np

from .bundle import MetricField, chern_curvature, covariant_derivative, curvature_form, pointwise_norm2
from .grids import ProductGrid, apply_along, integrate
from .report import FAIL, PASS, Check, Report, inequality, timed


class BoundaryConditionError(ValueError):
    pass


def check_rim_vanishing(f: np.ndarray, grid: ProductGrid, factor: int = 0, slack: float = 2.0) -> None:
    """Reject ``f`` unless it extrapolates to zero on the boundary circles of ``factor``.

    A function vanishing on the rim obeys ``|f| <= dist * max|grad f|`` in the
    one-cell collar; ``slack`` absorbs the finite-difference gradient error.
    """
    plane = grid.factors[factor]
    f = np.asarray(f)
    mag = np.sqrt(np.sum(np.abs(f) ** 2, axis=tuple(range(grid.n, f.ndim)))) if f.ndim > grid.n else np.abs(f)
    scale = float(mag.max(initial=0.0))
    if scale == 0.0:
        return
    gx = apply_along(plane.dx, f, factor)
    gy = apply_along(plane.dy, f, factor)
    grad = np.sqrt(np.abs(gx) ** 2 + np.abs(gy) ** 2)
    if f.ndim > grid.n:
        grad = np.sqrt(np.sum(grad ** 2, axis=tuple(range(grid.n, f.ndim))))
    lip = float(grad.max())
    r = np.abs(np.broadcast_to(grid.coordinate(factor), grid.shape))
    dist = plane.outer - r
    if plane.inner > 0:
        dist = np.minimum(dist, r - plane.inner)
    collar = grid.boundary_mask(factor)
    excess = np.where(collar, mag - (slack * dist * lip + 1e-8 * scale), -np.inf)
    worst = np.unravel_index(int(np.argmax(excess)), excess.shape)
    if excess[worst] > 0:
        raise BoundaryConditionError(
            f"section does not vanish on the z{factor + 1}-boundary: |f| = {mag[worst]:.3g} at node {worst}, "
            f"{dist[worst]:.3g} from the rim"
        )


def gradient_terms(f: np.ndarray, h: MetricField, exclude_collar: bool = True) -> dict:
    """The three integrals of the identity (and ``||f||^2``) over the grid minus the ``z1`` collar."""
    grid = h.grid
    keep = ~grid.boundary_mask(0) if exclude_collar else np.ones(grid.shape, dtype=bool)
    db = covariant_derivative(f, h, 0, holomorphic=False)
    nb = covariant_derivative(f, h, 0, holomorphic=True)
    theta = chern_curvature(h, directions=(0,))
    return {
        "dbar2": float(integrate(pointwise_norm2(db, h) * keep, grid)),
        "nabla2": float(integrate(pointwise_norm2(nb, h) * keep, grid)),
        "curv": float(integrate(curvature_form(theta, f).real * keep, grid)),
        "f2": float(integrate(pointwise_norm2(f, h) * keep, grid)),
        "theta": theta,
    }


def verify_gradient_identity(f: np.ndarray, h: MetricField, grid: ProductGrid | None = None,
                             rel_tol: float = 0.05, check_boundary: bool = True) -> Report:
    """Evaluate both sides of the identity and report the relative residual.

    The relative residual is ``|lhs - rhs| / max(lhs, ||nabla_1 f||^2)``.
    """
    grid = h.grid if grid is None else grid
    if check_boundary:
        check_rim_vanishing(f, grid)
    report = Report("gradient-identity", {"metric": h.name, "rank": h.rank, "grid": grid.describe()})
    with timed(report):
        t = gradient_terms(f, h)
        lhs = t["dbar2"]
        rhs = -t["curv"] + t["nabla2"]
        resid = abs(lhs - rhs)
        denom = max(lhs, t["nabla2"])
        rel = resid / denom if denom > 0 else 0.0
        report.data.update({"lhs": lhs, "rhs": rhs, "curvature_term": t["curv"],
                            "nabla2": t["nabla2"], "residual": resid, "relative_residual": rel})
        report.add(Check("gradient identity relative residual", rel, rel_tol, rel_tol, "gradient-identity",
                         PASS if rel <= rel_tol else FAIL, {"lhs": lhs, "rhs": rhs}))
        T = t["theta"].component(0, 0)
        if np.all(np.linalg.eigvalsh(0.5 * (T + np.conj(np.swapaxes(T, -1, -2))))[..., 0] >= 0):
            # nonnegative curvature: the gradient term dominates
            report.add(inequality("dbar gradient <= nabla gradient", lhs, t["nabla2"], "gradient-identity",
                                  rel_tol=1e-9))
    return report


def refinement_table(build, spacings) -> list:
    """Run the identity for ``build(spacing) -> (f, h)`` on each spacing.

    Rows carry the relative residual and its ratio to the previous row.
    """
    rows = []
    prev = None
    for s in spacings:
        f, h = build(s)
        rep = verify_gradient_identity(f, h)
        rel = rep.data["relative_residual"]
        rows.append({"spacing": s, "lhs": rep.data["lhs"], "rhs": rep.data["rhs"],
                     "relative_residual": rel,
                     "ratio": (prev / rel) if (prev is not None and rel > 0) else None})
        prev = rel
    return rows
