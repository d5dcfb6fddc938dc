"""Weighted dbar equation on ``(D_{R_g} - closed D_eps) x D_R^(n-1)``.

Sections are flattened node-major with the fiber index last; a (0,1)-form
is the concatenation of its ``n`` components.  The weighted inner products are
``<u, w> = sum w^H G_K u vol`` with ``G_K = exp(-K|z|^2) G`` on sections and the
same metric on every form component (Euclidean in the base).  The adjoint is
the algebraic one, ``dbar* = M0^{-1} A^H M1``.

The solver whitens both sides with the pointwise Cholesky factors of
``G_K vol`` and runs LSQR from zero, which converges to the minimum-norm
least-squares solution in the weighted norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr

from .bundle import CurvatureField, MetricField, curvature_pointwise_norm
from .catalog import make_metric
from .grids import ProductGrid, build_annulus_grid, build_disk_grid, product_grid
from .moser import ConstantLedger, compute_constants
from .report import Check, FAIL, PASS, Report, inequality, timed

COERCIVITY_C = 1.0       # frozen after the two-resolution study
SOLVER_TOL = 1e-8
POLY_BUMP = (10.0, -15.0, 6.0)   # 1 - (10 x^3 - 15 x^4 + 6 x^5): C^2 at both ends


class HypothesisUnreachable(RuntimeError):
    pass


class InadmissibleForm(ValueError):
    pass


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------- curvature threshold and radius


def radial_budget(theta: CurvatureField, N: int) -> tuple:
    """Sorted ``|z1|`` of the nodes and the cumulative budget inside each radius."""
    grid = theta.metric.grid
    dens = curvature_pointwise_norm(theta) ** (N / (N - 2)) * grid.cell_volume
    r1 = np.abs(grid.factors[0].nodes)
    per_z1 = dens.reshape(grid.factors[0].size, -1).sum(axis=1)
    order = np.argsort(r1, kind="stable")
    return r1[order], np.cumsum(per_z1[order])


def choose_gamma(theta: CurvatureField, N: int, ledger: ConstantLedger, gamma: float | None = None,
                 min_radius: float | None = None) -> tuple:
    """Largest admissible budget and the radius ``R_g`` bringing the measured budget below it.

    ``gamma`` overrides the ledger threshold (useful for studying ``R_g(gamma)``).
    The returned radius is a node radius strictly inside the grid; with zero
    curvature it is ``R (1 - spacing)`` for the polydisk radius ``R``.
    """
    thr = ledger.gamma_threshold if gamma is None else float(gamma)
    if thr is None or not thr > 0:
        raise HypothesisUnreachable("no admissible curvature budget for this ledger (K = 0?)")
    plane = theta.metric.grid.factors[0]
    radii, cum = radial_budget(theta, N)
    if cum[-1] == 0:
        return thr, ledger.R * (1 - plane.spacing)
    lo = 2 * plane.spacing + plane.inner if min_radius is None else min_radius
    # radius rho admits every node with |z1| < rho
    ok = np.nonzero(cum < thr)[0]
    if ok.size == 0 or radii[ok[-1]] < lo:
        raise HypothesisUnreachable(
            f"hypothesis unreachable at this resolution: budget {cum[0]:.3g} at the smallest radius "
            f"exceeds {thr:.3g}")
    k = ok[-1]
    if k == radii.size - 1:
        return thr, min(plane.outer, ledger.R * (1 - plane.spacing))
    return thr, float(radii[k + 1])


# ---------------------------------------------------------------- operators


@dataclass(frozen=True, eq=False)
class DbarOperator:
    """Sparse ``dbar`` on sections, its weighted adjoint and ``dbar`` on (0,1)-forms."""

    grid: ProductGrid
    rank: int
    A: sp.csr_matrix
    parts: tuple
    B: sp.csr_matrix
    pairs: tuple

    @property
    def n_section(self) -> int:
        return self.grid.size * self.rank


def _factor_op(grid: ProductGrid, k: int, rank: int):
    mats = [sp.identity(f.size, format="csr") for f in grid.factors]
    mats[k] = grid.factors[k].dzbar
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.kron(out, sp.identity(rank), format="csr")


def assemble_dbar(grid: ProductGrid, rank: int = 1) -> DbarOperator:
    parts = tuple(_factor_op(grid, k, rank) for k in range(grid.n))
    A = sp.vstack(parts, format="csr")
    m = grid.size * rank
    pairs = tuple((j, k) for j in range(grid.n) for k in range(j + 1, grid.n))
    rows = []
    for j, k in pairs:
        # (dbar g)_{jk} = dbar_j g_k - dbar_k g_j
        blocks = [None] * grid.n
        blocks[k] = parts[j]
        blocks[j] = -parts[k]
        for i in range(grid.n):
            if blocks[i] is None:
                blocks[i] = sp.csr_matrix((m, m))
        rows.append(sp.hstack(blocks, format="csr"))
    B = sp.vstack(rows, format="csr") if rows else sp.csr_matrix((0, grid.n * m))
    return DbarOperator(grid, rank, A, parts, B, pairs)


def _block_diag(blocks: np.ndarray) -> sp.csr_matrix:
    """Sparse block-diagonal matrix from an array of shape ``(m, r, r)``."""
    m, r, _ = blocks.shape
    rows = np.repeat(np.arange(m * r).reshape(m, r), r, axis=1).ravel()
    cols = np.tile(np.arange(m * r).reshape(m, 1, r), (1, r, 1)).ravel()
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(m * r, m * r))


@dataclass(frozen=True, eq=False)
class WeightSet:
    """Mass matrices and whitening factors of the ``h_K`` inner products."""

    M0: sp.csr_matrix
    M0_inv: sp.csr_matrix
    C0: sp.csr_matrix
    C0_inv: sp.csr_matrix
    n: int

    def M1(self):
        return sp.block_diag([self.M0] * self.n, format="csr")

    def C1(self):
        return sp.block_diag([self.C0] * self.n, format="csr")


def weights(h: MetricField) -> WeightSet:
    grid = h.grid
    GK = h.twisted().reshape(-1, h.rank, h.rank) * grid.cell_volume
    L = np.linalg.cholesky(GK)
    LH = np.conj(np.swapaxes(L, -1, -2))
    return WeightSet(_block_diag(GK), _block_diag(np.linalg.inv(GK)), _block_diag(LH),
                     _block_diag(np.linalg.inv(LH)), grid.n)


def section_norm(u: np.ndarray, W: WeightSet) -> float:
    y = W.C0 @ np.ravel(u)
    return float(np.linalg.norm(y))


def form_norm(g: np.ndarray, W: WeightSet) -> float:
    g = np.ravel(g)
    m = W.C0.shape[0]
    return float(np.sqrt(sum(np.linalg.norm(W.C0 @ g[i * m:(i + 1) * m]) ** 2 for i in range(len(g) // m))))


def adjoint(op: DbarOperator, W: WeightSet) -> sp.csr_matrix:
    return (W.M0_inv @ op.A.conj().T @ W.M1()).tocsr()


# ---------------------------------------------------------------- problem


@dataclass(eq=False)
class WeightedProblem:
    grid: ProductGrid
    h: MetricField
    v: np.ndarray
    eps: float
    R_gamma: float
    R_hat: float
    gamma_budget: float = 0.0
    op: DbarOperator | None = None
    closed_tol: float = field(default=0.0)

    def __post_init__(self):
        if not self.eps < self.R_gamma < self.R_hat:
            raise ValueError(f"need eps < R_gamma < R_hat, got {self.eps}, {self.R_gamma}, {self.R_hat}")
        if self.op is None:
            self.op = assemble_dbar(self.grid, self.h.rank)
        self.v = np.asarray(self.v, dtype=complex).ravel()
        if self.v.size != self.op.A.shape[0]:
            raise ValueError(f"form has {self.v.size} entries, expected {self.op.A.shape[0]}")
        scale = float(np.abs(self.v).max(initial=0.0))
        tol = 10 * self.grid.factors[0].spacing * scale if self.closed_tol == 0 else self.closed_tol
        defect = float(np.abs(self.op.B @ self.v).max(initial=0.0))
        if defect > tol:
            raise ValueError(f"form is not dbar-closed: max |dbar v| = {defect:.3g} > {tol:.3g}")
        self.closed_defect = defect

    @property
    def K(self) -> float:
        return self.h.twist

    @property
    def kappa(self) -> float:
        return math.exp(-self.K * self.R_hat ** 2)

    @property
    def coercivity(self) -> float:
        """``kappa K / 2``."""
        return self.kappa * self.K / 2

    def with_form(self, v) -> "WeightedProblem":
        return WeightedProblem(self.grid, self.h, v, self.eps, self.R_gamma, self.R_hat, self.gamma_budget, self.op)


def build_domain(eps: float, R_gamma: float, R: float, spacing: float, w_spacing: float | None = None,
                 R_hat: float = 1.1, n: int = 2) -> ProductGrid:
    """Grid on ``(D_{R_g} - closed D_eps) x D_R^(n-1)`` inside the polydisk of radius ``R_hat``."""
    w_spacing = 0.2 * R if w_spacing is None else w_spacing
    d = build_annulus_grid(R_gamma, eps, spacing)
    return product_grid([d] + [build_disk_grid(R, w_spacing) for _ in range(n - 1)], bound_radius=R_hat)


def flat_problem(K: float = 4.0, eps: float = 0.2, spacing: float = 1 / 12, R: float = 1.0,
                 R_hat: float = 1.1, N: int = 4, metric: str = "identity", rank: int = 1,
                 w_spacing: float | None = None, **metric_params) -> WeightedProblem:
    """The default configuration: radius from :func:`choose_gamma`, zero form."""
    ledger = compute_constants(2, N, R_hat, K)
    probe = build_domain(eps, R_hat * (1 - spacing), R, spacing, w_spacing, R_hat)
    h0 = make_metric(metric, probe, rank=rank, **metric_params)
    from .bundle import chern_curvature
    gamma, R_gamma = choose_gamma(chern_curvature(h0), N, ledger)
    grid = probe if math.isclose(R_gamma, R_hat * (1 - spacing)) else build_domain(
        eps, R_gamma, R, spacing, w_spacing, R_hat)
    h = make_metric(metric, grid, rank=rank, twist=K, **metric_params)
    v = np.zeros(grid.n * grid.size * rank, dtype=complex)
    return WeightedProblem(grid, h, v, eps, R_gamma, R_hat, gamma_budget=gamma)


# ---------------------------------------------------------------- coercivity


def admissibility_masks(grid: ProductGrid, rank: int) -> list:
    """Flattened masks of the entries forced to zero: component ``j`` on the rim of factor ``j``."""
    return [np.repeat(grid.boundary_mask(j).ravel(), rank) for j in range(grid.n)]


def impose_boundary(g: np.ndarray, grid: ProductGrid, rank: int) -> np.ndarray:
    g = np.array(g, dtype=complex).ravel()
    m = grid.size * rank
    for j, mask in enumerate(admissibility_masks(grid, rank)):
        g[j * m:(j + 1) * m][mask] = 0
    return g


def check_admissible(g: np.ndarray, grid: ProductGrid, rank: int) -> None:
    m = grid.size * rank
    for j, mask in enumerate(admissibility_masks(grid, rank)):
        bad = np.abs(g[j * m:(j + 1) * m][mask])
        if bad.size and bad.max() > 0:
            raise InadmissibleForm(f"component {j + 1} is nonzero on the boundary of factor {j + 1} "
                                   f"(max {bad.max():.3g})")


def random_form(rng: np.random.Generator, grid: ProductGrid, rank: int = 1, terms: int = 4) -> np.ndarray:
    """Random smooth (0,1)-form with the boundary zeros imposed."""
    coords = [np.broadcast_to(grid.coordinate(k), grid.shape) for k in range(grid.n)]
    comps = []
    for j in range(grid.n):
        c = np.zeros(grid.shape + (rank,), dtype=complex)
        for _ in range(terms):
            arg = rng.uniform(0, 2 * np.pi)
            for z in coords:
                arg = arg + rng.normal(0, 1.5) * z.real + rng.normal(0, 1.5) * z.imag
            c = c + np.exp(1j * arg)[..., None] * (rng.normal(size=rank) + 1j * rng.normal(size=rank))
        comps.append(c.ravel())
    return impose_boundary(np.concatenate(comps), grid, rank)


def rayleigh_quotient(g: np.ndarray, op: DbarOperator, W: WeightSet, Astar=None) -> float:
    Astar = adjoint(op, W) if Astar is None else Astar
    m = op.n_section
    num = section_norm(Astar @ g, W) ** 2
    if op.B.shape[0]:
        num += form_norm(op.B @ g, W) ** 2
    return num / form_norm(g, W) ** 2


def verify_coercivity(problem: WeightedProblem, trials: int = 200, seed: int = 0, c: float = COERCIVITY_C,
                      forms=None) -> Report:
    """Rayleigh quotients of random admissible forms against ``(kappa K / 2)(1 - c spacing)``."""
    grid, op = problem.grid, problem.op
    spacing = grid.factors[0].spacing
    floor = problem.coercivity * (1 - c * spacing)
    report = Report("coercivity", {"K": problem.K, "R_hat": problem.R_hat, "eps": problem.eps,
                                   "R_gamma": problem.R_gamma, "trials": trials, "seed": seed, "c": c,
                                   "grid": grid.describe()})
    with timed(report):
        W = weights(problem.h)
        Astar = adjoint(op, W)
        rng = np.random.default_rng(seed)
        gs = forms if forms is not None else (random_form(rng, grid, problem.h.rank) for _ in range(trials))
        qs = []
        for g in gs:
            g = np.asarray(g, dtype=complex).ravel()
            check_admissible(g, grid, problem.h.rank)
            if not np.any(g):
                raise InadmissibleForm("the zero form has no Rayleigh quotient")
            qs.append(rayleigh_quotient(g, op, W, Astar))
        qmin = float(min(qs))
        report.data.update({"kappaK/2": problem.coercivity, "floor": floor, "min_quotient": qmin,
                            "median_quotient": float(np.median(qs)), "count": len(qs)})
        report.add(inequality("coercivity floor <= min Rayleigh quotient", floor, qmin, "coercivity",
                              rel_tol=0.0, trials=len(qs)))
    return report


# ---------------------------------------------------------------- solver


def _lsqr(M, b, tol):
    out = lsqr(M, b, atol=tol * 1e-3, btol=tol * 1e-3, iter_lim=50 * M.shape[1])
    return out[0], int(out[2])


def solve_dbar(problem: WeightedProblem, tol: float = SOLVER_TOL, require_tol: bool = True,
               multiplier: np.ndarray | None = None, rhs: np.ndarray | None = None) -> tuple:
    """Minimum ``h_K``-norm least-squares solution of ``dbar u = v``.

    The report records both readings of the a priori bound; only
    ``||u||^2 <= (2/(kappa K)) ||v||^2`` is asserted.  ``require_tol`` makes a
    relative residual above ``tol`` an error (the system is consistent for
    manufactured forms).

    With a holomorphic ``multiplier`` ``P`` (flattened like a section) the
    system solved is ``dbar(P u) = rhs`` instead; the bound is then not
    asserted since the right-hand side is not ``v``.
    """
    op = problem.op
    W = weights(problem.h)
    report = Report("dbar-solve", {"K": problem.K, "R_hat": problem.R_hat, "eps": problem.eps,
                                   "R_gamma": problem.R_gamma, "metric": problem.h.name,
                                   "grid": problem.grid.describe()})
    with timed(report):
        C1 = W.C1()
        A = op.A if multiplier is None else op.A @ sp.diags(np.ravel(multiplier))
        M = (C1 @ A @ W.C0_inv).tocsr()
        b = C1 @ (problem.v if rhs is None else np.ravel(rhs))
        vn = float(np.linalg.norm(b))
        if vn == 0:
            y, iters = np.zeros(M.shape[1], dtype=complex), 0
        else:
            y, iters = _lsqr(M, b, tol)
        u = W.C0_inv @ y
        res = float(np.linalg.norm(M @ y - b)) / vn if vn else 0.0
        if require_tol and res > tol:
            raise SolverError(f"relative residual {res:.3g} above {tol:.3g} after {iters} iterations")
        un = float(np.linalg.norm(y))
        kk = problem.kappa * problem.K
        const = 2 / kk if kk > 0 else np.inf
        displayed = math.sqrt(const) * vn ** 2
        report.data.update({"norm_u": un, "norm_v": vn, "relative_residual": res, "iterations": iters,
                            "bound_constant": const, "closed_defect": problem.closed_defect,
                            "displayed_bound_holds": un ** 2 <= displayed,
                            "unsquared_bound_holds": un <= math.sqrt(const) * vn})
        report.add(Check("relative residual", res, tol, tol, "plumbing", PASS if res <= tol else FAIL))
        if multiplier is not None:
            vw = float(np.linalg.norm(C1 @ problem.v))
            report.data.update({"norm_v": vw, "norm_dbar_u_minus_v":
                                form_norm(op.A @ u - problem.v, W) / vw if vw else 0.0})
            return u.reshape(problem.grid.shape + (problem.h.rank,)), report
        report.add(inequality("||u||^2 <= (2/(kappa K)) ||v||^2", un ** 2, const * vn ** 2, "solver-bound",
                              rel_tol=1e-9, displayed_reading=displayed))
    return u.reshape(problem.grid.shape + (problem.h.rank,)), report


def holomorphic_polynomial(grid: ProductGrid, rank: int, coeffs: np.ndarray) -> np.ndarray:
    """``sum c[a, b] z1^a z2^b`` (degree <= 2 per variable); exact in the kernel of the stencils."""
    coeffs = np.asarray(coeffs)
    z = [np.broadcast_to(grid.coordinate(k), grid.shape) for k in range(grid.n)]
    out = np.zeros(grid.shape + (rank,), dtype=complex)
    for idx in np.ndindex(*coeffs.shape[:-1]):
        mono = np.ones(grid.shape, dtype=complex)
        for k, e in enumerate(idx):
            mono = mono * z[k] ** e
        out = out + mono[..., None] * coeffs[idx]
    return out


def minimum_norm_check(problem: WeightedProblem, w: np.ndarray, perturbations: int = 20, seed: int = 0) -> Report:
    """Solve for ``v = dbar w`` and compare ``||u||`` with ``||w + p||`` for holomorphic ``p``."""
    w = np.asarray(w, dtype=complex)
    prob = problem.with_form(problem.op.A @ w.ravel())
    u, rep = solve_dbar(prob)
    rep.suite = "dbar-min-norm"
    W = weights(prob.h)
    un = section_norm(u, W)
    rep.add(inequality("||u|| <= ||w||", un, section_norm(w, W), "solver-min-norm", rel_tol=1e-6))
    rng = np.random.default_rng(seed)
    r, n = prob.h.rank, prob.grid.n
    worst = np.inf
    for _ in range(perturbations):
        c = rng.normal(size=(3,) * n + (r,)) + 1j * rng.normal(size=(3,) * n + (r,))
        p = holomorphic_polynomial(prob.grid, r, c) * rng.uniform(0.01, 1.0)
        worst = min(worst, section_norm(w + p, W))
    rep.add(inequality("||u|| <= min ||w + p|| over holomorphic p", un, worst, "solver-min-norm",
                       rel_tol=1e-6, perturbations=perturbations))
    return u, rep


def epsilon_study(eps: float, spacing: float = 1 / 12, K: float = 4.0, seed: int = 0, **kw) -> Report:
    """Solve one manufactured problem at ``eps`` and ``eps/2``; the bound constant must not move."""
    from .catalog import transverse_cutoff
    report = Report("epsilon-study", {"eps": eps, "spacing": spacing, "K": K, "seed": seed})
    consts = []
    with timed(report):
        for e in (eps, eps / 2):
            prob = flat_problem(K=K, eps=e, spacing=spacing, **kw)
            grid = prob.grid
            z1 = np.broadcast_to(grid.coordinate(0), grid.shape)
            prof = np.clip((prob.R_gamma ** 2 - np.abs(z1) ** 2), 0, None) ** 2 * transverse_cutoff(grid)
            w = (prof * np.conj(z1))[..., None] * np.ones(prob.h.rank)
            _, rep = solve_dbar(prob.with_form(prob.op.A @ w.ravel()))
            for c in rep.checks:
                c.label = f"eps={e:g}: {c.label}"
                report.add(c)
            consts.append(rep.data["bound_constant"])
            report.data[f"eps={e:g}"] = {k: rep.data[k] for k in ("norm_u", "norm_v", "bound_constant")}
        report.add(Check("bound constant independent of eps", abs(consts[0] - consts[1]), 0.0, 0.0,
                         "eps-independence", PASS if consts[0] == consts[1] else FAIL))
    return report


# ---------------------------------------------------------------- jets


def poly_cutoff(t: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """1 for ``t <= inner``, 0 for ``t >= outer``, ``1 - (10x^3 - 15x^4 + 6x^5)`` between."""
    x = np.clip((np.asarray(t) - inner) / (outer - inner), 0.0, 1.0)
    a, b, c = POLY_BUMP
    return 1 - x ** 3 * (a + x * (b + x * c))


def jet_interpolate(problem: WeightedProblem, P0, q: int, jet, radii: tuple | None = None,
                    extra_order: int = 2) -> tuple:
    """Holomorphic section with prescribed ``z1``-Taylor coefficients up to order ``q`` at ``P0``.

    ``jet`` has shape ``(q + 1, r)``.  The local section is the polynomial
    ``s = sum_k jet[k] (z1 - z1*)^k``; with ``rho`` the polynomial cutoff around
    ``z1*`` and ``m = q + 1 + extra_order`` the form is
    ``v = dbar(rho s) / (z1 - z1*)^m`` and ``F = rho s - (z1 - z1*)^m u``.
    ``P0`` is moved to the nearest node.

    Finite ``L^2`` norm of ``u`` forces ``F - s`` to vanish to order ``m`` at
    ``P0``, but a miss at order ``m - 1`` only costs ``log(1/spacing)`` on
    the lattice.  Each extra order makes a miss at order ``q`` costlier by
    ``spacing^-2``; the default of two keeps the ``q = 1`` coefficient within
    about 1% at spacing 1/12.  ``radii`` are the flat and support radii of
    ``rho``, by default 0.5 and 0.95 of the room to the nearest rim.
    """
    grid, op, r = problem.grid, problem.op, problem.h.rank
    plane = grid.factors[0]
    jet = np.asarray(jet, dtype=complex).reshape(q + 1, r)
    P0 = np.atleast_1d(np.asarray(P0, dtype=complex))
    if abs(P0[0]) - plane.inner < 2 * plane.spacing:
        raise ValueError(f"P0 is within two cells of the puncture |z1| = {plane.inner}")
    idx = tuple(int(np.argmin(np.abs(f.nodes - P0[k]))) for k, f in enumerate(grid.factors))
    zs = plane.nodes[idx[0]]
    room = min(abs(zs) - plane.inner, plane.outer - abs(zs))
    a, b = (0.5 * room, 0.95 * room) if radii is None else radii
    z1 = np.broadcast_to(grid.coordinate(0), grid.shape)
    rho = poly_cutoff(np.abs(z1 - zs), a, b)
    s = sum(jet[k] * ((z1 - zs) ** k)[..., None] for k in range(q + 1))
    rs = rho[..., None] * s
    P = ((z1 - zs) ** (q + 1 + extra_order))[..., None]
    m = grid.size * r
    Ars = op.A @ rs.ravel()
    v = Ars.copy()
    Pf = np.broadcast_to(P, grid.shape + (r,)).ravel()
    for j in range(grid.n):
        # (z1 - z1*) vanishes only at P0, where rho is flat and dbar(rho s) = 0
        blk = v[j * m:(j + 1) * m]
        v[j * m:(j + 1) * m] = np.divide(blk, Pf, out=np.zeros_like(blk), where=Pf != 0)
    prob = problem.with_form(v)
    # dbar(P u) = dbar(rho s) is consistent on the lattice, so F is discretely holomorphic
    if _depends_on_z1_only(problem.h):
        u, rep = _planar_solve(prob, P[(slice(None),) + (0,) * (grid.n - 1)], rs[(slice(None),) + (0,) * (grid.n - 1)])
    else:
        u, rep = solve_dbar(prob, multiplier=Pf, rhs=Ars, require_tol=False)
    F = rs - P * u
    report = Report("jet-demo", {"P0": [complex(grid.factors[k].nodes[i]) for k, i in enumerate(idx)],
                                 "q": q, "exponent": q + 1 + extra_order, "cutoff": [a, b], "K": problem.K, "grid": grid.describe()})
    with timed(report):
        scale = float(np.abs(rs).max())
        dbarF = float(np.abs(op.A @ F.ravel()).max())
        report.add(inequality("max |dbar F| <= 10 spacing scale", dbarF, 10 * plane.spacing * scale,
                              "jet", rel_tol=0.0))
        coeffs = extract_jet(F, grid, idx, q)
        for k in range(q + 1):
            err = float(np.linalg.norm(coeffs[k] - jet[k]))
            ref = max(float(np.linalg.norm(jet[k])), 1e-300)
            tolk = 0.02 if k == 0 else 0.05
            report.add(Check(f"Taylor coefficient {k}", err / ref if np.any(jet[k]) else err, tolk, tolk, "jet",
                             PASS if (err <= tolk * ref or err == 0) else FAIL,
                             {"got": coeffs[k], "want": jet[k]}))
        W = weights(problem.h)
        nF = section_norm(F, W)
        report.add(Check("||F||_{h_K} finite", nF, np.inf, 0.0, "jet", PASS if np.isfinite(nF) else FAIL))
        report.data.update({"solver": rep.data, "dbarF": dbarF, "norm_F": nF,
                            "coefficients": [c.tolist() for c in coeffs]})
    return F, report


def _depends_on_z1_only(h: MetricField) -> bool:
    G = h.values
    ref = G[(slice(None),) + (slice(0, 1),) * (h.grid.n - 1)]
    return bool(np.max(np.abs(G - ref)) <= 1e-14 * max(1.0, np.max(np.abs(G))))


def _planar_solve(problem: WeightedProblem, P1: np.ndarray, rs1: np.ndarray) -> tuple:
    """Minimum-norm ``u`` with ``dbar_1(P u) = dbar_1(rho s)`` for data depending on ``z1`` only.

    The kernel of the product operator is the tensor product of the factor
    kernels and the weight is a product, so the minimizer over the product
    grid is the planar minimizer, constant in the other variables.  The planar
    system is small enough for a dense SVD solve.
    """
    grid, h = problem.grid, problem.h
    plane, r = grid.factors[0], h.rank
    G = h.values[(slice(None),) + (0,) * (grid.n - 1)] * np.exp(-h.twist * np.abs(plane.nodes) ** 2)[:, None, None]
    LH = np.conj(np.swapaxes(np.linalg.cholesky(G * plane.cell_area), -1, -2))
    C = _block_diag(LH).toarray()
    Cinv = _block_diag(np.linalg.inv(LH)).toarray()
    A1 = sp.kron(plane.dzbar, sp.identity(r)).toarray()
    M = C @ A1 @ np.diag(np.ravel(P1)) @ Cinv
    b = C @ (A1 @ np.ravel(rs1))
    y = np.linalg.lstsq(M, b, rcond=None)[0]
    u1 = (Cinv @ y).reshape(plane.size, r)
    u = np.broadcast_to(u1.reshape((plane.size,) + (1,) * (grid.n - 1) + (r,)), grid.shape + (r,)).copy()
    bn = float(np.linalg.norm(b))
    res = float(np.linalg.norm(M @ y - b)) / bn if bn else 0.0
    rep = Report("dbar-solve", {"K": problem.K, "eps": problem.eps, "R_gamma": problem.R_gamma,
                                "method": "planar SVD"})
    rep.data.update({"relative_residual": res, "norm_u": section_norm(u, weights(h))})
    rep.add(Check("relative residual", res, SOLVER_TOL, SOLVER_TOL, "plumbing", PASS if res <= SOLVER_TOL else FAIL))
    return u, rep


def extract_jet(F: np.ndarray, grid: ProductGrid, idx: tuple, q: int, reach: float = 2.01) -> list:
    """Taylor coefficients in ``z1`` at node ``idx``.

    Least-squares fit of a holomorphic polynomial of degree ``q + 2`` in
    ``z1 - z1*`` to the nodes within ``reach`` cells (a wide finite-difference
    stencil); the two extra orders absorb the ``(z1 - z1*)^(q+1) u`` part.
    """
    plane = grid.factors[0]
    zs = plane.nodes[idx[0]]
    near = np.nonzero(np.abs(plane.nodes - zs) <= reach * plane.spacing)[0]
    w = (plane.nodes[near] - zs) / plane.spacing
    V = w[:, None] ** np.arange(q + 3)[None, :]
    vals = F[(near,) + tuple(idx[1:])]
    c = np.linalg.lstsq(V, vals, rcond=None)[0]
    return [c[k] / plane.spacing ** k for k in range(q + 1)]
