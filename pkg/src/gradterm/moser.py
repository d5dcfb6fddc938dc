"""Moser-type iteration of the Cauchy-kernel potential estimate.

Exponent schedule: ``gamma_0 = 1``, ``gamma_{v+1} = gamma_v (1 - eta/2) + 1/2``
with ``eta = 2/(N+2)``; after ``nu_hat = ceil(log 2 / log((N+2)/(N+1)))``
steps the exponent ``4 gamma - 2`` has passed ``N``.

Each step bounds ``||f||^2`` in ``L^(4 gamma_{v+1} - 2)`` by ``C_nat`` times
the previous norm plus both first-order gradient terms.  Chaining the steps,
applying Hoelder to reach ``L^N`` and absorbing the curvature term under a
smallness condition on ``\\int |Theta|^(N/(N-2))`` gives an ``L^N`` bound by
``||f||_2`` and ``||dbar_1 f||`` alone.  :class:`ConstantLedger` holds every
constant of that argument; none of them depends on the domain, only on the
polydisk radius ``R``, ``N`` and ``eta`` (plus ``n`` and the step policy).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bundle import (MetricField, chern_curvature, covariant_derivative, curvature_budget,
                     curvature_pointwise_norm, lp_norm, pointwise_norm2)
from .grids import ProductGrid, integrate
from .report import NOT_MET, Check, Report, inequality, timed

DISCRETIZATION_TOL = 0.05
EXACT_TOL = 1e-9


@dataclass(frozen=True)
class IterationSchedule:
    N: int
    eta: float
    nu_hat: int
    gammas: tuple

    def closed_form(self, nu: int) -> float:
        eta = self.eta
        return (1 - (1 - eta) * (1 - eta / 2) ** nu) / eta

    @property
    def exponents(self) -> tuple:
        """``4 gamma_v - 2`` for ``v = 0 .. nu_hat``."""
        return tuple(4 * g - 2 for g in self.gammas)


def stopping_index(N: int) -> int:
    return math.ceil(math.log(2) / math.log((N + 2) / (N + 1)))


def gamma_schedule(N: int) -> IterationSchedule:
    if N <= 2:
        raise ValueError(f"N must be > 2, got {N}")
    eta = 2 / (N + 2)
    nu_hat = stopping_index(N)
    g = [1.0]
    for _ in range(nu_hat):
        g.append(g[-1] * (1 - eta / 2) + 0.5)
    return IterationSchedule(N, eta, nu_hat, tuple(g))


def exact_gammas(N: int, steps: int) -> list:
    """The recursion in rational arithmetic."""
    half_eta = Fraction(1, N + 2)
    g = [Fraction(1)]
    for _ in range(steps):
        g.append(g[-1] * (1 - half_eta) + Fraction(1, 2))
    return g


def cauchy_slice_constant(n: int, eta: float, R: float) -> float:
    """``C_R = (2^(1+eta) pi^(n-2+eta) R^(n-1+eta) / eta)^(1/(2-eta))``."""
    return (2 ** (1 + eta) * math.pi ** (n - 2 + eta) * R ** (n - 1 + eta) / eta) ** (1 / (2 - eta))


@dataclass(frozen=True)
class ConstantLedger:
    n: int
    N: int
    R: float
    K: float
    eta: float
    nu_hat: int
    gammas: tuple
    C_R: float
    deltas: tuple
    delta_stars: tuple
    C_nat: float
    C_sharp: float
    C_flat: float
    kappa: float
    policy: str
    gamma_threshold: float | None = None
    threshold_conditions: dict = field(default_factory=dict)

    def delta(self, budget: float) -> float:
        """``2 C_flat budget^((N-2)/N) (C_nat^nu_hat + 2 C_sharp)`` for a curvature budget."""
        return 2 * self.C_flat * budget ** ((self.N - 2) / self.N) * (self.C_nat ** self.nu_hat + 2 * self.C_sharp)

    def absorption_factor(self, budget: float) -> float:
        """``C_sharp C_flat budget^((N-2)/N)``; absorption needs it below 1/2."""
        return self.C_sharp * self.C_flat * budget ** ((self.N - 2) / self.N)

    def conditions(self, budget: float) -> dict:
        """Left-hand sides and limits of the three smallness conditions on the budget."""
        t = budget ** ((self.N - 2) / self.N)
        d = self.delta(budget)
        n2 = self.n ** 2
        return {
            "absorption": (self.C_sharp * self.C_flat * t, 0.5),
            "gradient": (n2 * t * (2 + d) * self.C_flat * self.C_sharp, self.kappa / 2),
            "zeroth_order": (n2 * t * self.C_flat * (self.C_nat ** self.nu_hat + d * self.C_sharp),
                             self.kappa * self.K / 2),
        }

    def admissible(self, budget: float) -> bool:
        c = self.conditions(budget)
        lhs, lim = c["absorption"]
        if not lhs < lim:
            return False
        return all(c[k][0] <= c[k][1] for k in ("gradient", "zeroth_order"))

    def as_dict(self) -> dict:
        return asdict(self)


def _step_constants(gammas, C_R, deltas):
    out = []
    for g, d in zip(gammas, deltas):
        ds = d ** (1 / (2 * g - 1))
        three = 3 ** (1 / (2 * g))
        out.append((three * g * C_R * (2 * g - 1) / (g * ds), three * 2 * g * C_R * d / g, ds))
    return out


def _largest_budget(ledger: ConstantLedger) -> float:
    """Bisection for the largest budget meeting all three conditions (in log scale)."""
    if ledger.K <= 0:
        raise ValueError("no admissible curvature budget: the zeroth-order condition needs K > 0")
    lo, hi = -400.0, 0.0
    # every left-hand side is increasing in the budget
    while ledger.admissible(10.0 ** hi):
        hi += 10.0
        if hi > 400:
            return np.inf
    if not ledger.admissible(10.0 ** lo):
        raise ValueError("no admissible curvature budget > 0")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ledger.admissible(10.0 ** mid):
            lo = mid
        else:
            hi = mid
    return 10.0 ** lo


def compute_constants(n: int, N: int, R: float, K: float = 0.0, delta_policy=1.0) -> ConstantLedger:
    """Every constant of the iteration for ``D x W`` inside the polydisk of radius ``R``.

    ``delta_policy`` is a positive number used for every step, or a sequence
    of ``nu_hat`` per-step values.  The curvature-budget threshold is left as
    ``None`` when ``K == 0`` (no budget satisfies the zeroth-order condition).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if R <= 1:
        raise ValueError("R must be > 1")
    sched = gamma_schedule(N)
    steps = sched.gammas[:-1]
    if np.isscalar(delta_policy):
        deltas = (float(delta_policy),) * sched.nu_hat
        policy = f"constant {float(delta_policy)!r}"
    else:
        deltas = tuple(float(d) for d in delta_policy)
        if len(deltas) != sched.nu_hat:
            raise ValueError(f"need {sched.nu_hat} step parameters, got {len(deltas)}")
        policy = "per-step " + ",".join(repr(d) for d in deltas)
    if min(deltas) <= 0:
        raise ValueError("step parameters must be positive")
    C_R = cauchy_slice_constant(n, sched.eta, R)
    parts = _step_constants(steps, C_R, deltas)
    C_nat = max(max(a, b) for a, b, _ in parts)
    C_sharp = sum(C_nat ** j for j in range(sched.nu_hat))
    top = 4 * sched.gammas[-1] - 2
    C_flat = (math.pi ** n * R ** (2 * n)) ** (2 * (top - N) / top)
    ledger = ConstantLedger(
        n=n, N=N, R=float(R), K=float(K), eta=sched.eta, nu_hat=sched.nu_hat, gammas=sched.gammas,
        C_R=C_R, deltas=deltas, delta_stars=tuple(p[2] for p in parts), C_nat=C_nat, C_sharp=C_sharp,
        C_flat=C_flat, kappa=math.exp(-K * R * R), policy=policy,
    )
    if K > 0:
        thr = _largest_budget(ledger)
        ledger = ConstantLedger(**{**asdict(ledger), "gamma_threshold": thr,
                                   "threshold_conditions": {k: list(v) for k, v in ledger.conditions(thr).items()}})
    return ledger


# ---------------------------------------------------------------- chain on concrete sections


def section_norms(f: np.ndarray, h: MetricField, schedule: IterationSchedule) -> dict:
    """Every norm the chain consumes, computed once.

    Norms use the pointwise ``h``-length with unweighted Lebesgue measure.
    """
    grid = h.grid
    db = covariant_derivative(f, h, 0, holomorphic=False)
    nb = covariant_derivative(f, h, 0, holomorphic=True)
    theta = chern_curvature(h)
    t11 = curvature_pointwise_norm(theta, h, component=(0, 0))
    full = curvature_pointwise_norm(theta, h)
    f2 = pointwise_norm2(f, h)
    return {
        "L": [lp_norm(f, h, p, grid) ** 2 for p in schedule.exponents],
        "L2": lp_norm(f, h, 2, grid) ** 2,
        "LN": lp_norm(f, h, schedule.N, grid) ** 2,
        "dbar2": float(integrate(pointwise_norm2(db, h), grid)),
        "nabla2": float(integrate(pointwise_norm2(nb, h), grid)),
        "theta11_f2": float(integrate(t11 * f2, grid)),
        "budget": curvature_budget(full, schedule.N, grid),
    }


def _ledger_for(h: MetricField, N: int, ledger, R):
    if ledger is not None:
        return ledger
    return compute_constants(h.grid.n, N, h.grid.bound_radius if R is None else R, h.twist)


def run_iteration_chain(f: np.ndarray, h: MetricField, N: int, ledger: ConstantLedger | None = None,
                        R: float | None = None, norms: dict | None = None) -> Report:
    """Every step inequality, the aggregated bound and the Hoelder bridge on ``f``."""
    from .bochner import check_rim_vanishing

    check_rim_vanishing(f, h.grid)
    sched = gamma_schedule(N)
    ledger = _ledger_for(h, N, ledger, R)
    nm = section_norms(f, h, sched) if norms is None else norms
    report = Report("moser-chain", {"metric": h.name, "N": N, "policy": ledger.policy,
                                    "grid": h.grid.describe()})
    with timed(report):
        L = nm["L"]
        grad = nm["dbar2"] + nm["nabla2"]
        for v in range(sched.nu_hat):
            report.add(inequality(
                f"step {v}: L^{sched.exponents[v + 1]:.4g} from L^{sched.exponents[v]:.4g}",
                L[v + 1], ledger.C_nat * (L[v] + grad), "moser-step", rel_tol=DISCRETIZATION_TOL))
        agg = ledger.C_nat ** sched.nu_hat * nm["L2"] + ledger.C_sharp * (2 * nm["dbar2"] + nm["theta11_f2"])
        report.add(inequality("aggregated bound", L[-1], agg, "moser-aggregate", rel_tol=DISCRETIZATION_TOL))
        report.add(inequality("hoelder bridge to L^N", nm["LN"], ledger.C_flat * L[-1], "hoelder-bridge",
                              rel_tol=EXACT_TOL))
        report.data.update({k: v for k, v in nm.items()})
        report.data["ledger"] = ledger.as_dict()
    return report


def _hypothesis(ledger: ConstantLedger, budget: float) -> tuple:
    factor = ledger.absorption_factor(budget)
    return factor < 0.5, factor


def curvature_absorption_check(f: np.ndarray, h: MetricField, N: int, budget: float | None = None,
                               ledger: ConstantLedger | None = None, norms: dict | None = None) -> Report:
    """``\\int |Theta_11| |f|^2 <= delta (||f||_2^2 + ||dbar_1 f||^2)`` with ``delta`` at the budget.

    ``budget`` defaults to the measured ``\\int |Theta|^(N/(N-2))`` on the grid.
    When the smallness hypothesis fails the check is marked
    ``hypothesis-not-met``.
    """
    sched = gamma_schedule(N)
    ledger = _ledger_for(h, N, ledger, None)
    nm = section_norms(f, h, sched) if norms is None else norms
    budget = nm["budget"] if budget is None else budget
    report = Report("curvature-absorption", {"metric": h.name, "N": N, "budget": budget})
    with timed(report):
        ok, factor = _hypothesis(ledger, budget)
        d = ledger.delta(budget)
        lhs = nm["theta11_f2"]
        rhs = d * (nm["L2"] + nm["dbar2"])
        if ok:
            report.add(inequality("curvature absorption", lhs, rhs, "curvature-absorption",
                                  rel_tol=DISCRETIZATION_TOL, delta=d, absorption_factor=factor))
        else:
            report.add(Check("curvature absorption", lhs, rhs, DISCRETIZATION_TOL, "curvature-absorption",
                             NOT_MET, {"delta": d, "absorption_factor": factor}))
    return report


def final_lN_bound_check(f: np.ndarray, h: MetricField, N: int, budget: float | None = None,
                         ledger: ConstantLedger | None = None, norms: dict | None = None) -> Report:
    """``||f||_N^2 <= C_flat (C_nat^nu_hat + delta C_sharp) ||f||_2^2 + (2 + delta) C_flat C_sharp ||dbar_1 f||^2``."""
    sched = gamma_schedule(N)
    ledger = _ledger_for(h, N, ledger, None)
    nm = section_norms(f, h, sched) if norms is None else norms
    budget = nm["budget"] if budget is None else budget
    report = Report("final-LN-bound", {"metric": h.name, "N": N, "budget": budget})
    with timed(report):
        ok, factor = _hypothesis(ledger, budget)
        d = ledger.delta(budget)
        c0 = ledger.C_flat * (ledger.C_nat ** ledger.nu_hat + d * ledger.C_sharp)
        c1 = (2 + d) * ledger.C_flat * ledger.C_sharp
        lhs = nm["LN"]
        rhs = c0 * nm["L2"] + c1 * nm["dbar2"]
        extra = {"delta": d, "absorption_factor": factor, "coef_L2": c0, "coef_dbar": c1}
        if ok:
            report.add(inequality("final L^N bound", lhs, rhs, "final-LN-bound",
                                  rel_tol=DISCRETIZATION_TOL, **extra))
        else:
            report.add(Check("final L^N bound", lhs, rhs, DISCRETIZATION_TOL, "final-LN-bound", NOT_MET, extra))
    return report


def full_chain(f: np.ndarray, h: MetricField, N: int, ledger: ConstantLedger | None = None) -> Report:
    """Chain, absorption and final bound sharing one set of norms."""
    sched = gamma_schedule(N)
    ledger = _ledger_for(h, N, ledger, None)
    nm = section_norms(f, h, sched)
    rep = run_iteration_chain(f, h, N, ledger=ledger, norms=nm)
    rep.suite = "moser-run"
    rep.extend(curvature_absorption_check(f, h, N, ledger=ledger, norms=nm))
    rep.extend(final_lN_bound_check(f, h, N, ledger=ledger, norms=nm))
    return rep
