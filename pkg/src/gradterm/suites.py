"""Verification suites run by the command line and the acceptance tests.

Each suite takes a validated configuration dict and a seed and returns a
:class:`~gradterm.report.Report`.  ``DEFAULTS`` lists every accepted field
with its default; the type of the default is the accepted type.
"""
from __future__ import annotations

import math

import numpy as np

from . import bochner, cauchy, dbar, moser, potential
from .bundle import chern_curvature
from .catalog import SMOOTH_RIM_FUNCTIONS, make_metric, make_section, transverse_cutoff
from .grids import build_disk_grid, product_grid
from .report import FAIL, PASS, Check, Report, inequality, timed

DEFAULTS = {
    "constants": {"n": 2, "N": 4, "R_hat": 1.1, "K": 4.0, "delta": 1.0},
    "cauchy-check": {"functions": list(SMOOTH_RIM_FUNCTIONS), "spacing": 0.02, "radius": 1.0},
    "potential-check": {"cases": 100, "spacing": 0.1, "N": 4, "R_hat": 1.1},
    "bochner-check": {"spacing": 0.05, "w_spacing": 0.2, "R_hat": 1.1, "K": 1.0, "refine": True},
    "moser-run": {"N": 4, "sections": 3, "spacing": 0.1, "w_spacing": 0.2, "R_hat": 1.1, "K": 1.0,
                  "metrics": ["identity", "gaussian", "rank2", "singular"]},
    "dbar-solve": {"K": 4.0, "eps": 0.2, "spacing": 1 / 12, "R": 1.0, "R_hat": 1.1, "N": 4,
                   "trials": 200, "perturbations": 20},
    "jet-demo": {"K": 4.0, "eps": 0.2, "spacing": 1 / 12, "R": 1.0, "R_hat": 1.1, "N": 4,
                 "P0": [0.5, 0.0], "value": ["1"], "derivative": ["0.5-0.3j"]},
}


class ConfigError(ValueError):
    pass


def _coerce(path, default, value):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    if not isinstance(value, type(default)):
        raise ConfigError(f"{path}: expected {type(default).__name__}, got {value!r}")
    return value


def validate(suite: str, cfg: dict | None, path: str = "config") -> dict:
    """Merge ``cfg`` over the suite defaults, rejecting unknown or mistyped fields."""
    defaults = DEFAULTS[suite]
    out = dict(defaults)
    if cfg is None:
        return out
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected an object")
    for key, value in cfg.items():
        if key not in defaults:
            raise ConfigError(f"{path}.{key}: unknown field for {suite}")
        out[key] = _coerce(f"{path}.{key}", defaults[key], value)
    if suite == "jet-demo":
        value = _parse_vector(f"{path}.value", out["value"])
        deriv = _parse_vector(f"{path}.derivative", out["derivative"])
        if value.size != deriv.size:
            raise ConfigError(f"{path}.derivative: must have the same length as {path}.value")
        if len(out["P0"]) != 2:
            raise ConfigError(f"{path}.P0: expected two coordinates")
    return out


def _prefixed(report: Report, source: Report, prefix: str) -> None:
    for c in source.checks:
        c.label = f"{prefix}: {c.label}"
        report.add(c)


# ---------------------------------------------------------------- suites


def run_constants(cfg: dict, seed: int = 0) -> Report:
    ledger = moser.compute_constants(cfg["n"], cfg["N"], cfg["R_hat"], cfg["K"], cfg["delta"])
    sched = moser.gamma_schedule(cfg["N"])
    report = Report("constants", dict(cfg))
    with timed(report):
        worst = max(abs(sched.closed_form(v) - g) for v, g in enumerate(sched.gammas))
        report.add(Check("closed-form schedule matches recursion", worst, 1e-12, 1e-12, "gamma-schedule",
                         PASS if worst <= 1e-12 else FAIL))
        report.add(inequality("gamma_nu_hat >= (N+2)/4", (cfg["N"] + 2) / 4, sched.gammas[-1], "gamma-schedule",
                              rel_tol=0.0))
        report.add(inequality("4 gamma_nu_hat - 2 >= N", cfg["N"], 4 * sched.gammas[-1] - 2, "gamma-schedule",
                              rel_tol=0.0))
        report.data["ledger"] = ledger.as_dict()
    return report


def run_cauchy(cfg: dict, seed: int = 0) -> Report:
    s = cfg["spacing"]
    report = Report("cauchy-check", dict(cfg))
    with timed(report):
        for name in cfg["functions"]:
            rep = cauchy.reconstruction_study(name, spacings=(2 * s, s), radius=cfg["radius"])
            report.checks.extend(rep.checks)
            report.data[name] = rep.data
    return report


def _custom_kernels():
    return {
        "constant": potential.KernelSpec.constant(1.0),
        "gaussian": potential.KernelSpec("custom", lambda x, y: np.exp(-np.abs(x - y) ** 2)),
    }


def run_potential(cfg: dict, seed: int = 0) -> Report:
    """Random ``(kernel, f, p, q)`` cases plus the instantiation ``(r, p, q) = (2 - eta, 1, 2 - eta)``."""
    rng = np.random.default_rng(seed)
    s = cfg["spacing"]
    disk = build_disk_grid(1.0, s)
    prod = product_grid([build_disk_grid(1.0, 1.5 * s), build_disk_grid(1.0, 0.2)], bound_radius=cfg["R_hat"])
    kernels = _custom_kernels()
    report = Report("potential-check", dict(cfg, seed=seed))
    with timed(report):
        eta = 2 / (cfg["N"] + 2)
        f = potential.random_smooth_field(rng, prod)
        rep = potential.verify_potential_estimate(potential.KernelSpec(), f, 1.0, 2 - eta, prod)
        _prefixed(report, rep, f"cauchy_slice (r, p, q) = (2-eta, 1, 2-eta), eta={eta:.4g}")
        report.data["instantiation"] = rep.data
        for i in range(cfg["cases"]):
            on_prod = rng.random() < 0.4
            grid = prod if on_prod else disk
            kname = "cauchy_slice" if on_prod else rng.choice(["cauchy_slice", "constant", "gaussian"])
            kernel = potential.KernelSpec() if kname == "cauchy_slice" else kernels[kname]
            p = float(rng.uniform(1.0, 3.0))
            pick = rng.random()
            q = p if pick < 0.2 else (np.inf if pick > 0.9 else float(rng.uniform(p, 8.0)))
            if kname == "cauchy_slice" and potential.conjugate_exponent(p, q) >= 2:
                # keep the kernel power integrable: r < 2 needs q < 2p/(2-p)
                q = float(rng.uniform(p, 2 * p / (2 - p))) if p < 2 else p
            f = potential.random_smooth_field(rng, grid, nonnegative=rng.random() < 0.7)
            rep = potential.verify_potential_estimate(kernel, f, p, q, grid)
            qs = "inf" if np.isinf(q) else f"{q:.3f}"
            _prefixed(report, rep, f"case {i}: {kname} on {'product' if on_prod else 'disk'} p={p:.3f} q={qs}")
        # integrable against non-integrable kernel powers under refinement
        fine = build_disk_grid(1.0, s / 2)
        k = potential.KernelSpec()
        r_ok = potential.refinement_ratio(k, 1.5, disk, fine)
        r_bad = potential.refinement_ratio(k, 3.0, disk, fine)
        report.add(inequality("refinement ratio of A at r=1.5 stays below 1.5", r_ok, 1.5, "young-constant",
                              rel_tol=0.0))
        report.add(inequality("refinement ratio of A at r=3 exceeds 1.5", 1.5, r_bad, "young-constant",
                              rel_tol=0.0))
        report.data["refinement_ratios"] = {"r=1.5": r_ok, "r=3": r_bad}
    return report


def bochner_cases(spacing: float, w_spacing: float = 0.2, R_hat: float = 1.1, K: float = 1.0) -> dict:
    """The catalog cases of the gradient identity: name -> (f, h)."""
    grid = product_grid([build_disk_grid(1.0, spacing), build_disk_grid(1.0, w_spacing)], bound_radius=R_hat)
    return {
        "flat": (make_section("bump_poly", grid), make_metric("identity", grid)),
        "gaussian": (make_section("bump", grid), make_metric("gaussian", grid, K=K)),
        "rank2": (make_section("bump_poly", grid, rank=2, vector=[1.0, 0.5j]), make_metric("rank2", grid, rank=2)),
    }


def run_bochner(cfg: dict, seed: int = 0) -> Report:
    report = Report("bochner-check", dict(cfg))
    with timed(report):
        cases = bochner_cases(cfg["spacing"], cfg["w_spacing"], cfg["R_hat"], cfg["K"])
        for name, (f, h) in cases.items():
            rep = bochner.verify_gradient_identity(f, h)
            _prefixed(report, rep, name)
            report.data[name] = rep.data
        if cfg["refine"]:
            # two-grid table at twice the spacing and the spacing itself
            s = cfg["spacing"]
            for name in cases:
                rows = bochner.refinement_table(
                    lambda sp: bochner_cases(sp, cfg["w_spacing"], cfg["R_hat"], cfg["K"])[name], [2 * s, s])
                report.data.setdefault("refinement", {})[name] = rows
                report.add(inequality(f"{name}: residual ratio {2 * s:g}/{s:g} >= 1.8", 1.8, rows[-1]["ratio"],
                                      "gradient-identity", rel_tol=0.0))
    return report


def moser_sections(grid, rank, count, rng):
    out = [make_section("bump_poly", grid, rank=rank)]
    out += [make_section("random", grid, rank=rank, rng=rng) for _ in range(max(count - 1, 0))]
    return out


def run_moser(cfg: dict, seed: int = 0) -> Report:
    """The chain on every catalog metric, a small-domain absorption case and the ledger invariance."""
    rng = np.random.default_rng(seed)
    N, R_hat = cfg["N"], cfg["R_hat"]
    grid = product_grid([build_disk_grid(1.0, cfg["spacing"]), build_disk_grid(1.0, cfg["w_spacing"])],
                        bound_radius=R_hat)
    ledger = moser.compute_constants(grid.n, N, R_hat, 0.0)
    report = Report("moser-run", dict(cfg, seed=seed))
    with timed(report):
        counts = {}
        for name in cfg["metrics"]:
            rank = 2 if name == "rank2" else 1
            h = make_metric(name, grid, rank=rank, **({"K": cfg["K"]} if name == "gaussian" else {}))
            for i, f in enumerate(moser_sections(grid, rank, cfg["sections"], rng)):
                rep = moser.full_chain(f, h, N, ledger=ledger)
                _prefixed(report, rep, f"{name} #{i}")
            counts[name] = cfg["sections"]
        # a domain small enough for the curvature hypothesis
        small = product_grid([build_disk_grid(0.3, 0.02), build_disk_grid(0.3, 0.06)], bound_radius=R_hat)
        h = make_metric("gaussian", small, K=1e-6)
        rep = moser.full_chain(make_section("random", small, rng=rng), h, N, ledger=ledger)
        _prefixed(report, rep, "small-domain gaussian")
        other = moser.compute_constants(small.n, N, R_hat, 0.0)
        same = other.as_dict() == ledger.as_dict()
        report.add(Check("ledger identical for two (D, W) at fixed (R, N)", 0.0 if same else 1.0, 0.0, 0.0,
                         "ledger-invariance", PASS if same else FAIL))
        report.data.update({"ledger": ledger.as_dict(), "sections_per_metric": counts})
    return report


def _manufactured(problem: dbar.WeightedProblem) -> np.ndarray:
    grid = problem.grid
    z1 = np.broadcast_to(grid.coordinate(0), grid.shape)
    a = np.abs(z1) ** 2
    prof = np.clip(problem.R_gamma ** 2 - a, 0, None) ** 2 * np.clip(a - problem.eps ** 2, 0, None)
    w = (prof * transverse_cutoff(grid) * np.conj(z1))[..., None] * np.ones(problem.h.rank)
    return w


def run_dbar(cfg: dict, seed: int = 0) -> Report:
    kw = {k: cfg[k] for k in ("K", "eps", "spacing", "R", "R_hat", "N")}
    prob = dbar.flat_problem(**kw)
    report = Report("dbar-solve", dict(cfg, seed=seed, R_gamma=prob.R_gamma, gamma=prob.gamma_budget))
    with timed(report):
        rep = dbar.verify_coercivity(prob, trials=cfg["trials"], seed=seed)
        report.checks.extend(rep.checks)
        report.data["coercivity"] = rep.data
        u, rep = dbar.minimum_norm_check(prob, _manufactured(prob), cfg["perturbations"], seed=seed)
        report.checks.extend(rep.checks)
        report.data["manufactured"] = rep.data
        u0, rep0 = dbar.solve_dbar(prob)
        report.add(Check("zero form gives zero solution", float(np.abs(u0).max()), 0.0, 0.0, "solver-min-norm",
                         PASS if not np.any(u0) else FAIL))
        rep = dbar.epsilon_study(cfg["eps"], spacing=cfg["spacing"], K=cfg["K"], R=cfg["R"], R_hat=cfg["R_hat"])
        report.checks.extend(rep.checks)
        report.data["epsilon_study"] = rep.data
        report.data["displayed_bound"] = "||u||^2 <= sqrt(2/(kappa K)) ||v||^2 (reported, not asserted)"
    return report


def _parse_vector(path, values):
    try:
        return np.array([complex(str(v).replace(" ", "")) for v in values])
    except ValueError:
        raise ConfigError(f"{path}: entries must be complex numbers such as \"0.5-0.3j\"") from None


def run_jet(cfg: dict, seed: int = 0) -> Report:
    kw = {k: cfg[k] for k in ("K", "eps", "spacing", "R", "R_hat", "N")}
    prob = dbar.flat_problem(**kw)
    value = _parse_vector("config.value", cfg["value"])
    deriv = _parse_vector("config.derivative", cfg["derivative"])
    P0 = tuple(float(x) for x in cfg["P0"])
    report = Report("jet-demo", dict(cfg))
    with timed(report):
        F0, rep = dbar.jet_interpolate(prob, P0, 0, value[None, :])
        _prefixed(report, rep, "q=0")
        report.data["q=0"] = rep.data
        jet = np.stack([value, deriv])
        F1, rep = dbar.jet_interpolate(prob, P0, 1, jet)
        _prefixed(report, rep, "q=1")
        report.data["q=1"] = rep.data
        F2, _ = dbar.jet_interpolate(prob, P0, 1, 2 * jet)
        dev = float(np.abs(F2 - 2 * F1).max() / max(np.abs(F1).max(), 1e-300))
        report.add(Check("doubling the jet doubles F", dev, 1e-9, 1e-9, "jet", PASS if dev <= 1e-9 else FAIL))
        Fz, _ = dbar.jet_interpolate(prob, P0, 0, np.zeros((1, value.size)))
        report.add(Check("zero jet gives zero section", float(np.abs(Fz).max()), 0.0, 0.0, "jet",
                         PASS if not np.any(Fz) else FAIL))
    return report


SUITES = {
    "constants": run_constants,
    "cauchy-check": run_cauchy,
    "potential-check": run_potential,
    "bochner-check": run_bochner,
    "moser-run": run_moser,
    "dbar-solve": run_dbar,
    "jet-demo": run_jet,
}


def run_full(cfg: dict | None, seed: int = 0, spacing: float | None = None) -> Report:
    cfg = cfg or {}
    unknown = set(cfg) - set(SUITES)
    if unknown:
        raise ConfigError(f"config.{sorted(unknown)[0]}: unknown suite")
    subs = {name: validate(name, cfg.get(name), f"config.{name}") for name in SUITES}
    report = Report("full-suite", {"seed": seed})
    with timed(report):
        for name, run in SUITES.items():
            sub = subs[name]
            if spacing is not None and "spacing" in sub:
                sub["spacing"] = spacing
            rep = run(sub, seed)
            report.config[name] = rep.config
            _prefixed(report, rep, name)
            report.data[name] = {"passed": rep.passed, "checks": len(rep.checks)}
    return report


def resolution_rows(suite: str, cfg: dict, seed: int = 0) -> list:
    """Run ``suite`` at its spacing and half of it; pair checks by label."""
    run = SUITES[suite]
    coarse = run(cfg, seed)
    fine = run(dict(cfg, spacing=cfg["spacing"] / 2), seed)
    fine_by = {c.label: c for c in fine.checks}
    rows = []
    for c in coarse.checks:
        d = fine_by.get(c.label)
        if d is None:
            continue
        ratio = c.lhs / d.lhs if d.lhs not in (0, 0.0) else math.nan
        rows.append({"suite": suite, "label": c.label, "spacing": cfg["spacing"], "lhs": c.lhs,
                     "fine_spacing": cfg["spacing"] / 2, "fine_lhs": d.lhs, "ratio": ratio})
    return rows
