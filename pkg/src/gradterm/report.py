"""Verification records and their serialization."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

from . import __version__

PASS = "pass"
FAIL = "fail"
NOT_MET = "hypothesis-not-met"


def _clean(x):
    if isinstance(x, complex):
        return {"re": _clean(x.real), "im": _clean(x.imag)}
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(x, "item") and getattr(x, "ndim", 1) == 0:
        return _clean(x.item())
    if hasattr(x, "tolist"):
        return _clean(x.tolist())
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


@dataclass
class Check:
    """One inequality or identity evaluated on concrete data.

    ``slack`` is ``rhs - lhs`` for inequalities ``lhs <= rhs``; identity checks
    store the residual in ``lhs`` and the tolerance in ``rhs``.
    """

    label: str
    lhs: float
    rhs: float
    tolerance: float
    anchor: str
    status: str = PASS
    extra: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return float(self.rhs) - float(self.lhs)

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "anchor": self.anchor,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "status": self.status,
            "pass": self.passed,
        }
        if self.extra:
            d["extra"] = self.extra
        return _clean(d)


def inequality(label, lhs, rhs, anchor, rel_tol=1e-9, abs_tol=0.0, **extra) -> Check:
    """``lhs <= rhs * (1 + rel_tol) + abs_tol``."""
    lhs, rhs = float(lhs), float(rhs)
    ok = lhs <= rhs * (1 + rel_tol) + abs_tol
    return Check(label, lhs, rhs, rel_tol if not abs_tol else abs_tol, anchor, PASS if ok else FAIL, extra)


@dataclass
class Report:
    suite: str
    config: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = __version__

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, other: "Report") -> None:
        for c in other.checks:
            self.checks.append(c)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def count(self, status: str) -> int:
        return sum(c.status == status for c in self.checks)

    def __getitem__(self, label: str) -> Check:
        for c in self.checks:
            if c.label == label:
                return c
        raise KeyError(label)

    def to_dict(self, include_time: bool = True) -> dict:
        d = {
            "suite": self.suite,
            "version": self.version,
            "config": self.config,
            "passed": self.passed,
            "summary": {s: self.count(s) for s in (PASS, FAIL, NOT_MET)},
            "checks": [c.to_dict() for c in self.checks],
            "data": self.data,
        }
        if include_time:
            d["wall_time"] = self.wall_time
        return _clean(d)

    def to_json(self, include_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_time), indent=2)


class timed:
    """Context manager stamping ``report.wall_time``."""

    def __init__(self, report: Report):
        self.report = report

    def __enter__(self):
        self._t = time.perf_counter()
        return self.report

    def __exit__(self, *exc):
        self.report.wall_time = time.perf_counter() - self._t
        return False
