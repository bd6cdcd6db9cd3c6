"""Result containers shared by the check modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _num(x):
    """JSON-safe float: non-finite values become strings."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


@dataclass
class Table:
    """Column-oriented numeric table destined for CSV export."""

    columns: list[str]
    rows: list[list[float]]

    @classmethod
    def from_columns(cls, **cols) -> "Table":
        names = list(cols)
        arrays = [np.asarray(v, dtype=float) for v in cols.values()]
        return cls(names, [list(map(float, r)) for r in zip(*arrays)])


@dataclass
class CheckReport:
    name: str
    verdict: bool
    max_violation: float
    witness: float
    tolerance_used: float
    notes: list[str] = field(default_factory=list)
    table: Table | None = field(default=None, repr=False, compare=False)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "extras": {k: (_num(v) if isinstance(v, float) else v) for k, v in sorted(self.extras.items())},
            "name": self.name,
            "verdict": bool(self.verdict),
            "max_violation": _num(self.max_violation),
            "witness": _num(self.witness),
            "tolerance_used": _num(self.tolerance_used),
            "notes": list(self.notes),
        }


def report_from_residuals(name, grid, residuals, tolerance, notes=None, table=None) -> CheckReport:
    """Verdict from scaled residuals: pass iff max residual <= tolerance."""
    residuals = np.asarray(residuals, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if residuals.size == 0:
        return CheckReport(name, True, 0.0, float("nan"), tolerance, list(notes or []), table)
    bad = ~np.isfinite(residuals)
    if bad.any():
        k = int(np.argmax(bad))
        return CheckReport(name, False, math.inf, float(grid[k]), tolerance, list(notes or []), table)
    k = int(np.argmax(residuals))
    worst = float(residuals[k])
    return CheckReport(name, worst <= tolerance, worst, float(grid[k]), tolerance, list(notes or []), table)


@dataclass
class MonotoneSeries:
    """A sampled quantity that should be nonincreasing along its grid.

    ``max_violation`` is the largest positive slope divided by the local
    scale ``1 + |value|``; the verdict compares it with ``tol``.
    """

    grid: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    max_violation: float
    verdict: bool
    tol: float = 1e-6
    notes: list[str] = field(default_factory=list)
    checks: dict[str, CheckReport] = field(default_factory=dict)

    @classmethod
    def build(cls, grid, values, slopes, tol=1e-6, notes=None) -> "MonotoneSeries":
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        scaled = slopes / (1.0 + np.abs(values))
        worst = float(np.max(scaled)) if scaled.size else 0.0
        return cls(grid, values, slopes, worst, worst <= tol, tol, list(notes or []))

    @property
    def witness(self) -> float:
        scaled = self.slopes / (1.0 + np.abs(self.values))
        return float(self.grid[int(np.argmax(scaled))])

    def as_report(self, name: str) -> CheckReport:
        table = Table.from_columns(t=self.grid, value=self.values, slope=self.slopes)
        return CheckReport(name, self.verdict, self.max_violation, self.witness, self.tol, list(self.notes), table)
