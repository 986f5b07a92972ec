"""Verification reports: named metrics, tolerance checks and residual tables."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


def fit_order(steps, errors):
    """Least-squares slope of ``log(error)`` against ``log(step)``."""
    h = np.asarray(steps, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size < 2 or np.any(e <= 0) or np.any(h <= 0):
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


_OPS = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b,
        "<": lambda a, b: a < b, ">": lambda a, b: a > b}


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    op: str = "<="

    @property
    def passed(self) -> bool:
        v = self.value
        if v is None or not np.isfinite(v):
            return False
        return _OPS[self.op](v, self.tolerance)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.value:.6g} {self.op} {self.tolerance:.6g}"


@dataclass
class VerificationReport:
    """Metrics, tolerance checks, warnings and tables from one verification.

    ``arrays`` holds raw per-step data for callers; it is not exported.
    """

    name: str
    metrics: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    def check(self, name, value, tolerance, op="<="):
        if op not in _OPS:
            raise ValueError(f"unknown comparison {op!r}")
        c = Check(name, float(value), float(tolerance), op)
        self.checks.append(c)
        return c.passed

    def warn(self, message):
        self.warnings.append(str(message))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failing(self):
        return [c for c in self.checks if not c.passed]

    def merge(self, other, prefix=None):
        """Fold another report's metrics, checks and warnings into this one."""
        pre = f"{prefix or other.name}."
        for k, v in other.metrics.items():
            self.metrics[pre + k] = v
        for c in other.checks:
            self.checks.append(Check(pre + c.name, c.value, c.tolerance, c.op))
        self.warnings.extend(f"{pre[:-1]}: {w}" for w in other.warnings)
        for k, v in other.tables.items():
            self.tables[pre + k] = v
        return self

    def add_table(self, name, header, rows):
        self.tables[name] = (list(header), [list(r) for r in rows])

    def to_text(self) -> str:
        """``key: value`` blocks; configuration is echoed as JSON."""
        out = [f"report: {self.name}", f"passed: {str(self.passed).lower()}"]
        for k, v in self.metrics.items():
            out.append(f"{k}: {_fmt(v)}")
        for c in self.checks:
            out.append(f"check: {c.line()}")
        for w in self.warnings:
            out.append(f"warning: {w}")
        if self.config:
            out.append("config: " + json.dumps(self.config, sort_keys=True, default=_jsonable))
        return "\n".join(out) + "\n"

    def write_table(self, name, path):
        header, rows = self.tables[name]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in np.ravel(v).tolist()) + "]"
    return str(v)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return str(v)
