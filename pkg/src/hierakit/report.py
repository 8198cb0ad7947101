"""Check records, JSON reports and deterministic CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__

__all__ = ["SCHEMA_VERSION", "Check", "Observation", "Report", "check_below", "check_between", "format_value", "write_csv", "csv_text"]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Check:
    """One named comparison: ``value`` against ``tolerance`` (or a closed interval)."""

    name: str
    value: float
    tolerance: float | tuple[float, float]
    passed: bool
    group: str = ""
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if isinstance(self.tolerance, tuple):
            bound = f"in [{self.tolerance[0]:g}, {self.tolerance[1]:g}]"
        else:
            bound = f"< {self.tolerance:g}"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: {self.value:.3e} {bound}{extra}"


@dataclass(frozen=True)
class Observation:
    """A measured quantity that is reported but not compared against any bound."""

    name: str
    value: float
    group: str = ""
    detail: str = ""

    def line(self) -> str:
        extra = f"  ({self.detail})" if self.detail else ""
        return f"INFO  {self.name}: {self.value:.3e}{extra}"


def check_below(name: str, value: float, tol: float, group: str = "", detail: str = "") -> Check:
    value = float(value)
    return Check(name, value, float(tol), bool(math.isfinite(value) and value < tol), group, detail)


def check_between(name: str, value: float, low: float, high: float, group: str = "", detail: str = "") -> Check:
    value = float(value)
    ok = math.isfinite(value) and low <= value <= high
    return Check(name, value, (float(low), float(high)), bool(ok), group, detail)


def environment_stamp() -> dict[str, str]:
    return {
        "hierakit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


@dataclass
class Report:
    """Result of one command: the checks plus enough context to reproduce them."""

    suite: str
    seed: int
    config: dict[str, Any]
    checks: list[Check] = field(default_factory=list)
    observations: list[Observation] = field(default_factory=list)
    environment: dict[str, str] = field(default_factory=environment_stamp)
    csv_path: str | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def extend(self, items: Iterable[Check | Observation]) -> None:
        for item in items:
            (self.observations if isinstance(item, Observation) else self.checks).append(item)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "suite": self.suite,
            "seed": self.seed,
            "passed": self.passed,
            "config": self.config,
            "environment": self.environment,
            "csv": self.csv_path,
            "checks": [
                {**asdict(c), "tolerance": list(c.tolerance) if isinstance(c.tolerance, tuple) else c.tolerance}
                for c in self.checks
            ],
            "observations": [asdict(o) for o in self.observations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        lines = [c.line() for c in self.checks] + [o.line() for o in self.observations]
        lines.append(f"{self.suite}: {len(self.checks) - len(self.failures)}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def format_value(value: Any) -> str:
    """Round-trippable text for CSV cells (``repr`` of floats, plain ints)."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows))
    return path
