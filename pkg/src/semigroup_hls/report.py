"""Shared result containers for verification checks and Monte Carlo estimates."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
SKIPPED = "skipped"

PLUMBING = "plumbing"


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error (sample std / sqrt(count))."""

    mean: float
    standard_error: float
    count: int

    @staticmethod
    def from_samples(samples, scale=1.0) -> "MCEstimate":
        import numpy as np

        x = np.asarray(samples, dtype=float)
        n = x.size
        if n == 0:
            return MCEstimate(math.nan, math.nan, 0)
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return MCEstimate(float(x.mean()) * scale, se * abs(scale), n)


@dataclass
class CheckReport:
    """One named verification result.

    ``anchor`` carries the formula or identity the check verifies (or the
    literal string ``"plumbing"`` for infrastructure checks).  ``status`` is
    derived from value, oracle and tolerance unless set explicitly:
    ``pass`` iff ``|value - oracle| <= tolerance`` for deterministic checks,
    and ``|value - oracle| <= 3 * standard_error`` for Monte Carlo ones.
    """

    name: str
    anchor: str
    value: float
    oracle: float
    tolerance: float
    standard_error: float | None = None
    status: str = ""
    note: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.anchor:
            raise ValueError("CheckReport.anchor must be non-empty")
        if not self.status:
            self.status = self._derive_status()

    def _derive_status(self) -> str:
        if math.isnan(self.value) or math.isnan(self.oracle):
            return INCONCLUSIVE
        gap = abs(self.value - self.oracle)
        if self.standard_error is not None:
            bound = max(3.0 * self.standard_error, self.tolerance)
        else:
            bound = self.tolerance
        return PASS if gap <= bound else FAIL

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "anchor": self.anchor,
            "value": self.value,
            "oracle": self.oracle,
            "tolerance": self.tolerance,
            "standard_error": self.standard_error,
            "status": self.status,
        }
        if self.note:
            d["note"] = self.note
        if self.details:
            d["details"] = self.details
        return d


def write_json_report(reports, path):
    """Write all reports to one JSON document with stable key order."""
    payload = {"checks": [r.to_dict() for r in reports]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv_summary(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "status", "value", "oracle", "tolerance", "standard_error"])
        for r in reports:
            w.writerow([r.name, r.status, repr(r.value), repr(r.oracle),
                        repr(r.tolerance), "" if r.standard_error is None else repr(r.standard_error)])


def worst_status(reports) -> int:
    """Exit code: 0 unless some check failed (inconclusive does not fail)."""
    return 1 if any(r.status == FAIL for r in reports) else 0
