"""Machine-readable pass/fail records shared by the solvers and the verifier."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class CheckReport:
    """``lhs <= rhs * (1 + slack) + abs_slack`` (``<`` when ``strict``)."""

    name: str
    lhs: float
    rhs: float
    slack: float = 0.01
    abs_slack: float = 1e-10
    strict: bool = False
    provenance: str = ""

    @property
    def bound(self) -> float:
        return self.rhs * (1.0 + self.slack) if self.rhs >= 0 else self.rhs * (1.0 - self.slack)

    @property
    def passed(self) -> bool:
        if not (math.isfinite(self.lhs) and math.isfinite(self.rhs)):
            return False
        limit = self.bound + self.abs_slack
        return self.lhs < limit if self.strict else self.lhs <= limit

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        d["margin"] = self.margin
        return d


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)


def failures(reports) -> list[CheckReport]:
    return [r for r in reports if not r.passed]
