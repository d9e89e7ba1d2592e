"""Uniform record for one bound-verification trial."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

_TOL = 1e-9


@dataclass(frozen=True)
class PropReport:
    name: str
    lhs: float
    rhs: float
    meta: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        if math.isinf(self.rhs) and self.rhs > 0:
            return math.inf
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack >= -_TOL

    def row(self, trial) -> list:
        return [trial, f"{self.lhs:.12g}", f"{self.rhs:.12g}", f"{self.slack:.12g}",
                int(self.holds)]
