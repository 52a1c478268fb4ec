"""
Intermediate results of margin imputation
"""
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from app.constants.enums import SafeguardFlag, WorkingMode


@dataclass(frozen=True)
class TargetTotalDraw:
    """Sampled plausible population totals, one per level; they sum to N"""

    variable: str
    totals: np.ndarray
    attempts: int = 1


@dataclass(frozen=True)
class WorkingDistribution:
    """
    Imputation probabilities for the unit nonrespondents.

    rows are frame row indices of the nonrespondents; probs[i, c - 1] is the
    probability that row rows[i] takes level c.
    """

    variable: str
    rows: np.ndarray
    probs: np.ndarray
    mode: WorkingMode

    @property
    def levels(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class AdjustmentFactors:
    """
    Multiplicative factors per nonrespondent row.

    partial covers levels 1..m-1 (the last level is set by subtraction);
    full covers all m levels and is used when a partial row overflows 1.
    Constant factors are broadcast to every row.
    """

    variable: str
    partial: np.ndarray  # (rows, m - 1)
    full: np.ndarray  # (rows, m)


@dataclass(frozen=True)
class FinalizedProbs:
    """Adjusted probabilities plus how many rows each safeguard touched"""

    distribution: WorkingDistribution
    flags: Dict[SafeguardFlag, int] = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return any(self.flags.values())


@dataclass(frozen=True)
class ConditionalProbTable:
    """
    Solved probabilities of the second margined variable given the first.

    table[c - 1, d - 1] = P(X2 = c | X1 = d) among unit nonrespondents.
    """

    variable: str
    conditioner: str
    table: np.ndarray
    residual: float
    clamped: bool = False


@dataclass(frozen=True)
class SysLayout:
    """Index bookkeeping for the system in the unknowns p_cd, c >= 2"""

    levels: int  # m2
    conditioner_levels: int  # m1

    @property
    def dimension(self) -> int:
        return self.conditioner_levels * (self.levels - 1)

    def index(self, c: int, d: int) -> int:
        """Position of p_cd (1-based levels, c >= 2) in the unknown vector"""
        return (d - 1) * (self.levels - 1) + (c - 2)

    def table(self, x: np.ndarray) -> np.ndarray:
        """Full m2 x m1 table with row 1 set by subtraction"""
        upper = np.asarray(x, dtype=float).reshape(self.conditioner_levels, self.levels - 1).T
        return np.vstack([1.0 - upper.sum(axis=0), upper])
