"""
Estimation Schemas: estimands, pooled estimates, replicate metrics
"""
import math
from typing import List, Optional, Sequence

from pydantic import BaseModel, model_validator
from scipy import stats

from app.constants.constants import CONFIDENCE_LEVEL
from app.constants.enums import EstimandKind
from app.schemas.frame import VariableSpec


class LevelRef(BaseModel):
    """A variable, and for categoricals one of its levels"""

    variable: str
    level: Optional[int] = None


class Estimand(BaseModel):
    """
    A population quantity.

    total: Σ w I(variable = level), or Σ w y when level is omitted for a
    continuous variable. conditional_prob: P(target | all of condition).
    joint_prob: P(all of cells).
    """

    name: str
    kind: EstimandKind
    target: Optional[LevelRef] = None
    condition: List[LevelRef] = []
    cells: List[LevelRef] = []
    truth: Optional[float] = None

    @model_validator(mode="after")
    def validate_shape(self):
        if self.kind in (EstimandKind.TOTAL, EstimandKind.CONDITIONAL_PROB) and not self.target:
            raise ValueError(f"'{self.name}': {self.kind.value} needs a target")
        if self.kind == EstimandKind.CONDITIONAL_PROB and not self.condition:
            raise ValueError(f"'{self.name}': conditional_prob needs a condition")
        if self.kind == EstimandKind.JOINT_PROB and not self.cells:
            raise ValueError(f"'{self.name}': joint_prob needs cells")
        return self

    @property
    def references(self) -> List[LevelRef]:
        return ([self.target] if self.target else []) + self.condition + self.cells

    def check_against(self, schema: Sequence[VariableSpec]) -> None:
        """Every referenced variable and level must exist"""
        specs = {spec.name: spec for spec in schema}
        for ref in self.references:
            spec = specs.get(ref.variable)
            if spec is None:
                raise ValueError(f"'{self.name}' references unknown variable '{ref.variable}'")
            if spec.is_categorical:
                if ref.level is None or not 1 <= ref.level <= spec.levels:
                    raise ValueError(
                        f"'{self.name}' needs a level in 1..{spec.levels} for '{ref.variable}'"
                    )
            elif ref.level is not None or self.kind != EstimandKind.TOTAL:
                raise ValueError(
                    f"'{self.name}': continuous '{ref.variable}' only supports totals"
                )


def _quantile(df: float) -> float:
    upper = 0.5 + CONFIDENCE_LEVEL / 2
    return float(stats.norm.ppf(upper) if math.isinf(df) else stats.t.ppf(upper, df))


class CombinedEstimate(BaseModel):
    """Pooled estimate from L completed datasets"""

    estimate: float  # q̄
    within: float  # ū
    between: float  # b
    total_variance: float  # T
    df: float
    lower: float
    upper: float
    imputations: int

    @classmethod
    def from_single(cls, estimate: float, variance: float) -> "CombinedEstimate":
        """Complete-data inference, normal reference distribution"""
        half = _quantile(math.inf) * math.sqrt(max(variance, 0.0))
        return cls(
            estimate=estimate,
            within=variance,
            between=0.0,
            total_variance=variance,
            df=math.inf,
            lower=estimate - half,
            upper=estimate + half,
            imputations=1,
        )

    @classmethod
    def from_components(
        cls, estimate: float, within: float, between: float, imputations: int
    ) -> "CombinedEstimate":
        inflation = (1.0 + 1.0 / imputations) * between
        total = within + inflation
        df = (imputations - 1) * (1.0 + within / inflation) ** 2 if inflation > 0 else math.inf
        half = _quantile(df) * math.sqrt(total)
        return cls(
            estimate=estimate,
            within=within,
            between=between,
            total_variance=total,
            df=df,
            lower=estimate - half,
            upper=estimate + half,
            imputations=imputations,
        )

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


class MetricRow(BaseModel):
    """Replicate performance of one method on one estimand"""

    method: str
    estimand: str
    truth: float
    replicates: int
    mean_estimate: float
    bias: float
    rmse: float
    rrmse: Optional[float] = None  # None when the truth is 0
    coverage: float
    mean_width: float
