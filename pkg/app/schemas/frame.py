"""
Survey Data Schemas: variables, auxiliary margins, ingestion options
"""
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.constants.enums import VariableKind


class VariableSpec(BaseModel):
    """One survey variable"""

    model_config = ConfigDict(frozen=True)

    name: str
    kind: VariableKind
    levels: Optional[int] = None  # m_j, codes 1..m_j
    labels: Optional[List[str]] = None  # Optional string labels for codes 1..m_j
    lower: Optional[float] = None
    upper: Optional[float] = None
    in_margins: bool = False

    @field_validator("name")
    def validate_identifier(cls, v):
        if not v.isidentifier():
            raise ValueError(f"Variable name must be an identifier, got '{v}'")
        return v

    @model_validator(mode="after")
    def validate_kind(self):
        """Categorical needs levels >= 2; continuous needs lo < hi"""
        if self.kind == VariableKind.CATEGORICAL:
            if self.levels is None or self.levels < 2:
                raise ValueError(f"'{self.name}': categorical needs levels >= 2")
            if self.labels is not None and len(self.labels) != self.levels:
                raise ValueError(f"'{self.name}': {self.levels} levels but labels")
        else:
            if self.in_margins:
                raise ValueError(f"'{self.name}': margined variables are categorical")
            if self.lower is None or self.upper is None or not self.lower < self.upper:
                raise ValueError(f"'{self.name}': continuous needs lower < upper")
        return self

    @property
    def is_categorical(self) -> bool:
        return self.kind == VariableKind.CATEGORICAL

    def code_for(self, token: str) -> float:
        """Map a CSV token (code or label) to its numeric value"""
        if self.labels is not None and token in self.labels:
            return float(self.labels.index(token) + 1)
        return float(token)

    def in_support(self, values: np.ndarray) -> np.ndarray:
        """Elementwise support check; NaN counts as outside"""
        if self.is_categorical:
            return (values >= 1) & (values <= self.levels) & (values == np.round(values))
        return (values >= self.lower) & (values <= self.upper)


class VariableMargin(BaseModel):
    """Known totals T_jc and analyst variances V_jc for one variable"""

    totals: List[float]
    variances: Optional[List[Optional[float]]] = None  # None -> Poisson default

    @model_validator(mode="after")
    def validate_lengths(self):
        if self.variances is not None and len(self.variances) != len(self.totals):
            raise ValueError("variances and totals must have the same length")
        return self


class AuxiliaryMargins(BaseModel):
    """Known population margins per margined variable"""

    population_size: int = Field(gt=0)
    margins: Dict[str, VariableMargin]

    def totals(self, name: str) -> np.ndarray:
        return np.asarray(self.margins[name].totals, dtype=float)

    def variances(self, name: str) -> Optional[np.ndarray]:
        """Analyst variances, NaN where the default should be used"""
        variances = self.margins[name].variances
        if variances is None:
            return None
        return np.array([np.nan if v is None else v for v in variances], dtype=float)

    def with_variances(self, name: str, variances: np.ndarray) -> "AuxiliaryMargins":
        """Copy with the variances of one variable replaced"""
        margins = dict(self.margins)
        margins[name] = VariableMargin(
            totals=self.margins[name].totals, variances=[float(v) for v in variances]
        )
        return AuxiliaryMargins(population_size=self.population_size, margins=margins)

    @classmethod
    def from_shares(
        cls,
        population_size: int,
        shares: Dict[str, List[float]],
        variances: Optional[Dict[str, List[float]]] = None,
    ) -> "AuxiliaryMargins":
        """Build totals from level shares; the last level takes the remainder"""
        margins = {}
        for name, level_shares in shares.items():
            totals = [population_size * float(s) for s in level_shares[:-1]]
            totals.append(population_size - sum(totals))
            margins[name] = VariableMargin(
                totals=totals, variances=(variances or {}).get(name)
            )
        return cls(population_size=population_size, margins=margins)


class IngestionOptions(BaseModel):
    """How a sample CSV maps onto a frame"""

    population_size: int = Field(gt=0)
    weight_column: str = "weight"
    unit_nr_column: str = "unit_nr"
    design_columns: List[str] = []


class Violation(BaseModel):
    """One invariant violation"""

    code: str
    message: str


class ValidationReport(BaseModel):
    """Result of validating a frame (and optionally a completed dataset)"""

    violations: List[Violation] = []

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str) -> None:
        self.violations.append(Violation(code=code, message=message))

    def codes(self) -> List[str]:
        return [v.code for v in self.violations]
