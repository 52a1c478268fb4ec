"""
Imputation Schemas: item and margin imputation settings, run report
"""
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

from app.constants.constants import DEFAULT_CYCLES, DEFAULT_IMPUTATIONS, PMM_DONORS, UTF8
from app.constants.enums import ImputationMethod, MarginMethod, SafeguardFlag, WorkingMode


class ItemImputationSpec(BaseModel):
    """Chained-equations settings for item nonresponse"""

    imputations: int = Field(DEFAULT_IMPUTATIONS, ge=2)  # L
    cycles: int = Field(DEFAULT_CYCLES, ge=1)
    visit_order: Optional[List[str]] = None  # Default: schema order
    methods: Dict[str, ImputationMethod] = {}  # Per-variable override
    predictors: Dict[str, List[str]] = {}  # Per-variable override; default all others
    include_design: bool = False
    include_weights: bool = False
    pmm_donors: int = Field(PMM_DONORS, ge=1)

    @field_validator("visit_order")
    def validate_visit_order(cls, v):
        if v is not None and len(set(v)) != len(v):
            raise ValueError("visit_order lists a variable twice")
        return v


class MarginImputationConfig(BaseModel):
    """How unit nonrespondents are imputed"""

    method: MarginMethod = MarginMethod.ADJ
    working_mode: WorkingMode = WorkingMode.LOGISTIC_ON_Z
    order: Optional[List[str]] = None  # Default: margined variables in schema order
    weighted_donors: bool = False

    @field_validator("method")
    def validate_method(cls, v):
        if v == MarginMethod.BD:
            raise ValueError("'bd' needs the pre-nonresponse sample; use it in STUDY.methods")
        return v


class SolverSummary(BaseModel):
    """One solved system"""

    variable: str
    residual: float
    iterations: int
    method: str
    out_of_domain: bool


class DatasetReport(BaseModel):
    """Everything worth knowing about how one completed dataset was made"""

    index: int  # 1-based
    item_events: List[str] = []
    target_totals: Dict[str, List[float]] = {}
    expected_totals: Dict[str, List[float]] = {}
    safeguards: Dict[str, Dict[str, int]] = {}
    solver: List[SolverSummary] = []
    hotdeck_fallbacks: Dict[str, int] = {}

    def count_flag(self, variable: str, flag: SafeguardFlag, count: int) -> None:
        if count:
            flags = self.safeguards.setdefault(variable, {})
            flags[flag.value] = flags.get(flag.value, 0) + int(count)

    @property
    def flag_total(self) -> int:
        return sum(sum(flags.values()) for flags in self.safeguards.values())


class RunReport(BaseModel):
    """Structured record of an imputation run"""

    project: str
    version: str
    seed: int
    method: MarginMethod
    working_mode: WorkingMode
    imputations: int
    cycles: int
    threads: int = Field(1, exclude=True)  # never written to report.json
    margined: List[str] = []
    variances: Dict[str, List[float]] = {}
    substreams: List[str] = []
    datasets: List[DatasetReport] = []

    def write(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding=UTF8)
        return path
