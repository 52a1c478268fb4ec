"""
Simulation Schemas: synthetic population, nonresponse mechanisms, study settings
"""
import math
from typing import Dict, List, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from app.constants.constants import DEFAULT_IMPUTATIONS, REPLICATE_FAILURE_CAP
from app.constants.enums import MarginMethod

SIZE_TERM = "log_z"  # Centered log size measure
DESIGN_TERM = "z"  # Raw size measure


class LinearPredictor(BaseModel):
    """intercept + Σ slope * term; terms are variable names, 'z' or 'log_z'"""

    intercept: float = 0.0
    slopes: Dict[str, float] = {}

    @model_validator(mode="after")
    def validate_finite(self):
        values = [self.intercept, *self.slopes.values()]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("coefficients must be finite")
        return self


class BinaryModel(LinearPredictor):
    """logit P(x = 1)"""


class ContinuousModel(LinearPredictor):
    """Normal mean with standard deviation sd, clipped to [lower, upper]"""

    sd: float = Field(gt=0)
    lower: float
    upper: float

    @model_validator(mode="after")
    def validate_bounds(self):
        if not self.lower < self.upper:
            raise ValueError("continuous model needs lower < upper")
        return self


def _default_binary() -> Dict[str, BinaryModel]:
    return {
        "x1": BinaryModel(intercept=-0.4, slopes={SIZE_TERM: 0.2}),
        "x2": BinaryModel(intercept=-0.5, slopes={"x1": 0.4, SIZE_TERM: 0.2}),
        "x3": BinaryModel(intercept=1.8, slopes={"x1": 0.2, "x2": 0.5}),
        "x4": BinaryModel(intercept=-1.5, slopes={"x1": -0.2, "x2": -0.8, "x3": 0.1}),
    }


def _default_continuous() -> Dict[str, ContinuousModel]:
    return {
        "x5": ContinuousModel(
            intercept=20.0,
            slopes={"x1": 3.0, "x2": 2.0, "x3": 1.0, "x4": -4.0},
            sd=12.0,
            lower=0.0,
            upper=888.0,
        ),
        "x6": ContinuousModel(
            intercept=22.0,
            slopes={"x1": 4.0, "x2": 3.0, "x3": 5.0, "x4": -3.0, "x5": 0.05},
            sd=9.0,
            lower=0.0,
            upper=80.0,
        ),
    }


class PopulationConfig(BaseModel):
    """
    Synthetic population generator.

    The size measure z is lognormal, clipped to size_bounds, with inclusion
    probability min(1, 1 / (sampling_constant * z)). Binary variables are
    generated first, in order, then continuous ones; each model may use any
    variable generated before it.
    """

    population_size: int = Field(100_000, ge=1000)
    size_log_mean: float = math.log(10.0) + 0.125
    size_log_sd: float = Field(0.5, gt=0)
    size_bounds: Tuple[float, float] = (1.0, 100.0)
    sampling_constant: float = Field(10.0, gt=0)
    binary: Dict[str, BinaryModel] = Field(default_factory=_default_binary)
    continuous: Dict[str, ContinuousModel] = Field(default_factory=_default_continuous)

    @field_validator("size_bounds")
    def validate_size_bounds(cls, v):
        if not 0 < v[0] < v[1]:
            raise ValueError("size_bounds must satisfy 0 < lower < upper")
        return v

    @model_validator(mode="after")
    def validate_generation_order(self):
        """Models may only reference variables generated earlier"""
        seen = {SIZE_TERM, DESIGN_TERM}
        for name, model in [*self.binary.items(), *self.continuous.items()]:
            unknown = set(model.slopes) - seen
            if unknown:
                raise ValueError(f"'{name}' uses {sorted(unknown)} before they exist")
            seen.add(name)
        return self

    @property
    def variables(self) -> List[str]:
        return [*self.binary, *self.continuous]


def _default_item() -> Dict[str, LinearPredictor]:
    """Response-indicator models; an item never enters its own model"""
    binary = ["x1", "x2", "x3", "x4"]
    continuous = ["x5", "x6"]
    models = {}
    for name in binary + continuous:
        slopes = {k: 0.1 for k in binary if k != name}
        slopes.update({k: 0.0001 for k in continuous if k != name})
        slopes[DESIGN_TERM] = 0.00001
        intercept = -1.6 if name in binary else -1.5
        models[name] = LinearPredictor(intercept=intercept, slopes=slopes)
    return models


class NonresponseConfig(BaseModel):
    """Unit nonresponse (not at random) and itemwise item nonresponse"""

    unit: LinearPredictor = Field(
        default_factory=lambda: LinearPredictor(
            intercept=-1.6, slopes={"x1": 0.5, "x2": 0.5}
        )
    )
    item: Dict[str, LinearPredictor] = Field(default_factory=_default_item)

    @model_validator(mode="after")
    def validate_itemwise(self):
        for name, model in self.item.items():
            if name in model.slopes:
                raise ValueError(f"item model for '{name}' may not use '{name}' itself")
        return self


class StudyConfig(BaseModel):
    """Replication study settings"""

    replicates: int = Field(200, ge=2)  # S
    imputations: int = Field(DEFAULT_IMPUTATIONS, ge=2)  # L
    methods: List[MarginMethod] = [
        MarginMethod.ADJ,
        MarginMethod.SYS,
        MarginMethod.YR,
        MarginMethod.IH,
    ]
    margined: List[str] = ["x1", "x2"]
    failure_cap: float = Field(REPLICATE_FAILURE_CAP, ge=0, le=1)

    @field_validator("methods")
    def validate_methods(cls, v):
        if not v:
            raise ValueError("at least one method is required")
        if len(set(v)) != len(v):
            raise ValueError("methods must be distinct")
        return v
