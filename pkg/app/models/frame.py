"""
Sample frames, completed datasets and their validation
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.constants.constants import WEIGHT_RELATIVE_TOLERANCE, WEIGHT_SUM_TOLERANCE
from app.constants.enums import Provenance, WeightMode
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import DataValidationError
from app.schemas.frame import AuxiliaryMargins, ValidationReport, VariableSpec


def _frozen(array: np.ndarray, dtype=float) -> np.ndarray:
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SampleFrame:
    """
    Sampled units with design weights and nonresponse indicators.

    values holds one column per schema variable with NaN for a missing cell.
    Item nonresponse is derived: a respondent's NaN cell is an item
    nonresponse, a nonrespondent's row is entirely NaN.
    """

    schema: Tuple[VariableSpec, ...]
    values: np.ndarray
    design_weights: np.ndarray
    inclusion_probs: np.ndarray
    unit_nr: np.ndarray
    population_size: int
    design: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    design_names: Tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.design_weights)
        design = np.asarray(self.design, dtype=float)
        if design.ndim == 1:
            design = design[:, None]
        if design.size == 0:
            design = np.zeros((n, 0))
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "design_weights", _frozen(self.design_weights))
        object.__setattr__(self, "inclusion_probs", _frozen(self.inclusion_probs))
        object.__setattr__(self, "unit_nr", _frozen(self.unit_nr, dtype=bool))
        object.__setattr__(self, "design", _frozen(design))
        object.__setattr__(self, "design_names", tuple(self.design_names))

    @classmethod
    def from_arrays(
        cls,
        schema: Sequence[VariableSpec],
        values: np.ndarray,
        design_weights: np.ndarray,
        unit_nr: np.ndarray,
        population_size: int,
        design: Optional[np.ndarray] = None,
        design_names: Sequence[str] = (),
        inclusion_probs: Optional[np.ndarray] = None,
    ) -> "SampleFrame":
        """Build a frame; inclusion probabilities default to 1 / weight"""
        weights = np.asarray(design_weights, dtype=float)
        if inclusion_probs is None:
            with np.errstate(divide="ignore"):
                inclusion_probs = 1.0 / weights
        return cls(
            schema=tuple(schema),
            values=np.asarray(values, dtype=float),
            design_weights=weights,
            inclusion_probs=np.asarray(inclusion_probs, dtype=float),
            unit_nr=np.asarray(unit_nr, dtype=bool),
            population_size=int(population_size),
            design=np.zeros((len(weights), 0)) if design is None else np.asarray(design),
            design_names=tuple(design_names),
        )

    @property
    def n_units(self) -> int:
        return len(self.design_weights)

    @property
    def names(self) -> List[str]:
        return [spec.name for spec in self.schema]

    @property
    def respondents(self) -> np.ndarray:
        return ~self.unit_nr

    @property
    def item_nr(self) -> np.ndarray:
        """R_ij; False for unit nonrespondents, where it is undefined"""
        return np.isnan(self.values) & self.respondents[:, None]

    @property
    def margined(self) -> List[VariableSpec]:
        return [spec for spec in self.schema if spec.in_margins]

    def index_of(self, name: str) -> int:
        for j, spec in enumerate(self.schema):
            if spec.name == name:
                return j
        raise DataValidationError(ERROR_MESSAGES["UNKNOWN_VARIABLE"].format(variable=name))

    def variable(self, name: str) -> VariableSpec:
        return self.schema[self.index_of(name)]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index_of(name)]


@dataclass(frozen=True)
class CompletedDataset:
    """
    One (partially) completed copy of a sample frame.

    Updates return new datasets; provenance codes follow Provenance.code.
    """

    frame: SampleFrame
    values: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "provenance", _frozen(self.provenance, dtype=np.int8))

    @classmethod
    def from_frame(cls, frame: SampleFrame) -> "CompletedDataset":
        provenance = np.where(
            np.isnan(frame.values), Provenance.MISSING.code, Provenance.OBSERVED.code
        )
        return cls(frame=frame, values=frame.values, provenance=provenance)

    @property
    def is_complete(self) -> bool:
        return not np.isnan(self.values).any()

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.frame.index_of(name)]

    def with_column(
        self, name: str, rows: np.ndarray, new_values: np.ndarray, provenance: Provenance
    ) -> "CompletedDataset":
        """Copy with cells (rows, name) replaced"""
        j = self.frame.index_of(name)
        values = self.values.copy()
        codes = self.provenance.copy()
        values[rows, j] = new_values
        codes[rows, j] = provenance.code
        return CompletedDataset(frame=self.frame, values=values, provenance=codes)

    def with_block(
        self,
        rows: np.ndarray,
        columns: Sequence[int],
        block: np.ndarray,
        provenance: Provenance,
    ) -> "CompletedDataset":
        """Copy with a rows x columns block replaced"""
        values = self.values.copy()
        codes = self.provenance.copy()
        index = np.ix_(np.asarray(rows), np.asarray(columns, dtype=int))
        values[index] = block
        codes[index] = provenance.code
        return CompletedDataset(frame=self.frame, values=values, provenance=codes)

    def provenance_of(self, name: str) -> List[Provenance]:
        j = self.frame.index_of(name)
        return [Provenance.from_code(code) for code in self.provenance[:, j]]


def ht_weight_view(
    frame: SampleFrame, mode: WeightMode, population_size: Optional[int] = None
) -> np.ndarray:
    """
    Weights for Horvitz-Thompson totals.

    Design mode returns the design weights. Fabricated mode keeps respondents'
    design weights and gives every unit nonrespondent the constant
    (N - sum of respondent weights) / #nonrespondents, so the vector sums to N.
    """
    weights = np.array(frame.design_weights, dtype=float)
    if mode == WeightMode.DESIGN:
        return weights

    population = frame.population_size if population_size is None else population_size
    n_nonrespondents = int(frame.unit_nr.sum())
    if n_nonrespondents == 0:
        raise DataValidationError(ERROR_MESSAGES["NO_NONRESPONDENTS"])
    respondent_total = float(weights[frame.respondents].sum())
    constant = (population - respondent_total) / n_nonrespondents
    if constant <= 0:
        raise DataValidationError(
            ERROR_MESSAGES["RESPONDENT_WEIGHTS_EXCEED_N"].format(
                total=respondent_total, population=population
            )
        )
    weights[frame.unit_nr] = constant
    return weights


def _validate_margins(
    frame: SampleFrame, margins: AuxiliaryMargins, report: ValidationReport
) -> None:
    if margins.population_size != frame.population_size:
        report.add(
            "margin_population",
            f"margins N={margins.population_size} but frame N={frame.population_size}",
        )
    for spec in frame.margined:
        margin = margins.margins.get(spec.name)
        if margin is None:
            report.add("margin_missing", f"no margin for margined variable '{spec.name}'")
            continue
        totals = np.asarray(margin.totals, dtype=float)
        if len(totals) != spec.levels:
            report.add(
                "margin_levels",
                f"'{spec.name}' has {spec.levels} levels but {len(totals)} totals",
            )
        if (totals < 0).any():
            report.add("margin_negative", f"'{spec.name}' has a negative total")
        if not np.isclose(
            totals.sum(),
            margins.population_size,
            rtol=WEIGHT_RELATIVE_TOLERANCE,
            atol=WEIGHT_SUM_TOLERANCE,
        ):
            report.add(
                "margin_sum",
                f"margin sum ≠ N for '{spec.name}' ({totals.sum():.6g} vs "
                f"{margins.population_size})",
            )
        variances = margins.variances(spec.name)
        if variances is not None:
            given = variances[~np.isnan(variances)]
            if not (np.isfinite(given).all() and (given > 0).all()):
                report.add(
                    "margin_variance",
                    f"'{spec.name}' variances must be finite and positive",
                )


def _validate_completed(
    frame: SampleFrame, completed: CompletedDataset, report: ValidationReport
) -> None:
    if completed.values.shape != frame.values.shape:
        report.add("completed_shape", "completed dataset shape differs from frame")
        return
    observed = ~np.isnan(frame.values)
    if not np.array_equal(completed.values[observed], frame.values[observed]):
        report.add("observed_changed", "completed dataset changed an observed cell")
    if not completed.is_complete:
        report.add("incomplete", "completed dataset has missing cells")
    for j, spec in enumerate(frame.schema):
        column = completed.values[:, j]
        present = ~np.isnan(column)
        if not spec.in_support(column[present]).all():
            report.add(
                "completed_out_of_range", f"imputed '{spec.name}' outside its support"
            )


def validate(
    frame: SampleFrame,
    margins: Optional[AuxiliaryMargins] = None,
    completed: Optional[CompletedDataset] = None,
) -> ValidationReport:
    """List every invariant violation; an empty report means valid"""
    report = ValidationReport()
    probs = frame.inclusion_probs
    weights = frame.design_weights

    if not ((probs > 0) & (probs <= 1)).all():
        report.add("inclusion_prob_range", "inclusion probability out of range (0, 1]")
    if not (weights > 0).all():
        report.add("nonpositive_weight", "design weight must be positive")
    with np.errstate(invalid="ignore", over="ignore"):
        mismatch = np.abs(weights * probs - 1.0) > WEIGHT_RELATIVE_TOLERANCE
    if mismatch.any():
        report.add("weight_mismatch", "design weight differs from 1 / inclusion probability")
    if frame.population_size < frame.n_units:
        report.add(
            "population_too_small",
            f"N={frame.population_size} below sample size {frame.n_units}",
        )

    unit_rows = frame.values[frame.unit_nr]
    if unit_rows.size and not np.isnan(unit_rows).all():
        report.add("unit_nr_values", "unit nonrespondent carries survey values")

    for j, spec in enumerate(frame.schema):
        column = frame.values[:, j]
        present = ~np.isnan(column)
        if not spec.in_support(column[present]).all():
            report.add("value_out_of_range", f"'{spec.name}' has values outside its support")

    if margins is not None:
        _validate_margins(frame, margins, report)
    if completed is not None:
        _validate_completed(frame, completed, report)
    return report
