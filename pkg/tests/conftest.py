"""
Test Configuration and Fixtures
"""
from typing import Callable, Optional

import numpy as np
import pytest

from app.constants.enums import VariableKind
from app.models.frame import CompletedDataset, SampleFrame
from app.schemas.frame import AuxiliaryMargins, VariableSpec

SEED = 20240601


@pytest.fixture
def rng() -> np.random.Generator:
    """Fresh generator with a fixed seed"""
    return np.random.default_rng(SEED)


@pytest.fixture
def survey_schema():
    """Two margined binaries, one unmargined binary, one continuous"""
    return [
        VariableSpec(name="x1", kind=VariableKind.CATEGORICAL, levels=2, in_margins=True),
        VariableSpec(name="x2", kind=VariableKind.CATEGORICAL, levels=2, in_margins=True),
        VariableSpec(name="x3", kind=VariableKind.CATEGORICAL, levels=2),
        VariableSpec(name="x5", kind=VariableKind.CONTINUOUS, lower=0.0, upper=100.0),
    ]


@pytest.fixture
def make_frame() -> Callable[..., SampleFrame]:
    """Factory for small frames; weights default to 1, nobody missing"""

    def _make(
        schema,
        values,
        weights=None,
        unit_nr=None,
        population_size: Optional[int] = None,
        design=None,
        design_names=(),
    ) -> SampleFrame:
        values = np.asarray(values, dtype=float)
        n = len(values)
        weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        unit_nr = np.zeros(n, dtype=bool) if unit_nr is None else np.asarray(unit_nr, dtype=bool)
        values = values.copy()
        values[unit_nr] = np.nan
        population = int(np.ceil(weights.sum())) if population_size is None else population_size
        return SampleFrame.from_arrays(
            schema=schema,
            values=values,
            design_weights=weights,
            unit_nr=unit_nr,
            population_size=population,
            design=design,
            design_names=design_names,
        )

    return _make


@pytest.fixture
def survey_frame(survey_schema, make_frame) -> SampleFrame:
    """
    400 units with size-related weights, nonignorable unit nonresponse on
    x1 and x2, and about 15% item nonresponse per variable.
    """
    generator = np.random.default_rng(SEED)
    n = 400
    z = np.clip(generator.lognormal(np.log(10.0), 0.4, n), 2.0, 40.0)
    weights = 2.0 * z
    x1 = (generator.random(n) < 0.4).astype(float)
    x2 = (generator.random(n) < 0.3 + 0.3 * x1).astype(float)
    x3 = (generator.random(n) < 0.6 + 0.2 * x2).astype(float)
    x5 = np.clip(generator.normal(30 + 10 * x1 + 5 * x3, 8.0), 0.0, 100.0)
    values = np.column_stack([2.0 - x1, 2.0 - x2, 2.0 - x3, x5])

    unit_nr = generator.random(n) < 1.0 / (1.0 + np.exp(1.6 - 0.5 * x1 - 0.5 * x2))
    item_nr = (generator.random(values.shape) < 0.15) & ~unit_nr[:, None]
    values[item_nr] = np.nan
    return make_frame(
        survey_schema,
        values,
        weights=weights,
        unit_nr=unit_nr,
        population_size=int(np.ceil(weights.sum())) + 50,
        design=z[:, None],
        design_names=["z"],
    )


@pytest.fixture
def survey_margins(survey_frame) -> AuxiliaryMargins:
    """Margins with shares near the generating model, variances left to defaults"""
    return AuxiliaryMargins.from_shares(
        survey_frame.population_size, {"x1": [0.42, 0.58], "x2": [0.41, 0.59]}
    )


@pytest.fixture
def item_completed(survey_frame) -> CompletedDataset:
    """Respondent items filled with level 1 / the range midpoint; nonrespondents still missing"""
    values = np.array(survey_frame.values)
    respondents = survey_frame.respondents
    for j, spec in enumerate(survey_frame.schema):
        fill = 1.0 if spec.is_categorical else 50.0
        cells = respondents & np.isnan(values[:, j])
        values[cells, j] = fill
    dataset = CompletedDataset.from_frame(survey_frame)
    return CompletedDataset(frame=survey_frame, values=values, provenance=dataset.provenance)
