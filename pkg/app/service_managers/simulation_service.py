"""
Simulation Service Manager - synthetic population, Poisson samples, nonresponse, replicate study
"""
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.special import expit

from app.constants.enums import EstimandKind, MarginMethod, VariableKind
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import DataValidationError, MDAMError, StudyAbortedError
from app.middleware.logging import log_stage
from app.models.frame import CompletedDataset, SampleFrame
from app.schemas.estimation import CombinedEstimate, Estimand, LevelRef, MetricRow
from app.schemas.frame import AuxiliaryMargins, VariableMargin, VariableSpec
from app.schemas.imputation import ItemImputationSpec, MarginImputationConfig
from app.schemas.simulation import (
    DESIGN_TERM,
    SIZE_TERM,
    LinearPredictor,
    NonresponseConfig,
    PopulationConfig,
    StudyConfig,
)
from app.service_managers.estimation_service import estimator
from app.service_managers.item_imputation_service import item_imputer
from app.service_managers.pipeline_service import pipeline
from app.utils import run_parallel, substream

# Binary variables: level 1 is x = 1, level 2 is x = 0
SIZE_COLUMN = "z"


@dataclass(frozen=True)
class PopulationFrame:
    """A finite population stored as a census frame, plus its true values"""

    frame: SampleFrame
    inclusion_probs: np.ndarray
    truths: Dict[str, float] = field(default_factory=dict)

    @property
    def population_size(self) -> int:
        return self.frame.n_units

    @property
    def size(self) -> np.ndarray:
        return self.frame.design[:, 0]


@dataclass(frozen=True)
class ReplicateOutcome:
    index: int
    rows: List[dict] = field(default_factory=list)
    error: Optional[str] = None


@dataclass(frozen=True)
class StudyResult:
    replicates: pd.DataFrame
    metrics: pd.DataFrame
    failures: List[Tuple[int, str]]
    estimands: List[Estimand]
    margins: AuxiliaryMargins


class SimulationService:
    # ==================== POPULATION ====================

    def schema_for(
        self, config: PopulationConfig, margined: Sequence[str] = ()
    ) -> List[VariableSpec]:
        schema = [
            VariableSpec(
                name=name,
                kind=VariableKind.CATEGORICAL,
                levels=2,
                in_margins=name in margined,
            )
            for name in config.binary
        ]
        schema += [
            VariableSpec(
                name=name,
                kind=VariableKind.CONTINUOUS,
                lower=model.lower,
                upper=model.upper,
            )
            for name, model in config.continuous.items()
        ]
        return schema

    def default_estimands(self, config: PopulationConfig) -> List[Estimand]:
        """Level-1 totals, continuous totals, four conditional and two joint probabilities"""
        binary = list(config.binary)
        estimands = [
            Estimand(
                name=f"total_{name}",
                kind=EstimandKind.TOTAL,
                target=LevelRef(variable=name, level=1),
            )
            for name in binary
        ]
        estimands += [
            Estimand(name=f"total_{name}", kind=EstimandKind.TOTAL, target=LevelRef(variable=name))
            for name in config.continuous
        ]
        if len(binary) >= 4:
            x1, x2, x3, x4 = binary[:4]
            for target, given in [(x2, x1), (x3, x1), (x4, x2), (x3, x2)]:
                estimands.append(
                    Estimand(
                        name=f"p_{target}_given_{given}",
                        kind=EstimandKind.CONDITIONAL_PROB,
                        target=LevelRef(variable=target, level=1),
                        condition=[LevelRef(variable=given, level=1)],
                    )
                )
            for a, b in [(x1, x2), (x3, x4)]:
                estimands.append(
                    Estimand(
                        name=f"p_{a}_{b}",
                        kind=EstimandKind.JOINT_PROB,
                        cells=[LevelRef(variable=a, level=1), LevelRef(variable=b, level=1)],
                    )
                )
        return estimands

    def synth_population(
        self,
        config: PopulationConfig,
        rng: np.random.Generator,
        margined: Sequence[str] = (),
        estimands: Optional[Sequence[Estimand]] = None,
    ) -> PopulationFrame:
        """
        Generate the size measure, then each variable from its model in
        order, and store the exact values of the estimands.
        """
        n = config.population_size
        low, high = config.size_bounds
        z = np.clip(rng.lognormal(config.size_log_mean, config.size_log_sd, n), low, high)
        log_z = np.log(z)
        terms: Dict[str, np.ndarray] = {DESIGN_TERM: z, SIZE_TERM: log_z - log_z.mean()}

        for name, model in config.binary.items():
            terms[name] = (rng.random(n) < expit(self._predict(model, terms))).astype(float)
        for name, model in config.continuous.items():
            mean = self._predict(model, terms)
            terms[name] = np.clip(rng.normal(mean, model.sd), model.lower, model.upper)

        schema = self.schema_for(config, margined)
        values = np.column_stack([self._encode(spec, terms[spec.name]) for spec in schema])
        frame = SampleFrame.from_arrays(
            schema=schema,
            values=values,
            design_weights=np.ones(n),
            unit_nr=np.zeros(n, dtype=bool),
            population_size=n,
            design=z[:, None],
            design_names=[SIZE_COLUMN],
        )
        probs = np.minimum(1.0, 1.0 / (config.sampling_constant * z))
        estimands = self.default_estimands(config) if estimands is None else estimands
        truths = self.population_values(frame, estimands)
        logger.info(f"Synthesized population of {n} units, E[n] = {probs.sum():.0f}")
        return PopulationFrame(frame=frame, inclusion_probs=probs, truths=truths)

    def population_values(
        self, frame: SampleFrame, estimands: Sequence[Estimand]
    ) -> Dict[str, float]:
        census = CompletedDataset.from_frame(frame)
        ones = np.ones(frame.n_units)
        return {e.name: estimator.estimate(census, ones, e)[0] for e in estimands}

    def population_margins(
        self, population: PopulationFrame, margined: Sequence[str]
    ) -> AuxiliaryMargins:
        """Exact level counts of the margined variables; variances left to defaults"""
        frame = population.frame
        margins = {}
        for name in margined:
            column = frame.column(name)
            levels = frame.variable(name).levels
            margins[name] = VariableMargin(
                totals=[float((column == c).sum()) for c in range(1, levels + 1)]
            )
        return AuxiliaryMargins(population_size=frame.n_units, margins=margins)

    def _predict(self, model: LinearPredictor, terms: Dict[str, np.ndarray]) -> np.ndarray:
        eta = np.full(len(next(iter(terms.values()))), model.intercept)
        for term, slope in model.slopes.items():
            if term not in terms:
                raise DataValidationError(f"Unknown model term '{term}'")
            eta = eta + slope * terms[term]
        return eta

    def _encode(self, spec: VariableSpec, values: np.ndarray) -> np.ndarray:
        return 2.0 - values if spec.is_categorical else values

    def _decode(self, spec: VariableSpec, values: np.ndarray) -> np.ndarray:
        return (values == 1).astype(float) if spec.is_categorical else values

    def _terms(
        self, frame: SampleFrame, values: np.ndarray, exclude: Optional[str] = None
    ) -> Dict[str, np.ndarray]:
        terms = {DESIGN_TERM: frame.design[:, 0]}
        for j, spec in enumerate(frame.schema):
            if spec.name != exclude:
                terms[spec.name] = self._decode(spec, values[:, j])
        return terms

    # ==================== SAMPLING AND NONRESPONSE ====================

    def poisson_sample(
        self, population: PopulationFrame, rng: np.random.Generator
    ) -> SampleFrame:
        """Independent Bernoulli(π) inclusion, weights 1 / π"""
        probs = population.inclusion_probs
        chosen = rng.random(population.population_size) < probs
        frame = population.frame
        return SampleFrame.from_arrays(
            schema=frame.schema,
            values=frame.values[chosen],
            design_weights=1.0 / probs[chosen],
            unit_nr=np.zeros(int(chosen.sum()), dtype=bool),
            population_size=population.population_size,
            design=frame.design[chosen],
            design_names=frame.design_names,
            inclusion_probs=probs[chosen],
        )

    def apply_unit_nonresponse(
        self, sample: SampleFrame, config: NonresponseConfig, rng: np.random.Generator
    ) -> SampleFrame:
        """Blank every survey value of the units drawn as nonrespondents"""
        eta = self._predict(config.unit, self._terms(sample, sample.values))
        unit_nr = rng.random(sample.n_units) < expit(eta)
        values = np.array(sample.values)
        values[unit_nr] = np.nan
        logger.debug(f"Unit nonresponse: {unit_nr.mean():.1%} of {sample.n_units}")
        return replace(sample, values=values, unit_nr=unit_nr)

    def item_response_logits(
        self, sample: SampleFrame, values: np.ndarray, variable: str, model: LinearPredictor
    ) -> np.ndarray:
        """Missingness logits of one item; its own column is never read"""
        return self._predict(model, self._terms(sample, values, exclude=variable))

    def apply_item_nonresponse(
        self, sample: SampleFrame, config: NonresponseConfig, rng: np.random.Generator
    ) -> SampleFrame:
        """
        Blank respondent items independently, each from a model of the other
        items' true values and the size measure.
        """
        truth = np.array(sample.values)
        values = truth.copy()
        respondents = sample.respondents
        for j, spec in enumerate(sample.schema):
            model = config.item.get(spec.name)
            if model is None:
                continue
            logits = self.item_response_logits(sample, truth, spec.name, model)
            missing = respondents & (rng.random(sample.n_units) < expit(logits))
            values[missing, j] = np.nan
        return replace(sample, values=values)

    # ==================== STUDY ====================

    def run_study(
        self,
        study: StudyConfig,
        population_config: PopulationConfig,
        nonresponse: NonresponseConfig,
        item_spec: ItemImputationSpec,
        margin_config: MarginImputationConfig,
        seed: int,
        threads: int = 1,
        estimands: Optional[Sequence[Estimand]] = None,
    ) -> StudyResult:
        """
        Replicate: sample, nonresponse, every method's completed datasets,
        pooled estimates. Replicate r draws from the substream ("replicate", r).
        """
        with log_stage("population"):
            population = self.synth_population(
                population_config, substream(seed, "population"), study.margined, estimands
            )
        estimands = [
            e.model_copy(update={"truth": population.truths[e.name]})
            for e in (estimands or self.default_estimands(population_config))
        ]
        margins = self.population_margins(population, study.margined)
        item_spec = item_spec.model_copy(update={"imputations": study.imputations})

        def run(index: int) -> ReplicateOutcome:
            try:
                rows = self.run_replicate(
                    index, population, nonresponse, item_spec, margin_config,
                    study.methods, margins, estimands, seed,
                )
                return ReplicateOutcome(index=index, rows=rows)
            except MDAMError as error:
                logger.error(f"Replicate {index} failed: {error.detail}")
                return ReplicateOutcome(index=index, error=error.detail)
            except (np.linalg.LinAlgError, ValueError, ArithmeticError) as error:
                detail = f"{type(error).__name__}: {error}"
                logger.error(f"Replicate {index} failed: {detail}")
                return ReplicateOutcome(index=index, error=detail)

        with log_stage(f"{study.replicates} replicates"):
            outcomes = run_parallel(run, range(1, study.replicates + 1), threads)

        failures = [(o.index, o.error) for o in outcomes if o.error is not None]
        if len(failures) > study.failure_cap * study.replicates:
            raise StudyAbortedError(
                ERROR_MESSAGES["STUDY_ABORTED"].format(
                    failed=len(failures), total=study.replicates, cap=study.failure_cap
                )
            )
        replicates = pd.DataFrame([row for o in outcomes for row in o.rows])
        metrics = self.metrics_table(replicates)
        return StudyResult(
            replicates=replicates,
            metrics=metrics,
            failures=failures,
            estimands=estimands,
            margins=margins,
        )

    def run_replicate(
        self,
        index: int,
        population: PopulationFrame,
        nonresponse: NonresponseConfig,
        item_spec: ItemImputationSpec,
        margin_config: MarginImputationConfig,
        methods: Sequence[MarginMethod],
        margins: AuxiliaryMargins,
        estimands: Sequence[Estimand],
        seed: int,
    ) -> List[dict]:
        """One replicate; item-imputed datasets are shared by the methods"""
        rng = substream(seed, "replicate", index)
        full = self.poisson_sample(population, rng)
        sample = self.apply_unit_nonresponse(full, nonresponse, rng)
        sample = self.apply_item_nonresponse(sample, nonresponse, rng)
        replicate_seed = int(rng.integers(2**62))

        items = None
        rows = []
        for method in methods:
            if method == MarginMethod.BD:
                datasets = [CompletedDataset.from_frame(full)]
            else:
                if items is None:
                    items = item_imputer.impute_items(sample, item_spec, replicate_seed)
                config = margin_config.model_copy(update={"method": method})
                datasets, _ = pipeline.complete_from_items(
                    sample, items, margins, config, replicate_seed
                )
            pooled = estimator.pool(datasets, pipeline.weights_for(method), estimands)
            for estimand in estimands:
                rows.append(
                    self._replicate_row(index, method, estimand, pooled[estimand.name])
                )
        return rows

    def _replicate_row(
        self, index: int, method: MarginMethod, estimand: Estimand, pooled: CombinedEstimate
    ) -> dict:
        return {
            "replicate": index,
            "method": method.value,
            "estimand": estimand.name,
            **pooled.model_dump(),
            "truth": estimand.truth,
            "covered": pooled.covers(estimand.truth),
        }

    def metrics_table(self, replicates: pd.DataFrame) -> pd.DataFrame:
        """One row per method x estimand, in order of first appearance"""
        if replicates.empty:
            return pd.DataFrame(columns=list(MetricRow.model_fields))
        rows: List[MetricRow] = []
        for (method, name), group in replicates.groupby(["method", "estimand"], sort=False):
            combined = [
                CombinedEstimate(**{k: row[k] for k in CombinedEstimate.model_fields})
                for row in group.to_dict("records")
            ]
            truth = float(group["truth"].iloc[0])
            rows.append(estimator.evaluate_replicates(combined, truth, method, name))
        return pd.DataFrame([row.model_dump() for row in rows])


# Global instance
simulator = SimulationService()
