"""
Item Imputation Service Manager - chained equations among unit respondents
"""
from typing import List, Optional

import numpy as np
from loguru import logger

from app.constants.decorators import with_imputation_context
from app.constants.enums import ImputationMethod, Provenance
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import DataValidationError, ImputationError
from app.models.frame import CompletedDataset, SampleFrame
from app.regress import draw_params, fit_linear, fit_logistic, predict_proba
from app.schemas.frame import VariableSpec
from app.schemas.imputation import DatasetReport, ItemImputationSpec
from app.utils import (
    draw_categorical,
    indicator_columns,
    run_parallel,
    substream,
)


class ItemImputationService:
    def initial_fill(
        self, frame: SampleFrame, rng: np.random.Generator
    ) -> CompletedDataset:
        """
        Fill every missing respondent cell with a design-weighted draw from the
        observed respondent values of the same variable.
        """
        dataset = CompletedDataset.from_frame(frame)
        respondents = frame.respondents
        weights = frame.design_weights
        for j, spec in enumerate(frame.schema):
            missing = np.flatnonzero(frame.item_nr[:, j])
            if not missing.size:
                continue
            donors = np.flatnonzero(respondents & ~np.isnan(frame.values[:, j]))
            if not donors.size:
                raise ImputationError(
                    ERROR_MESSAGES["NO_OBSERVED_DONORS"].format(variable=spec.name),
                    variable=spec.name,
                )
            p = weights[donors] / weights[donors].sum()
            picks = rng.choice(donors, size=missing.size, p=p)
            dataset = dataset.with_column(
                spec.name, missing, frame.values[picks, j], Provenance.ITEM_IMPUTED
            )
        return dataset

    def chained_pass(
        self,
        dataset: CompletedDataset,
        spec: ItemImputationSpec,
        rng: np.random.Generator,
        cycle: int = 1,
        events: Optional[List[str]] = None,
    ) -> CompletedDataset:
        """One sweep over the variables with item nonresponse"""
        for variable in self.visit_order(dataset.frame, spec):
            dataset = self._impute_variable(dataset, variable, cycle, spec, rng, events)
        return dataset

    def impute_items(
        self,
        frame: SampleFrame,
        spec: ItemImputationSpec,
        seed: int,
        threads: int = 1,
        reports: Optional[List[DatasetReport]] = None,
    ) -> List[CompletedDataset]:
        """
        L independent chains; chain l draws from the substream ("item", l).

        Unit nonrespondents stay entirely missing.
        """
        if not frame.respondents.any():
            raise ImputationError(ERROR_MESSAGES["NO_RESPONDENTS"])
        self.visit_order(frame, spec)
        logger.info(
            f"Imputing items: {spec.imputations} chains x {spec.cycles} cycles, "
            f"{int(frame.item_nr.sum())} missing cells"
        )

        def run_chain(index: int):
            events: List[str] = []
            rng = substream(seed, "item", index)
            try:
                dataset = self.initial_fill(frame, rng)
                for cycle in range(1, spec.cycles + 1):
                    dataset = self.chained_pass(dataset, spec, rng, cycle, events)
            except ImputationError as error:
                error.dataset = index
                raise
            return dataset, events

        chains = run_parallel(run_chain, range(1, spec.imputations + 1), threads)
        if reports is not None:
            for report, (_, events) in zip(reports, chains):
                report.item_events.extend(events)
        return [dataset for dataset, _ in chains]

    def visit_order(self, frame: SampleFrame, spec: ItemImputationSpec) -> List[VariableSpec]:
        """Variables with item nonresponse in visiting order"""
        missing = {
            variable.name
            for j, variable in enumerate(frame.schema)
            if frame.item_nr[:, j].any()
        }
        if spec.visit_order is None:
            order = [v for v in frame.schema if v.name in missing]
        else:
            for name in spec.visit_order:
                frame.index_of(name)
            absent = missing - set(spec.visit_order)
            if absent:
                raise DataValidationError(
                    f"visit_order omits variables with missing items: {sorted(absent)}"
                )
            order = [frame.variable(name) for name in spec.visit_order if name in missing]
        for variable in order:
            self._method_for(variable, spec)
        return order

    def _method_for(self, variable: VariableSpec, spec: ItemImputationSpec) -> ImputationMethod:
        method = spec.methods.get(variable.name)
        if method is None:
            return (
                ImputationMethod.BAYES_LOGISTIC
                if variable.is_categorical
                else ImputationMethod.BAYES_LINEAR
            )
        if variable.is_categorical != (method == ImputationMethod.BAYES_LOGISTIC):
            raise DataValidationError(
                f"Method '{method.value}' does not fit {variable.kind.value} '{variable.name}'"
            )
        return method

    # ==================== MODEL PER VARIABLE ====================

    @with_imputation_context
    def _impute_variable(
        self,
        dataset: CompletedDataset,
        variable: VariableSpec,
        cycle: int,
        spec: ItemImputationSpec,
        rng: np.random.Generator,
        events: Optional[List[str]],
    ) -> CompletedDataset:
        frame = dataset.frame
        j = frame.index_of(variable.name)
        respondents = frame.respondents
        observed = respondents & ~np.isnan(frame.values[:, j])
        missing = np.flatnonzero(frame.item_nr[:, j])
        design = self._predictors(dataset, variable, spec)
        y = dataset.values[observed, j]
        ones = np.ones(int(observed.sum()))

        method = self._method_for(variable, spec)
        if method == ImputationMethod.BAYES_LOGISTIC:
            present = np.unique(y)
            if len(present) == 1:
                draws = np.full(missing.size, present[0])
            else:
                fit = fit_logistic(design[observed], y, ones, levels=present)
                if fit.separated and events is not None:
                    events.append(f"cycle {cycle}: '{variable.name}' separated, ridge applied")
                draw = draw_params(fit, rng)
                probs = predict_proba(fit, design[missing], draw.coefficients)
                draws = draw_categorical(probs, rng, fit.levels)
        else:
            fit = fit_linear(design[observed], y, ones)
            if fit.rank_deficient and events is not None:
                events.append(f"cycle {cycle}: '{variable.name}' rank deficient, ridge applied")
            draw = draw_params(fit, rng)
            if method == ImputationMethod.PMM:
                draws = self._pmm(
                    design[observed] @ fit.coefficients,
                    design[missing] @ draw.coefficients,
                    y,
                    spec.pmm_donors,
                    rng,
                )
            else:
                mean = design[missing] @ draw.coefficients
                noise = rng.standard_normal(missing.size) * np.sqrt(draw.residual_variance)
                draws = np.clip(mean + noise, variable.lower, variable.upper)

        return dataset.with_column(variable.name, missing, draws, Provenance.ITEM_IMPUTED)

    def _pmm(
        self,
        fitted_observed: np.ndarray,
        predicted_missing: np.ndarray,
        observed_values: np.ndarray,
        donors: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Copy the value of one of the k observed cases closest in predicted mean"""
        k = min(donors, len(fitted_observed))
        distance = np.abs(predicted_missing[:, None] - fitted_observed[None, :])
        nearest = np.argpartition(distance, k - 1, axis=1)[:, :k]
        chosen = nearest[np.arange(len(nearest)), rng.integers(0, k, size=len(nearest))]
        return observed_values[chosen]

    def _predictors(
        self, dataset: CompletedDataset, variable: VariableSpec, spec: ItemImputationSpec
    ) -> np.ndarray:
        """
        Intercept, other survey variables (dummies for categoricals, standardized
        continuous), then design columns and weights when configured.
        """
        frame = dataset.frame
        respondents = frame.respondents
        names = spec.predictors.get(variable.name) or [
            other.name for other in frame.schema if other.name != variable.name
        ]
        columns = [np.ones((frame.n_units, 1))]
        for name in names:
            other = frame.variable(name)
            values = dataset.column(name)
            if other.is_categorical:
                columns.append(indicator_columns(values, other.levels))
            else:
                columns.append(self._standardize(values, respondents)[:, None])
        if spec.include_design and frame.design.shape[1]:
            columns.extend(
                self._standardize(frame.design[:, k], respondents)[:, None]
                for k in range(frame.design.shape[1])
            )
        if spec.include_weights:
            columns.append(self._standardize(frame.design_weights, respondents)[:, None])
        return np.hstack(columns)

    def _standardize(self, values: np.ndarray, rows: np.ndarray) -> np.ndarray:
        center = np.nanmean(values[rows])
        scale = np.nanstd(values[rows])
        return (values - center) / (scale if scale > 0 else 1.0)


# Global instance
item_imputer = ItemImputationService()
