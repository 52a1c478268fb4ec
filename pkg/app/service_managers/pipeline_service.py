"""
Pipeline Service Manager - item imputation, margin imputation, hot deck
"""
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.constants.enums import MarginMethod, WeightMode, WorkingMode
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import DataValidationError, ImputationError
from app.middleware.logging import log_stage
from app.models.frame import CompletedDataset, SampleFrame, ht_weight_view, validate
from app.schemas.frame import AuxiliaryMargins
from app.schemas.imputation import (
    DatasetReport,
    ItemImputationSpec,
    MarginImputationConfig,
    RunReport,
)
from app.service_managers.hotdeck_service import hotdeck
from app.service_managers.item_imputation_service import item_imputer
from app.service_managers.margin_imputation_service import margin_imputer
from app.utils import substream, substream_label

AUXILIARY_STREAM = "auxiliary"


class PipelineService:
    def run_imputation(
        self,
        frame: SampleFrame,
        margins: Optional[AuxiliaryMargins],
        item_spec: ItemImputationSpec,
        config: MarginImputationConfig,
        seed: int,
        threads: int = 1,
        project: str = "",
        version: str = "",
    ) -> Tuple[List[CompletedDataset], RunReport]:
        """
        Three steps: chained equations for item nonresponse, margin
        imputation of the margined variables for unit nonrespondents, then
        hot deck for everything else.
        """
        reports = [DatasetReport(index=index) for index in range(1, item_spec.imputations + 1)]
        with log_stage("item imputation"):
            items = item_imputer.impute_items(frame, item_spec, seed, threads, reports)
        datasets, resolved = self.complete_from_items(
            frame, items, margins, config, seed, threads, reports
        )

        margined = self.margined_order(frame, config) if config.method.uses_margins else []
        report = RunReport(
            project=project,
            version=version,
            seed=seed,
            method=config.method,
            working_mode=self.working_mode(config),
            imputations=item_spec.imputations,
            cycles=item_spec.cycles,
            threads=threads,
            margined=margined,
            variances={
                name: [float(v) for v in resolved.variances(name)] for name in margined
            }
            if resolved is not None
            else {},
            substreams=self.substream_labels(item_spec.imputations, margined),
            datasets=reports,
        )
        return datasets, report

    def complete_from_items(
        self,
        frame: SampleFrame,
        items: Sequence[CompletedDataset],
        margins: Optional[AuxiliaryMargins],
        config: MarginImputationConfig,
        seed: int,
        threads: int = 1,
        reports: Optional[List[DatasetReport]] = None,
    ) -> Tuple[List[CompletedDataset], Optional[AuxiliaryMargins]]:
        """Finish item-imputed datasets; returns them with the margins actually used"""
        method = config.method
        datasets = list(items)
        margined: List[str] = []
        if method.uses_margins:
            margined = self.margined_order(frame, config)
            margins = self._checked_margins(frame, margins)
            auxiliary = hotdeck.resample_records(items[0], substream(seed, AUXILIARY_STREAM))
            margins = margin_imputer.resolve_variances(margins, margined, auxiliary)
            mode = self.working_mode(config)
            use_sys = method == MarginMethod.SYS and len(margined) == 2
            if method == MarginMethod.SYS and not use_sys:
                logger.warning(
                    f"System method needs exactly two margined variables, got {len(margined)}; "
                    "using multiplicative adjustment"
                )
            with log_stage("margin imputation"):
                for position, name in enumerate(margined):
                    if use_sys and position == 1:
                        datasets = margin_imputer.impute_margin_sys(
                            datasets, name, margined[0], margins, mode, seed,
                            method.weight_mode, threads, reports,
                        )
                    else:
                        datasets = margin_imputer.impute_margin_adj(
                            datasets, name, margined[:position], margins, mode, seed,
                            method.weight_mode, threads, reports,
                        )

        with log_stage("hot deck"):
            datasets = hotdeck.hotdeck_impute(
                datasets, margined, seed, threads, config.weighted_donors, reports
            )
        for index, dataset in enumerate(datasets, 1):
            check = validate(frame, completed=dataset)
            if not check.is_valid:
                raise ImputationError(
                    f"Completed dataset {index} is invalid: {check.codes()}", dataset=index
                )
        return datasets, margins if method.uses_margins else None

    def margined_order(self, frame: SampleFrame, config: MarginImputationConfig) -> List[str]:
        """Configured order, or margined variables in schema order"""
        margined = [spec.name for spec in frame.margined]
        if config.order is None:
            return margined
        for name in config.order:
            if name not in margined:
                raise DataValidationError(
                    ERROR_MESSAGES["NOT_MARGINED"].format(variable=name)
                )
        missing = set(margined) - set(config.order)
        if missing:
            raise DataValidationError(f"Margin order omits {sorted(missing)}")
        return list(config.order)

    def working_mode(self, config: MarginImputationConfig) -> WorkingMode:
        """Fabricated-weight runs always use intercept-only working distributions"""
        if config.method == MarginMethod.YR:
            return WorkingMode.INTERCEPT_ONLY
        return config.working_mode

    def weights_for(self, method: MarginMethod) -> Callable[[CompletedDataset], np.ndarray]:
        """Estimation weights of a completed dataset under a method"""
        def weights(dataset: CompletedDataset) -> np.ndarray:
            frame = dataset.frame
            mode = method.weight_mode if frame.unit_nr.any() else WeightMode.DESIGN
            return ht_weight_view(frame, mode)

        return weights

    def substream_labels(self, imputations: int, margined: Sequence[str]) -> List[str]:
        labels = [substream_label("item", index) for index in range(1, imputations + 1)]
        if margined:
            labels.append(substream_label(AUXILIARY_STREAM))
        for index in range(1, imputations + 1):
            labels += [substream_label("margin", index, name) for name in margined]
            labels.append(substream_label("hotdeck", index))
        return labels

    def _checked_margins(
        self, frame: SampleFrame, margins: Optional[AuxiliaryMargins]
    ) -> AuxiliaryMargins:
        if margins is None:
            raise DataValidationError("Margin methods need auxiliary margins")
        check = validate(frame, margins=margins)
        if not check.is_valid:
            raise DataValidationError(
                ERROR_MESSAGES["INVALID_FRAME"].format(
                    violations="; ".join(v.message for v in check.violations)
                )
            )
        return margins


# Global instance
pipeline = PipelineService()
