"""
Estimation Service Manager - completed-data estimates and multiple-imputation pooling
"""
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.constants.enums import EstimandKind
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import DataValidationError, NumericalError
from app.models.frame import CompletedDataset
from app.schemas.estimation import CombinedEstimate, Estimand, LevelRef, MetricRow

Estimate = Tuple[float, float]  # (point, variance)


class EstimationService:
    # ==================== COMPLETED-DATA ESTIMATORS ====================

    def ht_total(
        self,
        dataset: CompletedDataset,
        weights: np.ndarray,
        variable: str,
        level: Optional[int] = None,
    ) -> Estimate:
        """
        Σ w y with Poisson-design variance Σ w (w - 1) y², where y is the
        level indicator, or the value itself when level is None.
        """
        y = self._values(dataset, LevelRef(variable=variable, level=level))
        return float(weights @ y), float((weights * (weights - 1.0)) @ (y * y))

    def ratio_prob(
        self,
        dataset: CompletedDataset,
        weights: np.ndarray,
        target: LevelRef,
        condition: Sequence[LevelRef],
        name: str = "ratio",
    ) -> Estimate:
        """
        Σ w I(target, condition) / Σ w I(condition), variance by Taylor
        linearization under Poisson sampling.
        """
        in_condition = self._indicator(dataset, condition)
        both = in_condition * self._values(dataset, target)
        denominator = float(weights @ in_condition)
        if not denominator > 0:
            raise NumericalError(ERROR_MESSAGES["ZERO_WEIGHT_CONDITION"].format(estimand=name))
        ratio = float(weights @ both) / denominator
        linearized = (both - ratio * in_condition) / denominator
        variance = float((weights * (weights - 1.0)) @ (linearized**2))
        return min(max(ratio, 0.0), 1.0), variance

    def estimate(
        self, dataset: CompletedDataset, weights: np.ndarray, estimand: Estimand
    ) -> Estimate:
        if estimand.kind == EstimandKind.TOTAL:
            return self.ht_total(
                dataset, weights, estimand.target.variable, estimand.target.level
            )
        if estimand.kind == EstimandKind.CONDITIONAL_PROB:
            return self.ratio_prob(
                dataset, weights, estimand.target, estimand.condition, estimand.name
            )
        first, *rest = estimand.cells
        return self.ratio_prob(dataset, weights, first, rest, estimand.name)

    def _values(self, dataset: CompletedDataset, ref: LevelRef) -> np.ndarray:
        column = dataset.column(ref.variable)
        if ref.level is None:
            return np.nan_to_num(column)
        return (column == ref.level).astype(float)

    def _indicator(self, dataset: CompletedDataset, refs: Sequence[LevelRef]) -> np.ndarray:
        indicator = np.ones(dataset.frame.n_units)
        for ref in refs:
            indicator *= self._values(dataset, ref)
        return indicator

    # ==================== POOLING ====================

    def rubin_combine(self, estimates: Sequence[Estimate]) -> CombinedEstimate:
        """Pool (q_l, u_l) over L completed datasets"""
        if len(estimates) < 2:
            raise DataValidationError(
                ERROR_MESSAGES["TOO_FEW_IMPUTATIONS"].format(count=len(estimates))
            )
        points = np.array([q for q, _ in estimates], dtype=float)
        variances = np.array([u for _, u in estimates], dtype=float)
        return CombinedEstimate.from_components(
            estimate=float(points.mean()),
            within=float(variances.mean()),
            between=float(points.var(ddof=1)),
            imputations=len(estimates),
        )

    def pool(
        self,
        datasets: Sequence[CompletedDataset],
        weights_for: Callable[[CompletedDataset], np.ndarray],
        estimands: Sequence[Estimand],
    ) -> Dict[str, CombinedEstimate]:
        """Pooled estimate of every estimand; a single dataset gets complete-data inference"""
        per_dataset = [
            {e.name: self.estimate(d, weights_for(d), e) for e in estimands} for d in datasets
        ]
        pooled = {}
        for estimand in estimands:
            values = [row[estimand.name] for row in per_dataset]
            if len(values) == 1:
                pooled[estimand.name] = CombinedEstimate.from_single(*values[0])
            else:
                pooled[estimand.name] = self.rubin_combine(values)
        return pooled

    # ==================== REPLICATE METRICS ====================

    def evaluate_replicates(
        self,
        combined: Sequence[CombinedEstimate],
        truth: float,
        method: str = "",
        estimand: str = "",
    ) -> MetricRow:
        """rRMSE, coverage, bias and interval width across replicates"""
        if len(combined) < 2:
            raise DataValidationError(
                ERROR_MESSAGES["TOO_FEW_REPLICATES"].format(count=len(combined))
            )
        points = np.array([c.estimate for c in combined])
        rmse = float(np.sqrt(np.mean((points - truth) ** 2)))
        rrmse = rmse / abs(truth) if truth != 0 else None
        if rrmse is None:
            logger.warning(f"Truth of '{estimand}' is 0; reporting absolute RMSE only")
        return MetricRow(
            method=method,
            estimand=estimand,
            truth=truth,
            replicates=len(combined),
            mean_estimate=float(points.mean()),
            bias=float(points.mean() - truth),
            rmse=rmse,
            rrmse=rrmse,
            coverage=float(np.mean([c.covers(truth) for c in combined])),
            mean_width=float(np.mean([c.width for c in combined])),
        )

    def estimate_rows(
        self, pooled: Dict[str, CombinedEstimate], estimands: Sequence[Estimand]
    ) -> List[dict]:
        """Flat rows for an estimates table"""
        truths = {e.name: e.truth for e in estimands}
        return [
            {"estimand": name, **estimate.model_dump(), "truth": truths.get(name)}
            for name, estimate in pooled.items()
        ]


# Global instance
estimator = EstimationService()
