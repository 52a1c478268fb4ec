"""
Margin Imputation Service Manager - unit nonrespondents constrained by known totals
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.constants.constants import (
    CONTINUITY_WEIGHT_FRACTION,
    SIMPLEX_TOLERANCE,
    TARGET_REDRAW_LIMIT,
)
from app.constants.enums import Provenance, SafeguardFlag, WeightMode, WorkingMode
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import DataValidationError, ImputationError, NumericalError
from app.models.frame import CompletedDataset, SampleFrame, ht_weight_view
from app.models.imputation import (
    AdjustmentFactors,
    ConditionalProbTable,
    FinalizedProbs,
    SysLayout,
    TargetTotalDraw,
    WorkingDistribution,
)
from app.regress import EquationSystem, fit_logistic, predict_proba, solve_system
from app.schemas.frame import AuxiliaryMargins
from app.schemas.imputation import DatasetReport, SolverSummary
from app.utils import draw_categorical, indicator_columns, run_parallel, substream


def _level_totals(values: np.ndarray, weights: np.ndarray, rows: np.ndarray, levels: int):
    return np.array([weights[rows & (values == c)].sum() for c in range(1, levels + 1)])


class MarginImputationService:
    # ==================== TARGET TOTALS ====================

    def sample_target_totals(
        self, margins: AuxiliaryMargins, variable: str, rng: np.random.Generator
    ) -> TargetTotalDraw:
        """
        Draw T̂_c ~ N(T_c, V_c) for every level but the last, which takes
        N minus the others. Draws with a negative level are redrawn.
        """
        totals = margins.totals(variable)
        variances = margins.variances(variable)
        if variances is None or np.isnan(variances[:-1]).any():
            level = 1 if variances is None else int(np.flatnonzero(np.isnan(variances))[0]) + 1
            raise DataValidationError(
                ERROR_MESSAGES["UNRESOLVED_VARIANCE"].format(variable=variable, level=level)
            )
        scale = np.sqrt(variances[:-1])
        for attempt in range(1, TARGET_REDRAW_LIMIT + 1):
            head = rng.normal(totals[:-1], scale)
            sampled = np.append(head, margins.population_size - head.sum())
            if (sampled >= 0).all():
                return TargetTotalDraw(variable=variable, totals=sampled, attempts=attempt)
        raise ImputationError(
            ERROR_MESSAGES["MARGIN_VARIANCE_TOO_LARGE"].format(
                variable=variable, attempts=TARGET_REDRAW_LIMIT
            ),
            variable=variable,
        )

    def default_variances(self, dataset: CompletedDataset, variable: str) -> np.ndarray:
        """Poisson-design variance estimate Σ w(w-1) I(x=c) over all sampled units"""
        frame = dataset.frame
        spec = frame.variable(variable)
        weights = frame.design_weights
        values = dataset.column(variable)
        every = np.ones(frame.n_units, dtype=bool)
        return _level_totals(values, weights * (weights - 1.0), every, spec.levels)

    def resolve_variances(
        self, margins: AuxiliaryMargins, names: Sequence[str], auxiliary: CompletedDataset
    ) -> AuxiliaryMargins:
        """Fill unset variances with defaults from an auxiliary completed dataset"""
        for name in names:
            given = margins.variances(name)
            defaults = self.default_variances(auxiliary, name)
            merged = defaults if given is None else np.where(np.isnan(given), defaults, given)
            margins = margins.with_variances(name, merged)
        return margins

    def fabricated_weights(
        self, frame: SampleFrame, population_size: Optional[int] = None
    ) -> np.ndarray:
        """Respondents keep their weights; nonrespondents share N minus theirs"""
        return ht_weight_view(frame, WeightMode.FABRICATED, population_size)

    # ==================== WORKING DISTRIBUTIONS ====================

    def working_distribution(
        self,
        dataset: CompletedDataset,
        variable: str,
        conditioners: Sequence[str],
        mode: WorkingMode,
    ) -> WorkingDistribution:
        """
        Initial imputation probabilities for every unit nonrespondent, fitted
        on respondents with design case weights.
        """
        frame = dataset.frame
        spec = frame.variable(variable)
        if not spec.is_categorical:
            raise DataValidationError(
                ERROR_MESSAGES["NOT_CATEGORICAL"].format(variable=variable)
            )
        rows = np.flatnonzero(frame.unit_nr)
        if mode == WorkingMode.WEIGHTED_RATIO:
            probs = self._ratio_shares(dataset, variable, conditioners, rows)
            return WorkingDistribution(variable=variable, rows=rows, probs=probs, mode=mode)

        respondents = frame.respondents
        values = dataset.column(variable)
        present = np.unique(values[respondents])
        probs = np.zeros((rows.size, spec.levels))
        if present.size == 1:
            probs[:, int(present[0]) - 1] = 1.0
        else:
            design = self._working_design(dataset, conditioners, mode)
            fit = fit_logistic(
                design[respondents],
                values[respondents],
                frame.design_weights[respondents],
                levels=present,
            )
            probs[:, present.astype(int) - 1] = predict_proba(fit, design[rows])
        return WorkingDistribution(variable=variable, rows=rows, probs=probs, mode=mode)

    def _working_design(
        self, dataset: CompletedDataset, conditioners: Sequence[str], mode: WorkingMode
    ) -> np.ndarray:
        frame = dataset.frame
        columns = [np.ones((frame.n_units, 1))]
        for name in conditioners:
            columns.append(indicator_columns(dataset.column(name), frame.variable(name).levels))
        if mode == WorkingMode.LOGISTIC_ON_Z:
            if frame.design.shape[1]:
                columns.append(frame.design)
            else:
                logger.warning("No design columns in the sample; working model omits Z")
        elif mode == WorkingMode.LOGISTIC_ON_W:
            columns.append(frame.design_weights[:, None])
        return np.hstack(columns)

    def _ratio_shares(
        self,
        dataset: CompletedDataset,
        variable: str,
        conditioners: Sequence[str],
        rows: np.ndarray,
    ) -> np.ndarray:
        """Design-weighted respondent level shares within each conditioning cell"""
        frame = dataset.frame
        levels = frame.variable(variable).levels
        weights = frame.design_weights
        respondents = frame.respondents
        values = dataset.column(variable)
        keys = [dataset.column(name) for name in conditioners]
        overall = _level_totals(values, weights, respondents, levels)
        overall = overall / overall.sum()

        probs = np.empty((rows.size, levels))
        cache = {}
        for position, row in enumerate(rows):
            pattern = tuple(key[row] for key in keys)
            if pattern not in cache:
                cell = respondents.copy()
                for key, value in zip(keys, pattern):
                    cell &= key == value
                totals = _level_totals(values, weights, cell, levels)
                if totals.sum() > 0:
                    cache[pattern] = totals / totals.sum()
                else:
                    logger.warning(
                        f"No respondents in cell {pattern} for '{variable}'; using overall shares"
                    )
                    cache[pattern] = overall
            probs[position] = cache[pattern]
        return probs

    # ==================== ADJUSTMENT ====================

    def adjustment_factors(
        self,
        working: WorkingDistribution,
        dataset: CompletedDataset,
        weights: np.ndarray,
        draw: TargetTotalDraw,
    ) -> AdjustmentFactors:
        """
        f_c = (T̂_c - respondent total_c) / Σ_nonrespondents w p_c, computed for
        every level; levels 1..m-1 must be finite.
        """
        frame = dataset.frame
        m = working.levels
        values = dataset.column(working.variable)
        needed = draw.totals - _level_totals(values, weights, frame.respondents, m)
        mass = weights[working.rows] @ working.probs
        full = np.array(
            [
                self._factor(working.variable, c + 1, needed[c], mass[c], strict=c < m - 1)
                for c in range(m)
            ]
        )
        n = working.rows.size
        return AdjustmentFactors(
            variable=working.variable,
            partial=np.tile(full[: m - 1], (n, 1)),
            full=np.tile(full, (n, 1)),
        )

    def _factor(
        self, variable: str, level: int, needed: float, mass: float, strict: bool
    ) -> float:
        if mass == 0:
            if needed == 0:
                return 1.0
            if not strict:
                return np.nan
            raise ImputationError(
                ERROR_MESSAGES["ZERO_DENOMINATOR"].format(
                    variable=variable, level=level, needed=needed
                ),
                variable=variable,
            )
        factor = needed / mass
        if not np.isfinite(factor):
            raise ImputationError(
                ERROR_MESSAGES["NON_FINITE_FACTOR"].format(variable=variable, level=level),
                variable=variable,
            )
        return float(factor)

    def finalize_probs(
        self, working: WorkingDistribution, factors: AdjustmentFactors
    ) -> FinalizedProbs:
        """
        Scale levels 1..m-1 by their factors and give the last level the rest.

        A row whose scaled levels exceed 1 is rebuilt from the all-level
        factors and renormalized; negative entries are clamped to 0 and the
        row renormalized.
        """
        probs = working.probs
        m = working.levels
        partial = probs[:, : m - 1] * factors.partial
        adjusted = np.column_stack([partial, 1.0 - partial.sum(axis=1)])

        overflow = partial.sum(axis=1) > 1.0
        if overflow.any():
            rebuilt = probs[overflow] * factors.full[overflow]
            if not np.isfinite(rebuilt).all():
                raise ImputationError(
                    ERROR_MESSAGES["NON_FINITE_FACTOR"].format(
                        variable=working.variable, level=m
                    ),
                    variable=working.variable,
                )
            adjusted[overflow] = rebuilt

        adjusted[(adjusted < 0) & (adjusted > -SIMPLEX_TOLERANCE)] = 0.0
        negative = adjusted < 0
        clamped = negative.any(axis=1)
        adjusted[negative] = 0.0
        sums = adjusted.sum(axis=1)
        if (sums <= 0).any():
            raise ImputationError(
                ERROR_MESSAGES["INFEASIBLE_ADJUSTMENT"].format(variable=working.variable),
                variable=working.variable,
            )
        adjusted = adjusted / sums[:, None]

        flags = {
            SafeguardFlag.RENORMALIZED: int(overflow.sum()),
            SafeguardFlag.CLAMPED: int(clamped.sum()),
        }
        if any(flags.values()):
            logger.warning(
                f"Safeguards for '{working.variable}': "
                + ", ".join(f"{flag.value}={count}" for flag, count in flags.items() if count)
            )
        distribution = WorkingDistribution(
            variable=working.variable, rows=working.rows, probs=adjusted, mode=working.mode
        )
        return FinalizedProbs(distribution=distribution, flags=flags)

    def expected_totals(
        self, dataset: CompletedDataset, weights: np.ndarray, adjusted: WorkingDistribution
    ) -> np.ndarray:
        """Expected completed-data HT level totals under the adjusted probabilities"""
        frame = dataset.frame
        values = dataset.column(adjusted.variable)
        observed = _level_totals(values, weights, frame.respondents, adjusted.levels)
        return observed + weights[adjusted.rows] @ adjusted.probs

    def impute_margin_adj(
        self,
        datasets: Sequence[CompletedDataset],
        variable: str,
        conditioners: Sequence[str],
        margins: AuxiliaryMargins,
        mode: WorkingMode,
        seed: int,
        weight_mode: WeightMode = WeightMode.DESIGN,
        threads: int = 1,
        reports: Optional[List[DatasetReport]] = None,
    ) -> List[CompletedDataset]:
        """
        Impute one margined variable for the unit nonrespondents of every
        dataset by adjusting working probabilities toward sampled totals.
        Dataset l draws from the substream ("margin", l, variable).
        """

        def run(index: int) -> CompletedDataset:
            dataset = datasets[index - 1]
            report = reports[index - 1] if reports is not None else None
            try:
                return self._adjust_dataset(
                    dataset, index, variable, conditioners, margins, mode, seed, weight_mode, report
                )
            except ImputationError as error:
                error.dataset = index
                raise

        logger.info(f"Margin imputation (adj) of '{variable}' given {list(conditioners)}")
        return run_parallel(run, range(1, len(datasets) + 1), threads)

    def _adjust_dataset(
        self,
        dataset: CompletedDataset,
        index: int,
        variable: str,
        conditioners: Sequence[str],
        margins: AuxiliaryMargins,
        mode: WorkingMode,
        seed: int,
        weight_mode: WeightMode,
        report: Optional[DatasetReport],
    ) -> CompletedDataset:
        frame = dataset.frame
        if not frame.unit_nr.any():
            return dataset
        rng = substream(seed, "margin", index, variable)
        weights = ht_weight_view(frame, weight_mode, margins.population_size)

        draw = self.sample_target_totals(margins, variable, rng)
        working = self.working_distribution(dataset, variable, conditioners, mode)
        factors = self.adjustment_factors(working, dataset, weights, draw)
        final = self.finalize_probs(working, factors)
        imputed = draw_categorical(final.distribution.probs, rng)

        if report is not None:
            report.target_totals[variable] = draw.totals.tolist()
            report.expected_totals[variable] = self.expected_totals(
                dataset, weights, final.distribution
            ).tolist()
            for flag, count in final.flags.items():
                report.count_flag(variable, flag, count)
        return dataset.with_column(variable, working.rows, imputed, Provenance.UNIT_IMPUTED)

    # ==================== SYSTEM OF EQUATIONS ====================

    def respondent_conditional_probs(
        self,
        dataset: CompletedDataset,
        variable: str,
        conditioner: str,
        weights: np.ndarray,
    ) -> np.ndarray:
        """
        Survey-weighted P(variable = c | conditioner = d) among respondents,
        as an m2 x m1 table. Empty cells get a continuity weight.
        """
        frame = dataset.frame
        m2 = frame.variable(variable).levels
        m1 = frame.variable(conditioner).levels
        values = dataset.column(variable)
        given = dataset.column(conditioner)
        respondents = frame.respondents
        cells = np.array(
            [
                [weights[respondents & (values == c) & (given == d)].sum() for d in range(1, m1 + 1)]
                for c in range(1, m2 + 1)
            ]
        )
        for d in range(m1):
            if not cells[:, d].sum() > 0:
                raise ImputationError(
                    ERROR_MESSAGES["INESTIMABLE_LOG_ODDS"].format(
                        conditioner=conditioner, level=d + 1
                    ),
                    variable=variable,
                )
        epsilon = CONTINUITY_WEIGHT_FRACTION * weights[weights > 0].min()
        cells = np.where(cells > 0, cells, epsilon)
        return cells / cells.sum(axis=0)

    def build_sys_system(
        self,
        dataset: CompletedDataset,
        variable: str,
        conditioner: str,
        weights: np.ndarray,
        draw: TargetTotalDraw,
    ) -> Tuple[EquationSystem, SysLayout]:
        """
        Unknowns p_cd = P(variable = c | conditioner = d) among nonrespondents
        for c >= 2, with p_1d by subtraction.

        Odds-ratio equations keep the respondents' log odds ratios against
        level (1, 1), written without logs as p_cd p_11 - e^rho p_1d p_c1 = 0.
        Total equations ask Σ_d W_d p_cd to supply what the respondents leave
        of T̂_c, where W_d is the nonrespondent weight with conditioner = d;
        they are scaled by the nonrespondent weight total.
        Level 1 takes the remainder, so under design weights its expected
        total misses T̂_1 by Σw - N.
        """
        frame = dataset.frame
        layout = SysLayout(
            levels=frame.variable(variable).levels,
            conditioner_levels=frame.variable(conditioner).levels,
        )
        m2, m1 = layout.levels, layout.conditioner_levels
        ratio = self.respondent_conditional_probs(dataset, variable, conditioner, weights)
        odds_ratio = (ratio * ratio[0, 0]) / np.outer(ratio[:, 0], ratio[0, :])

        values = dataset.column(variable)
        given = dataset.column(conditioner)
        needed = draw.totals - _level_totals(values, weights, frame.respondents, m2)
        cell_weights = _level_totals(given, weights, frame.unit_nr, m1)
        scale = cell_weights.sum() if cell_weights.sum() > 0 else 1.0

        def residual(x: np.ndarray) -> np.ndarray:
            table = layout.table(x)
            odds = [
                table[c, d] * table[0, 0] - odds_ratio[c, d] * table[0, d] * table[c, 0]
                for c in range(1, m2)
                for d in range(1, m1)
            ]
            totals = [(table[c] @ cell_weights - needed[c]) / scale for c in range(1, m2)]
            return np.array(odds + totals)

        x0 = ratio[1:, :].T.ravel()
        return EquationSystem(residual=residual, x0=x0, domain=(0.0, 1.0)), layout

    def solve_sys(
        self,
        dataset: CompletedDataset,
        variable: str,
        conditioner: str,
        weights: np.ndarray,
        draw: TargetTotalDraw,
        index: int = 1,
    ) -> Tuple[ConditionalProbTable, SolverSummary]:
        """Solve the system and project the table back onto the simplex"""
        system, layout = self.build_sys_system(dataset, variable, conditioner, weights, draw)
        try:
            result = solve_system(system)
        except NumericalError as error:
            raise ImputationError(
                ERROR_MESSAGES["SYS_SOLVER_FAILED"].format(
                    dataset=index, variable=variable, error=error
                ),
                variable=variable,
                dataset=index,
            ) from error

        table = layout.table(result.root)
        outside = (table < 0) | (table > 1)
        clamped = bool(outside.any())
        if clamped:
            table = np.clip(table, 0.0, 1.0)
            sums = table.sum(axis=0)
            if (sums <= 0).any():
                raise ImputationError(
                    ERROR_MESSAGES["INFEASIBLE_ADJUSTMENT"].format(variable=variable),
                    variable=variable,
                    dataset=index,
                )
            table = table / sums
        summary = SolverSummary(
            variable=variable,
            residual=result.residual,
            iterations=result.iterations,
            method=result.method,
            out_of_domain=result.out_of_domain,
        )
        return (
            ConditionalProbTable(
                variable=variable,
                conditioner=conditioner,
                table=table,
                residual=result.residual,
                clamped=clamped,
            ),
            summary,
        )

    def cell_factors(
        self,
        working: WorkingDistribution,
        solved: ConditionalProbTable,
        given: np.ndarray,
        weights: np.ndarray,
    ) -> AdjustmentFactors:
        """
        Rescale unit-varying working probabilities so each conditioner cell
        reproduces the solved table: f_cd = p_cd Σ w / Σ w p_ic over the
        nonrespondents with conditioner = d.
        """
        m = working.levels
        full = np.ones((working.rows.size, m))
        cell_of = given[working.rows]
        row_weights = weights[working.rows]
        for d in range(1, solved.table.shape[1] + 1):
            cell = cell_of == d
            if not cell.any():
                continue
            mass = row_weights[cell] @ working.probs[cell]
            needed = solved.table[:, d - 1] * row_weights[cell].sum()
            full[cell] = [
                self._factor(working.variable, c + 1, needed[c], mass[c], strict=c < m - 1)
                for c in range(m)
            ]
        return AdjustmentFactors(variable=working.variable, partial=full[:, : m - 1], full=full)

    def impute_margin_sys(
        self,
        datasets: Sequence[CompletedDataset],
        variable: str,
        conditioner: str,
        margins: AuxiliaryMargins,
        mode: WorkingMode,
        seed: int,
        weight_mode: WeightMode = WeightMode.DESIGN,
        threads: int = 1,
        reports: Optional[List[DatasetReport]] = None,
    ) -> List[CompletedDataset]:
        """
        Impute the second margined variable from solved conditional
        probabilities given the first. Dataset l draws from the substream
        ("margin", l, variable).
        """

        def run(index: int) -> CompletedDataset:
            dataset = datasets[index - 1]
            report = reports[index - 1] if reports is not None else None
            try:
                return self._sys_dataset(
                    dataset, index, variable, conditioner, margins, mode, seed, weight_mode, report
                )
            except ImputationError as error:
                error.dataset = index
                raise

        logger.info(f"Margin imputation (sys) of '{variable}' given '{conditioner}'")
        return run_parallel(run, range(1, len(datasets) + 1), threads)

    def _sys_dataset(
        self,
        dataset: CompletedDataset,
        index: int,
        variable: str,
        conditioner: str,
        margins: AuxiliaryMargins,
        mode: WorkingMode,
        seed: int,
        weight_mode: WeightMode,
        report: Optional[DatasetReport],
    ) -> CompletedDataset:
        frame = dataset.frame
        if not frame.unit_nr.any():
            return dataset
        rng = substream(seed, "margin", index, variable)
        weights = ht_weight_view(frame, weight_mode, margins.population_size)
        given = dataset.column(conditioner)
        rows = np.flatnonzero(frame.unit_nr)

        draw = self.sample_target_totals(margins, variable, rng)
        solved, summary = self.solve_sys(dataset, variable, conditioner, weights, draw, index)
        flags = {SafeguardFlag.SOLVER_CLAMPED: int(solved.clamped)}

        if mode.varies_by_unit:
            working = self.working_distribution(dataset, variable, [conditioner], mode)
            factors = self.cell_factors(working, solved, given, weights)
            final = self.finalize_probs(working, factors)
            adjusted = final.distribution
            flags.update(final.flags)
        else:
            probs = solved.table[:, given[rows].astype(int) - 1].T
            adjusted = WorkingDistribution(variable=variable, rows=rows, probs=probs, mode=mode)
        imputed = draw_categorical(adjusted.probs, rng)

        if report is not None:
            report.solver.append(summary)
            report.target_totals[variable] = draw.totals.tolist()
            report.expected_totals[variable] = self.expected_totals(
                dataset, weights, adjusted
            ).tolist()
            for flag, count in flags.items():
                report.count_flag(variable, flag, count)
        return dataset.with_column(variable, rows, imputed, Provenance.UNIT_IMPUTED)


# Global instance
margin_imputer = MarginImputationService()
