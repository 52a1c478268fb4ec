"""
End-to-end imputation runs
"""
import numpy as np
import pytest

from app.constants.enums import MarginMethod, WeightMode, WorkingMode
from app.exceptions import DataValidationError
from app.models.frame import CompletedDataset, ht_weight_view, validate
from app.schemas.imputation import ItemImputationSpec, MarginImputationConfig
from app.service_managers.pipeline_service import pipeline

SEED = 314


def run(frame, margins, method=MarginMethod.ADJ, imputations=3, threads=1, **config):
    return pipeline.run_imputation(
        frame,
        margins,
        ItemImputationSpec(imputations=imputations, cycles=2),
        MarginImputationConfig(method=method, **config),
        SEED,
        threads,
    )


class TestRunImputation:
    """Item imputation, margin imputation, hot deck"""

    @pytest.mark.parametrize(
        "method", [MarginMethod.ADJ, MarginMethod.SYS, MarginMethod.YR, MarginMethod.IH]
    )
    def test_every_method_completes(self, survey_frame, survey_margins, method):
        datasets, report = run(survey_frame, survey_margins, method)
        assert len(datasets) == len(report.datasets) == 3
        for dataset in datasets:
            assert dataset.is_complete
            assert validate(survey_frame, survey_margins, dataset).is_valid

    def test_observed_cells_kept(self, survey_frame, survey_margins):
        datasets, _ = run(survey_frame, survey_margins)
        observed = ~np.isnan(survey_frame.values)
        for dataset in datasets:
            np.testing.assert_array_equal(dataset.values[observed], survey_frame.values[observed])

    def test_report_contents(self, survey_frame, survey_margins):
        _, report = run(survey_frame, survey_margins)
        assert report.method == MarginMethod.ADJ
        assert report.margined == ["x1", "x2"]
        assert set(report.variances) == {"x1", "x2"}
        assert all(v > 0 for v in report.variances["x1"])
        assert "margin/2/x2" in report.substreams
        assert "hotdeck/3" in report.substreams
        assert set(report.datasets[0].target_totals) == {"x1", "x2"}

    def test_sys_records_solver(self, survey_frame, survey_margins):
        _, report = run(survey_frame, survey_margins, MarginMethod.SYS)
        for dataset_report in report.datasets:
            (summary,) = dataset_report.solver
            assert summary.variable == "x2"

    def test_yr_uses_intercept_only(self, survey_frame, survey_margins):
        _, report = run(survey_frame, survey_margins, MarginMethod.YR)
        assert report.working_mode == WorkingMode.INTERCEPT_ONLY

    def test_ih_matches_nothing(self, survey_frame, survey_margins):
        _, report = run(survey_frame, survey_margins, MarginMethod.IH)
        assert report.margined == []
        assert report.variances == {}

    def test_ih_needs_no_margins(self, survey_frame):
        datasets, _ = run(survey_frame, None, MarginMethod.IH)
        assert all(dataset.is_complete for dataset in datasets)

    def test_margin_methods_need_margins(self, survey_frame):
        with pytest.raises(DataValidationError):
            run(survey_frame, None)

    def test_same_seed_any_threads(self, survey_frame, survey_margins):
        serial, _ = run(survey_frame, survey_margins, threads=1)
        parallel, _ = run(survey_frame, survey_margins, threads=4)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.values, b.values)
            np.testing.assert_array_equal(a.provenance, b.provenance)

    def test_custom_order(self, survey_frame, survey_margins):
        _, report = run(survey_frame, survey_margins, order=["x2", "x1"])
        assert report.margined == ["x2", "x1"]

    def test_order_must_cover_margined(self, survey_frame, survey_margins):
        with pytest.raises(DataValidationError):
            run(survey_frame, survey_margins, order=["x1"])

    def test_order_rejects_unmargined(self, survey_frame, survey_margins):
        with pytest.raises(DataValidationError):
            run(survey_frame, survey_margins, order=["x1", "x2", "x3"])

    def test_bd_is_study_only(self):
        with pytest.raises(ValueError):
            MarginImputationConfig(method=MarginMethod.BD)

    @pytest.mark.slow
    def test_ten_imputations_validate(self, survey_frame, survey_margins):
        datasets, _ = run(survey_frame, survey_margins, imputations=10)
        for dataset in datasets:
            assert validate(survey_frame, survey_margins, dataset).is_valid


class TestWeightsFor:
    """Estimation weights per method"""

    def test_yr_weights_sum_to_n(self, survey_frame, survey_margins):
        datasets, _ = run(survey_frame, survey_margins, MarginMethod.YR)
        weights = pipeline.weights_for(MarginMethod.YR)(datasets[0])
        assert weights.sum() == pytest.approx(survey_frame.population_size, rel=1e-9)

    def test_design_methods_keep_design_weights(self, survey_frame, survey_margins):
        datasets, _ = run(survey_frame, survey_margins)
        weights = pipeline.weights_for(MarginMethod.ADJ)(datasets[0])
        np.testing.assert_array_equal(weights, survey_frame.design_weights)

    def test_no_nonresponse_falls_back_to_design(self, survey_schema, make_frame):
        frame = make_frame(survey_schema, [[1, 1, 1, 1.0], [2, 2, 2, 2.0]], weights=[3, 4])
        weights = pipeline.weights_for(MarginMethod.YR)(CompletedDataset.from_frame(frame))
        np.testing.assert_array_equal(weights, ht_weight_view(frame, WeightMode.DESIGN))
