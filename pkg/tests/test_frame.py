"""
Sample frame, validation, weight views and CSV storage
"""
import numpy as np
import pytest

from app.constants.enums import Provenance, VariableKind, WeightMode
from app.exceptions import DataParseError, DataValidationError
from app.models.frame import CompletedDataset, ht_weight_view, validate
from app.schemas.frame import AuxiliaryMargins, IngestionOptions, VariableSpec
from app.storage.csv_operations import csv_ops, format_number


@pytest.fixture
def two_binaries():
    return [
        VariableSpec(name="a", kind=VariableKind.CATEGORICAL, levels=2, in_margins=True),
        VariableSpec(name="b", kind=VariableKind.CATEGORICAL, levels=3, labels=["lo", "mid", "hi"]),
    ]


def write_csv(tmp_path, text, name="sample.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestVariableSpec:
    """Schema entries"""

    def test_margined_continuous_rejected(self):
        with pytest.raises(ValueError):
            VariableSpec(name="y", kind=VariableKind.CONTINUOUS, lower=0, upper=1, in_margins=True)

    def test_categorical_needs_two_levels(self):
        with pytest.raises(ValueError):
            VariableSpec(name="y", kind=VariableKind.CATEGORICAL, levels=1)

    def test_continuous_needs_ordered_range(self):
        with pytest.raises(ValueError):
            VariableSpec(name="y", kind=VariableKind.CONTINUOUS, lower=5, upper=5)

    def test_label_maps_to_code(self, two_binaries):
        assert two_binaries[1].code_for("mid") == 2.0


class TestLoadSample:
    """CSV ingestion"""

    def test_fully_observed(self, tmp_path, two_binaries):
        path = write_csv(tmp_path, "a,b,weight,unit_nr\n1,lo,2,0\n2,hi,2,0\n1,mid,2,0\n")
        frame = csv_ops.load_sample(path, two_binaries, IngestionOptions(population_size=6))
        assert frame.n_units == 3
        assert not frame.item_nr.any()
        np.testing.assert_array_equal(frame.column("b"), [1, 3, 2])

    def test_unit_nonrespondent_row(self, tmp_path, two_binaries):
        path = write_csv(tmp_path, "a,b,weight,unit_nr\n1,lo,2,0\n,,2,1\n")
        frame = csv_ops.load_sample(path, two_binaries, IngestionOptions(population_size=4))
        assert frame.unit_nr.tolist() == [False, True]
        assert not frame.item_nr[1].any()

    def test_item_nonresponse_derived(self, tmp_path, two_binaries):
        path = write_csv(tmp_path, "a,b,weight,unit_nr\n1,,2,0\n2,hi,2,0\n")
        frame = csv_ops.load_sample(path, two_binaries, IngestionOptions(population_size=4))
        assert frame.item_nr.tolist() == [[False, True], [False, False]]

    def test_unit_nonrespondent_with_value(self, tmp_path, two_binaries):
        path = write_csv(tmp_path, "a,b,weight,unit_nr\n1,lo,2,0\n2,,2,1\n")
        with pytest.raises(DataValidationError):
            csv_ops.load_sample(path, two_binaries, IngestionOptions(population_size=4))

    def test_wrong_arity_reports_line(self, tmp_path, two_binaries):
        path = write_csv(tmp_path, "a,b,weight,unit_nr\n1,lo,2,0\n1,lo,2\n")
        with pytest.raises(DataParseError) as info:
            csv_ops.load_sample(path, two_binaries, IngestionOptions(population_size=4))
        assert info.value.line == 3

    def test_nonpositive_weight(self, tmp_path, two_binaries):
        path = write_csv(tmp_path, "a,b,weight,unit_nr\n1,lo,0,0\n")
        with pytest.raises(DataValidationError):
            csv_ops.load_sample(path, two_binaries, IngestionOptions(population_size=4))

    def test_level_out_of_range(self, tmp_path, two_binaries):
        path = write_csv(tmp_path, "a,b,weight,unit_nr\n3,lo,2,0\n")
        with pytest.raises(DataValidationError):
            csv_ops.load_sample(path, two_binaries, IngestionOptions(population_size=4))

    def test_missing_file(self, tmp_path, two_binaries):
        with pytest.raises(DataParseError):
            csv_ops.load_sample(
                tmp_path / "nope.csv", two_binaries, IngestionOptions(population_size=4)
            )

    def test_round_trip(self, tmp_path, survey_frame, survey_schema):
        path = csv_ops.write_sample(survey_frame, tmp_path / "out.csv")
        options = IngestionOptions(
            population_size=survey_frame.population_size, design_columns=["z"]
        )
        reloaded = csv_ops.load_sample(path, survey_schema, options)
        np.testing.assert_array_equal(reloaded.values, survey_frame.values)
        np.testing.assert_array_equal(reloaded.design_weights, survey_frame.design_weights)
        np.testing.assert_array_equal(reloaded.unit_nr, survey_frame.unit_nr)


class TestMarginsFile:
    """Margins CSV"""

    def test_blank_variance_is_default(self, tmp_path):
        path = write_csv(
            tmp_path, "variable,level,total,variance\na,1,40,\na,2,60,9\n", "margins.csv"
        )
        margins = csv_ops.load_margins(path, 100)
        np.testing.assert_array_equal(margins.totals("a"), [40, 60])
        assert np.isnan(margins.variances("a")[0])
        assert margins.variances("a")[1] == 9

    def test_round_trip(self, tmp_path):
        margins = AuxiliaryMargins.from_shares(1000, {"a": [0.25, 0.75]}, {"a": [4.0, 4.0]})
        path = csv_ops.write_margins(margins, tmp_path / "m.csv")
        assert csv_ops.load_margins(path, 1000) == margins

    def test_shares_sum_to_population(self):
        margins = AuxiliaryMargins.from_shares(997, {"a": [0.1, 0.3, 0.6]})
        assert margins.totals("a").sum() == 997

    def test_format_number(self):
        assert format_number(3.0) == "3"
        assert format_number(0.1) == "0.1"


class TestValidate:
    """Invariant report"""

    def test_margins_summing_to_n(self, make_frame, two_binaries):
        frame = make_frame(two_binaries[:1], [[1], [2]], weights=[5, 5], population_size=10)
        margins = AuxiliaryMargins(population_size=10, margins={"a": {"totals": [4, 6]}})
        assert validate(frame, margins).is_valid

    def test_margins_off_by_one(self, make_frame, two_binaries):
        frame = make_frame(two_binaries[:1], [[1], [2]], weights=[5, 5], population_size=10)
        margins = AuxiliaryMargins(population_size=10, margins={"a": {"totals": [4, 5]}})
        report = validate(frame, margins)
        assert "margin_sum" in report.codes()
        assert any("margin sum ≠ N" in v.message for v in report.violations)

    def test_missing_margin(self, make_frame, two_binaries):
        frame = make_frame(two_binaries[:1], [[1], [2]], weights=[5, 5], population_size=10)
        margins = AuxiliaryMargins(population_size=10, margins={})
        assert "margin_missing" in validate(frame, margins).codes()

    def test_zero_inclusion_probability(self, two_binaries):
        from app.models.frame import SampleFrame

        frame = SampleFrame.from_arrays(
            schema=two_binaries[:1],
            values=[[1], [2]],
            design_weights=[5, 5],
            unit_nr=[False, False],
            population_size=10,
            inclusion_probs=[0.2, 0.0],
        )
        report = validate(frame)
        assert "inclusion_prob_range" in report.codes()

    def test_completed_dataset_changing_observed_cell(self, survey_frame, item_completed):
        values = np.array(item_completed.values)
        row = int(np.flatnonzero(survey_frame.respondents & ~np.isnan(survey_frame.values[:, 0]))[0])
        values[row, 0] = 3 - values[row, 0]
        tampered = CompletedDataset(
            frame=survey_frame, values=values, provenance=item_completed.provenance
        )
        assert "observed_changed" in validate(survey_frame, completed=tampered).codes()


class TestWeightView:
    """Design and fabricated weights"""

    def test_design_identity(self, make_frame, two_binaries):
        frame = make_frame(two_binaries[:1], [[1], [2], [1]], weights=[10, 20, 30])
        np.testing.assert_array_equal(ht_weight_view(frame, WeightMode.DESIGN), [10, 20, 30])

    def test_fabricated_constant(self, make_frame, two_binaries):
        frame = make_frame(
            two_binaries[:1],
            [[1], [2], [1], [1]],
            weights=[30, 40, 10, 10],
            unit_nr=[False, False, True, True],
            population_size=100,
        )
        weights = ht_weight_view(frame, WeightMode.FABRICATED)
        np.testing.assert_array_equal(weights, [30, 40, 15, 15])
        assert weights.sum() == pytest.approx(100, rel=1e-9)

    def test_respondent_weights_exceed_n(self, make_frame, two_binaries):
        frame = make_frame(
            two_binaries[:1],
            [[1], [2], [1]],
            weights=[60, 50, 1],
            unit_nr=[False, False, True],
            population_size=100,
        )
        with pytest.raises(DataValidationError, match="respondent weights exceed N"):
            ht_weight_view(frame, WeightMode.FABRICATED)

    def test_fabricated_needs_nonrespondents(self, make_frame, two_binaries):
        frame = make_frame(two_binaries[:1], [[1], [2]], weights=[5, 5])
        with pytest.raises(DataValidationError):
            ht_weight_view(frame, WeightMode.FABRICATED)


class TestCompletedDataset:
    """Immutable updates with provenance"""

    def test_with_column_copies(self, survey_frame, item_completed):
        rows = np.flatnonzero(survey_frame.unit_nr)
        updated = item_completed.with_column(
            "x1", rows, np.ones(rows.size), Provenance.UNIT_IMPUTED
        )
        assert np.isnan(item_completed.column("x1")[rows]).all()
        assert (updated.column("x1")[rows] == 1).all()
        assert set(updated.provenance_of("x1")[r] for r in rows) == {Provenance.UNIT_IMPUTED}

    def test_arrays_are_read_only(self, item_completed):
        with pytest.raises(ValueError):
            item_completed.values[0, 0] = 2.0

    def test_completed_csv_round_trip(self, tmp_path, item_completed):
        path = csv_ops.write_completed(item_completed, tmp_path / "completed_1.csv")
        reloaded = csv_ops.read_completed(path, item_completed.frame)
        np.testing.assert_array_equal(reloaded.values, item_completed.values)
        np.testing.assert_array_equal(reloaded.provenance, item_completed.provenance)
