"""
Completed-data estimators, pooling and replicate metrics
"""
import math
from itertools import permutations

import numpy as np
import pytest

from app.constants.enums import EstimandKind, VariableKind
from app.exceptions import DataValidationError, NumericalError
from app.models.frame import CompletedDataset
from app.schemas.estimation import CombinedEstimate, Estimand, LevelRef
from app.schemas.frame import VariableSpec
from app.service_managers.estimation_service import estimator

SCHEMA = [
    VariableSpec(name="a", kind=VariableKind.CATEGORICAL, levels=2),
    VariableSpec(name="b", kind=VariableKind.CATEGORICAL, levels=2),
    VariableSpec(name="y", kind=VariableKind.CONTINUOUS, lower=0.0, upper=100.0),
]


@pytest.fixture
def complete(make_frame):
    def _make(values, weights=None):
        return CompletedDataset.from_frame(make_frame(SCHEMA, values, weights=weights))

    return _make


@pytest.fixture
def grid(complete):
    """One unit of weight 10 in each (a, b) cell"""
    return complete([[1, 1, 1.0], [1, 2, 2.0], [2, 1, 3.0], [2, 2, 4.0]], weights=[10] * 4)


class TestHtTotal:
    """Horvitz-Thompson totals"""

    def test_unit_weights_count(self, complete):
        dataset = complete([[1, 1, 0.0]] * 3 + [[2, 1, 0.0]] * 2)
        total, variance = estimator.ht_total(dataset, np.ones(5), "a", 1)
        assert total == 3
        assert variance == 0

    def test_weight_two(self, complete):
        dataset = complete([[1, 1, 0.0]] * 5, weights=[2] * 5)
        total, variance = estimator.ht_total(dataset, dataset.frame.design_weights, "a", 1)
        assert total == 10
        assert variance == 10

    def test_continuous_total(self, grid):
        total, variance = estimator.ht_total(grid, grid.frame.design_weights, "y")
        assert total == 100
        assert variance == pytest.approx(90 * (1 + 4 + 9 + 16))

    def test_linear_in_weights(self, grid, rng):
        first = rng.uniform(1, 5, 4)
        second = rng.uniform(1, 5, 4)
        combined = estimator.ht_total(grid, 2 * first + 3 * second, "b", 2)[0]
        parts = 2 * estimator.ht_total(grid, first, "b", 2)[0] + 3 * estimator.ht_total(
            grid, second, "b", 2
        )[0]
        assert combined == pytest.approx(parts)


class TestRatioProb:
    """Conditional and joint proportions"""

    def test_target_equals_condition(self, grid):
        ref = LevelRef(variable="a", level=1)
        ratio, _ = estimator.ratio_prob(grid, grid.frame.design_weights, ref, [ref])
        assert ratio == 1.0

    def test_balanced_cells(self, grid):
        ratio, variance = estimator.ratio_prob(
            grid,
            grid.frame.design_weights,
            LevelRef(variable="a", level=1),
            [LevelRef(variable="b", level=1)],
        )
        assert ratio == 0.5
        assert variance > 0

    def test_matches_brute_force(self, complete, rng):
        values = np.column_stack(
            [rng.integers(1, 3, 60), rng.integers(1, 3, 60), rng.uniform(0, 100, 60)]
        )
        dataset = complete(values, weights=rng.uniform(1, 20, 60))
        weights = dataset.frame.design_weights
        ratio, _ = estimator.ratio_prob(
            dataset,
            weights,
            LevelRef(variable="a", level=2),
            [LevelRef(variable="b", level=1)],
        )
        numerator = sum(w for w, row in zip(weights, values) if row[0] == 2 and row[1] == 1)
        denominator = sum(w for w, row in zip(weights, values) if row[1] == 1)
        assert ratio == pytest.approx(numerator / denominator, rel=1e-12)

    def test_empty_condition(self, complete):
        dataset = complete([[1, 1, 1.0], [2, 1, 2.0]])
        with pytest.raises(NumericalError, match="zero"):
            estimator.ratio_prob(
                dataset,
                np.ones(2),
                LevelRef(variable="a", level=1),
                [LevelRef(variable="b", level=2)],
            )

    def test_joint_estimand(self, grid):
        estimand = Estimand(
            name="p_a1_b2",
            kind=EstimandKind.JOINT_PROB,
            cells=[LevelRef(variable="a", level=1), LevelRef(variable="b", level=2)],
        )
        point, _ = estimator.estimate(grid, grid.frame.design_weights, estimand)
        assert point == 0.25


class TestRubinCombine:
    """Pooling over completed datasets"""

    def test_hand_example(self):
        pooled = estimator.rubin_combine([(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)])
        assert pooled.estimate == 2.0
        assert pooled.within == 1.0
        assert pooled.between == 1.0
        assert pooled.total_variance == pytest.approx(7 / 3)
        assert pooled.df == pytest.approx(6.125)

    def test_no_between_variance(self):
        pooled = estimator.rubin_combine([(5.0, 4.0)] * 3)
        assert pooled.between == 0.0
        assert math.isinf(pooled.df)
        assert pooled.upper - pooled.estimate == pytest.approx(1.959964 * 2.0, rel=1e-6)

    def test_too_few(self):
        with pytest.raises(DataValidationError):
            estimator.rubin_combine([(1.0, 1.0)])

    def test_permutation_invariant(self):
        estimates = [(1.0, 0.5), (4.0, 1.5), (2.5, 0.7), (3.0, 1.1)]
        reference = estimator.rubin_combine(estimates)
        for order in permutations(estimates):
            pooled = estimator.rubin_combine(list(order))
            assert pooled.estimate == pytest.approx(reference.estimate, rel=1e-12)
            assert pooled.total_variance == pytest.approx(reference.total_variance, rel=1e-12)

    def test_interval_contains_estimate(self):
        pooled = estimator.rubin_combine([(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)])
        assert pooled.lower < pooled.estimate < pooled.upper

    def test_single_dataset_uses_complete_data_inference(self, grid):
        estimand = Estimand(
            name="total_a1", kind=EstimandKind.TOTAL, target=LevelRef(variable="a", level=1)
        )
        pooled = estimator.pool([grid], lambda d: d.frame.design_weights, [estimand])
        assert pooled["total_a1"].imputations == 1
        assert math.isinf(pooled["total_a1"].df)

    def test_estimate_rows_carry_truth(self, grid):
        estimand = Estimand(
            name="total_a1",
            kind=EstimandKind.TOTAL,
            target=LevelRef(variable="a", level=1),
            truth=20.0,
        )
        pooled = estimator.pool([grid, grid], lambda d: d.frame.design_weights, [estimand])
        (row,) = estimator.estimate_rows(pooled, [estimand])
        assert row["estimand"] == "total_a1"
        assert row["estimate"] == 20.0
        assert row["truth"] == 20.0


class TestEvaluateReplicates:
    """Replicate metrics"""

    def test_symmetric_errors(self):
        truth, delta = 50.0, 5.0
        combined = [
            CombinedEstimate.from_components(truth + sign * delta, 1.0, 1.0, 5)
            for sign in (1, -1)
        ]
        row = estimator.evaluate_replicates(combined, truth)
        assert row.rmse == pytest.approx(delta)
        assert row.rrmse == pytest.approx(delta / truth)
        assert row.bias == pytest.approx(0.0)

    def test_zero_truth(self):
        combined = [CombinedEstimate.from_single(value, 1.0) for value in (0.1, -0.1)]
        row = estimator.evaluate_replicates(combined, 0.0)
        assert row.rrmse is None
        assert row.rmse == pytest.approx(0.1)

    def test_coverage_and_width(self):
        combined = [CombinedEstimate.from_single(value, 1.0) for value in (0.0, 10.0)]
        row = estimator.evaluate_replicates(combined, 0.5)
        assert row.coverage == 0.5
        assert row.mean_width == pytest.approx(2 * 1.959964, rel=1e-6)

    def test_too_few(self):
        with pytest.raises(DataValidationError):
            estimator.evaluate_replicates([CombinedEstimate.from_single(1.0, 1.0)], 1.0)


@pytest.mark.slow
class TestHorvitzThompsonMonteCarlo:
    """Unbiasedness under Poisson sampling"""

    def test_total_and_variance(self, make_frame):
        generator = np.random.default_rng(11)
        size = 2000
        x = (generator.random(size) < 0.35).astype(float)
        probs = np.clip(generator.uniform(0.02, 0.2, size), 0.0, 1.0)
        truth = x.sum()
        schema = [VariableSpec(name="a", kind=VariableKind.CATEGORICAL, levels=2)]

        totals, variances = [], []
        for _ in range(5000):
            chosen = generator.random(size) < probs
            frame = make_frame(schema, (2 - x[chosen])[:, None], weights=1 / probs[chosen])
            dataset = CompletedDataset.from_frame(frame)
            total, variance = estimator.ht_total(dataset, frame.design_weights, "a", 1)
            totals.append(total)
            variances.append(variance)
        totals = np.array(totals)
        assert abs(totals.mean() - truth) <= 3 * totals.std(ddof=1) / np.sqrt(len(totals))
        assert np.mean(variances) == pytest.approx(totals.var(ddof=1), rel=0.1)
