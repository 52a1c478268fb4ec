"""
Numeric kernels: logistic and linear fits, parameter draws, root finding
"""
import numpy as np
import pytest
from scipy import optimize

from app.exceptions import NumericalError
from app.regress import (
    EquationSystem,
    LogisticFit,
    draw_normal,
    draw_params,
    fit_linear,
    fit_logistic,
    predict_proba,
    solve_system,
)
from app.regress.logistic import information_matrix, log_likelihood, score


def make_fit(coefficients, levels):
    coefficients = np.asarray(coefficients, dtype=float)
    size = coefficients.size
    return LogisticFit(
        coefficients=coefficients,
        information=np.eye(size),
        covariance=np.eye(size),
        levels=tuple(levels),
        converged=True,
        iterations=0,
        gradient_norm=0.0,
    )


def binary_instance(seed, n=20):
    generator = np.random.default_rng(seed)
    x = generator.normal(size=n)
    design = np.column_stack([np.ones(n), x])
    y = (generator.random(n) < 1 / (1 + np.exp(-(0.3 + 0.8 * x)))).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return design, y


class TestFitLogistic:
    """Weighted IRLS"""

    def test_symmetric_intercept(self):
        fit = fit_logistic(np.ones((4, 1)), np.array([0, 1, 0, 1]), np.ones(4))
        assert fit.converged
        assert fit.coefficients[0, 0] == pytest.approx(0.0, abs=1e-10)
        np.testing.assert_allclose(predict_proba(fit, np.ones((4, 1))), 0.5)

    def test_perfect_separation(self):
        design = np.column_stack([np.ones(4), [0, 0, 1, 1]])
        fit = fit_logistic(design, np.array([0, 0, 1, 1]), np.ones(4))
        assert fit.separated
        assert fit.ridge == pytest.approx(1e-4)
        assert np.isfinite(fit.coefficients).all()

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_direct_maximizer(self, seed):
        design, y = binary_instance(seed)
        fit = fit_logistic(design, y, np.ones(len(y)))
        if fit.separated:
            pytest.skip("separated instance has no finite maximizer")
        indicators = (y == fit.levels[0]).astype(float)[:, None]

        def negative(parameters):
            return -log_likelihood(parameters, design, indicators, np.ones(len(y)))

        oracle = optimize.minimize(
            negative, np.zeros(2), method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000},
        )
        np.testing.assert_allclose(fit.parameters, oracle.x, atol=1e-4)

    def test_gradient_at_convergence(self):
        design, y = binary_instance(7, n=60)
        weights = np.random.default_rng(1).uniform(0.5, 3.0, len(y))
        fit = fit_logistic(design, y, weights)
        assert fit.converged
        indicators = (y == fit.levels[0]).astype(float)[:, None]
        gradient = score(fit.parameters, design, indicators, weights)
        assert np.max(np.abs(gradient)) <= 1e-8

    def test_score_matches_central_differences(self, rng):
        design = np.column_stack([np.ones(30), rng.normal(size=30)])
        y = rng.integers(1, 4, size=30).astype(float)
        weights = rng.uniform(0.5, 2.0, 30)
        indicators = np.column_stack([y == 1, y == 2]).astype(float)
        parameters = rng.normal(scale=0.5, size=4)
        analytic = score(parameters, design, indicators, weights)
        step = 1e-6
        numeric = np.array(
            [
                (
                    log_likelihood(parameters + step * e, design, indicators, weights)
                    - log_likelihood(parameters - step * e, design, indicators, weights)
                )
                / (2 * step)
                for e in np.eye(4)
            ]
        )
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)

    def test_information_symmetric_psd(self, rng):
        design = np.column_stack([np.ones(40), rng.normal(size=40)])
        info = information_matrix(rng.normal(size=4), design, 2, np.ones(40))
        np.testing.assert_allclose(info, info.T)
        assert np.linalg.eigvalsh(info).min() >= -1e-10

    def test_multinomial_reference_is_last_level(self, rng):
        y = rng.integers(1, 4, size=90).astype(float)
        fit = fit_logistic(np.ones((90, 1)), y, np.ones(90))
        assert fit.levels == (1.0, 2.0, 3.0)
        shares = [np.mean(y == c) for c in (1, 2, 3)]
        np.testing.assert_allclose(predict_proba(fit, np.ones(1)), shares, atol=1e-8)

    def test_empty_level(self):
        with pytest.raises(NumericalError):
            fit_logistic(np.ones((4, 1)), np.array([1, 2, 1, 2]), np.ones(4), levels=[1, 2, 3])

    def test_zero_weights(self):
        with pytest.raises(NumericalError):
            fit_logistic(np.ones((2, 1)), np.array([1, 2]), np.zeros(2))


class TestPredictProba:
    """Level probabilities"""

    def test_zero_coefficients_uniform(self):
        fit = make_fit(np.zeros((2, 3)), [1, 2, 3, 4])
        np.testing.assert_allclose(predict_proba(fit, np.array([1.0, 5.0])), 0.25)

    def test_intercept_log_three(self):
        fit = make_fit([[np.log(3.0)]], [1, 2])
        assert predict_proba(fit, np.ones(1))[0] == pytest.approx(0.75)

    def test_rows_on_simplex(self, rng):
        fit = make_fit(rng.normal(scale=20, size=(3, 2)), [1, 2, 3])
        probs = predict_proba(fit, rng.normal(scale=10, size=(50, 3)))
        assert (probs >= 0).all() and (probs <= 1).all()
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_arity_mismatch(self):
        fit = make_fit(np.zeros((2, 1)), [1, 2])
        with pytest.raises(NumericalError):
            predict_proba(fit, np.ones((3, 3)))


class TestFitLinear:
    """Weighted least squares"""

    def test_exact_line(self):
        x = np.arange(1.0, 7.0)
        fit = fit_linear(np.column_stack([np.ones(6), x]), 2 * x, np.ones(6))
        np.testing.assert_allclose(fit.coefficients, [0.0, 2.0], atol=1e-10)
        assert fit.residual_variance == pytest.approx(0.0, abs=1e-18)

    def test_duplicate_column_gets_ridge(self, rng):
        x = rng.normal(size=10)
        fit = fit_linear(np.column_stack([np.ones(10), x, x]), x + 1, np.ones(10))
        assert fit.rank_deficient

    def test_matches_normal_equations(self, rng):
        design = np.column_stack([np.ones(15), rng.normal(size=(15, 2))])
        y = design @ [1.0, -2.0, 0.5] + rng.normal(size=15)
        weights = rng.uniform(0.5, 2.0, 15)
        fit = fit_linear(design, y, weights)
        gram = design.T @ (weights[:, None] * design)
        oracle = np.linalg.solve(gram, design.T @ (weights * y))
        np.testing.assert_allclose(fit.coefficients, oracle, atol=1e-10)
        residuals = y - design @ oracle
        expected = (weights @ residuals**2) / (weights.sum() - 3)
        assert fit.residual_variance == pytest.approx(expected, rel=1e-10)

    def test_zero_degrees_of_freedom(self):
        with pytest.raises(NumericalError):
            fit_linear(np.ones((2, 2)), np.ones(2), np.ones(2))


class TestDraws:
    """Approximate posterior draws"""

    def test_zero_covariance_returns_mean(self, rng):
        draw = draw_normal(np.array([1.0, 2.0]), np.zeros((2, 2)), rng)
        np.testing.assert_array_equal(draw, [1.0, 2.0])

    def test_sample_covariance(self, rng):
        target = np.array([[2.0, 0.6], [0.6, 1.0]])
        draws = np.array([draw_normal(np.zeros(2), target, rng) for _ in range(10000)])
        error = np.linalg.norm(np.cov(draws.T) - target) / np.linalg.norm(target)
        assert error < 0.1

    def test_same_seed_same_draw(self):
        design, y = binary_instance(3)
        fit = fit_logistic(design, y, np.ones(len(y)))
        first = draw_params(fit, np.random.default_rng(5)).coefficients
        second = draw_params(fit, np.random.default_rng(5)).coefficients
        np.testing.assert_array_equal(first, second)

    def test_not_psd(self, rng):
        with pytest.raises(NumericalError):
            draw_normal(np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]), rng)

    def test_linear_draw_has_variance(self, rng):
        design = np.column_stack([np.ones(30), rng.normal(size=30)])
        y = design @ [1.0, 2.0] + rng.normal(size=30)
        draw = draw_params(fit_linear(design, y, np.ones(30)), rng)
        assert draw.residual_variance > 0
        assert draw.coefficients.shape == (2,)


class TestSolveSystem:
    """Newton with dogleg fallback"""

    def test_linear_root(self):
        result = solve_system(EquationSystem(residual=lambda x: x - 0.3, x0=np.array([0.9])))
        assert result.converged
        assert result.root[0] == pytest.approx(0.3, abs=1e-10)

    def test_no_root(self):
        system = EquationSystem(residual=lambda x: x**2 + 1.0, x0=np.array([0.5]))
        with pytest.raises(NumericalError) as info:
            solve_system(system)
        assert info.value.best_residual >= 1.0

    def test_failure_reports_iterations_used(self):
        system = EquationSystem(residual=lambda x: x**2 + 1.0, x0=np.array([0.0]))
        with pytest.raises(NumericalError, match="in 1 iterations"):
            solve_system(system)

    def test_out_of_domain_reported(self):
        system = EquationSystem(
            residual=lambda x: x - 1.5, x0=np.array([0.5]), domain=(0.0, 1.0)
        )
        assert solve_system(system).out_of_domain

    def test_too_large(self):
        system = EquationSystem(residual=lambda x: x, x0=np.zeros(65))
        with pytest.raises(NumericalError):
            solve_system(system)

    def test_bad_start(self):
        system = EquationSystem(residual=lambda x: np.log(x), x0=np.array([-1.0]))
        with pytest.raises(NumericalError):
            solve_system(system)

    def test_residual_within_tolerance(self, rng):
        target = rng.uniform(0.1, 0.9, 3)

        def residual(x):
            return np.array([x[0] * x[1] - target[0] * target[1], x[1] - target[1], x[2] ** 3 - target[2] ** 3])

        result = solve_system(EquationSystem(residual=residual, x0=np.full(3, 0.5)))
        assert np.max(np.abs(residual(result.root))) <= 1e-10
