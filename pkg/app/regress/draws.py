"""
Approximate-posterior parameter draws for proper imputation
"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from app.constants.constants import COVARIANCE_JITTER
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import NumericalError
from app.regress.linear import LinearFit
from app.regress.logistic import LogisticFit


@dataclass(frozen=True)
class ParameterDraw:
    """One draw of model parameters; residual_variance only for linear fits"""

    coefficients: np.ndarray
    residual_variance: Optional[float] = None


def draw_normal(
    mean: np.ndarray, covariance: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw from N(mean, covariance); a zero covariance returns the mean"""
    mean = np.asarray(mean, dtype=float)
    if not np.any(covariance):
        return mean.copy()
    covariance = 0.5 * (covariance + covariance.T)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    if eigenvalues.min() < -COVARIANCE_JITTER * scale:
        raise NumericalError(ERROR_MESSAGES["NOT_PSD"])
    root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    return mean + root @ rng.standard_normal(len(mean))


def draw_params(
    fit: Union[LogisticFit, LinearFit], rng: np.random.Generator
) -> ParameterDraw:
    """
    One draw from the large-sample normal approximation around the fit.

    For a linear fit the residual variance is drawn first as
    sigma^2 * df / chi^2_df, then the coefficients conditional on it.
    """
    if isinstance(fit, LinearFit):
        if fit.residual_variance > 0:
            variance = fit.residual_variance * fit.df / rng.chisquare(fit.df)
        else:
            variance = 0.0
        coefficients = draw_normal(
            fit.coefficients, variance * fit.unscaled_covariance, rng
        )
        return ParameterDraw(coefficients=coefficients, residual_variance=variance)

    flat = draw_normal(fit.parameters, fit.covariance, rng)
    k = len(fit.levels) - 1
    return ParameterDraw(coefficients=flat.reshape(k, fit.n_predictors).T)
