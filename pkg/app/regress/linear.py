"""
Weighted least squares for continuous imputation models
"""
from dataclasses import dataclass

import numpy as np
from loguru import logger

from app.constants.constants import RIDGE_FALLBACK
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import NumericalError


@dataclass(frozen=True)
class LinearFit:
    """Weighted least squares fit; covariance = residual_variance * unscaled_covariance"""

    coefficients: np.ndarray
    residual_variance: float
    unscaled_covariance: np.ndarray
    df: float
    ridge: float = 0.0

    @property
    def covariance(self) -> np.ndarray:
        return self.residual_variance * self.unscaled_covariance

    @property
    def rank_deficient(self) -> bool:
        return self.ridge > 0


def fit_linear(
    design: np.ndarray, response: np.ndarray, case_weights: np.ndarray
) -> LinearFit:
    """
    Solve the weighted normal equations.

    The sum of case weights counts as the effective sample size, so the
    residual variance is weighted RSS / (sum of weights - columns). A rank
    deficient design gets the ridge fallback.
    """
    design = np.asarray(design, dtype=float)
    if design.ndim == 1:
        design = design[:, None]
    response = np.asarray(response, dtype=float)
    case_weights = np.asarray(case_weights, dtype=float)
    p = design.shape[1]
    total = float(case_weights.sum())
    df = total - p
    if df <= 0:
        raise NumericalError(ERROR_MESSAGES["ZERO_DF"].format(total=total, columns=p))

    gram = design.T @ (case_weights[:, None] * design)
    moment = design.T @ (case_weights * response)
    ridge = 0.0
    if np.linalg.matrix_rank(gram) < p:
        ridge = RIDGE_FALLBACK
        logger.warning(f"Rank-deficient design ({p} columns); applying ridge {ridge}")
        gram = gram + ridge * np.eye(p)

    unscaled = np.linalg.inv(gram)
    unscaled = 0.5 * (unscaled + unscaled.T)
    coefficients = np.linalg.solve(gram, moment)
    residuals = response - design @ coefficients
    rss = float(np.sum(case_weights * residuals**2))
    return LinearFit(
        coefficients=coefficients,
        residual_variance=max(rss / df, 0.0),
        unscaled_covariance=unscaled,
        df=df,
        ridge=ridge,
    )
