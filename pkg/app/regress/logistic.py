"""
Weighted multinomial logistic regression (reference-level logit)
"""
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.special import log_softmax, softmax

from app.constants.constants import (
    IRLS_MAX_ITERATIONS,
    IRLS_TOLERANCE,
    RIDGE_FALLBACK,
    SEPARATION_NORM,
)
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import NumericalError

_MAX_HALVINGS = 30


@dataclass(frozen=True)
class LogisticFit:
    """
    Fitted reference-level logit.

    coefficients has one column per non-reference level; the last entry of
    `levels` is the reference. covariance and information are indexed by the
    level-major flattening `coefficients.T.ravel()`.
    """

    coefficients: np.ndarray
    information: np.ndarray
    covariance: np.ndarray
    levels: Tuple[float, ...]
    converged: bool
    iterations: int
    gradient_norm: float
    separated: bool = False
    ridge: float = 0.0

    @property
    def n_predictors(self) -> int:
        return self.coefficients.shape[0]

    @property
    def parameters(self) -> np.ndarray:
        return self.coefficients.T.ravel()


def _as_design(design: np.ndarray) -> np.ndarray:
    design = np.asarray(design, dtype=float)
    return design[:, None] if design.ndim == 1 else design


def _indicators(response: np.ndarray, levels: Sequence[float]) -> np.ndarray:
    """n x (m - 1) indicators of the non-reference levels"""
    return np.column_stack([response == level for level in levels[:-1]]).astype(float)


def _linear_predictor(design: np.ndarray, parameters: np.ndarray, k: int) -> np.ndarray:
    coefficients = parameters.reshape(k, design.shape[1]).T
    eta = design @ coefficients
    return np.column_stack([eta, np.zeros(len(design))])


def log_likelihood(
    parameters: np.ndarray,
    design: np.ndarray,
    indicators: np.ndarray,
    case_weights: np.ndarray,
    ridge: float = 0.0,
) -> float:
    """Case-weighted log-likelihood minus the ridge penalty"""
    k = indicators.shape[1]
    log_probs = log_softmax(_linear_predictor(design, parameters, k), axis=1)
    full = np.column_stack([indicators, 1.0 - indicators.sum(axis=1)])
    value = float(np.sum(case_weights[:, None] * full * log_probs))
    return value - 0.5 * ridge * float(parameters @ parameters)


def score(
    parameters: np.ndarray,
    design: np.ndarray,
    indicators: np.ndarray,
    case_weights: np.ndarray,
    ridge: float = 0.0,
) -> np.ndarray:
    """Gradient of log_likelihood, level-major"""
    k = indicators.shape[1]
    probs = softmax(_linear_predictor(design, parameters, k), axis=1)[:, :k]
    gradient = design.T @ (case_weights[:, None] * (indicators - probs))
    return gradient.T.ravel() - ridge * parameters


def information_matrix(
    parameters: np.ndarray,
    design: np.ndarray,
    k: int,
    case_weights: np.ndarray,
    ridge: float = 0.0,
) -> np.ndarray:
    """Observed information (negative Hessian), level-major blocks"""
    p = design.shape[1]
    probs = softmax(_linear_predictor(design, parameters, k), axis=1)[:, :k]
    info = np.zeros((k * p, k * p))
    for c in range(k):
        for d in range(c, k):
            factor = probs[:, c] * ((c == d) - probs[:, d]) * case_weights
            block = design.T @ (factor[:, None] * design)
            info[c * p : (c + 1) * p, d * p : (d + 1) * p] = block
            info[d * p : (d + 1) * p, c * p : (c + 1) * p] = block.T
    return info + ridge * np.eye(k * p)


def _invert(info: np.ndarray) -> np.ndarray:
    try:
        covariance = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        covariance = np.linalg.pinv(info)
    return 0.5 * (covariance + covariance.T)


def fit_logistic(
    design: np.ndarray,
    response: np.ndarray,
    case_weights: np.ndarray,
    levels: Optional[Sequence[float]] = None,
    ridge: float = 0.0,
) -> LogisticFit:
    """
    Maximize the case-weighted log-likelihood by Newton-IRLS with step halving.

    levels defaults to the response values with positive weight, sorted; the
    last one is the reference. When the coefficient norm passes the
    separation threshold without a ridge, the fit is redone with the ridge
    fallback and flagged as separated.
    """
    design = _as_design(design)
    response = np.asarray(response, dtype=float)
    case_weights = np.asarray(case_weights, dtype=float)
    if not case_weights.sum() > 0:
        raise NumericalError(ERROR_MESSAGES["ZERO_WEIGHTS"])
    if levels is None:
        levels = np.unique(response[case_weights > 0])
    levels = tuple(float(level) for level in levels)
    for level in levels:
        if not case_weights[response == level].sum() > 0:
            raise NumericalError(ERROR_MESSAGES["EMPTY_LEVEL"].format(level=level))
    if len(levels) < 2:
        raise NumericalError(ERROR_MESSAGES["SINGLE_LEVEL"])

    k = len(levels) - 1
    p = design.shape[1]
    indicators = _indicators(response, levels)
    parameters = np.zeros(k * p)
    current = log_likelihood(parameters, design, indicators, case_weights, ridge)
    converged = False
    gradient_norm = np.inf
    iteration = 0

    for iteration in range(1, IRLS_MAX_ITERATIONS + 1):
        gradient = score(parameters, design, indicators, case_weights, ridge)
        gradient_norm = float(np.max(np.abs(gradient)))
        if gradient_norm <= IRLS_TOLERANCE:
            converged = True
            break
        info = information_matrix(parameters, design, k, case_weights, ridge)
        step = np.linalg.lstsq(info, gradient, rcond=None)[0]

        t = 1.0
        for _ in range(_MAX_HALVINGS):
            candidate = parameters + t * step
            value = log_likelihood(candidate, design, indicators, case_weights, ridge)
            if np.isfinite(value) and value >= current - 1e-12 * abs(current):
                break
            t *= 0.5
        parameters, current = candidate, value

        if ridge == 0.0 and np.linalg.norm(parameters) > SEPARATION_NORM:
            logger.warning(
                f"Separation detected after {iteration} iterations "
                f"(coefficient norm {np.linalg.norm(parameters):.1f}); refitting with ridge"
            )
            fit = fit_logistic(design, response, case_weights, levels, RIDGE_FALLBACK)
            return replace(fit, separated=True)

    if not converged:
        logger.warning(
            f"Logistic fit stopped after {iteration} iterations, "
            f"max gradient {gradient_norm:.3e}"
        )
    info = information_matrix(parameters, design, k, case_weights, ridge)
    return LogisticFit(
        coefficients=parameters.reshape(k, p).T,
        information=info,
        covariance=_invert(info),
        levels=levels,
        converged=converged,
        iterations=iteration,
        gradient_norm=gradient_norm,
        separated=False,
        ridge=ridge,
    )


def predict_proba(
    fit: LogisticFit, design: np.ndarray, coefficients: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Level probabilities per row, columns ordered as fit.levels.

    coefficients overrides the point estimate, e.g. with a posterior draw.
    """
    coefficients = fit.coefficients if coefficients is None else coefficients
    design = np.asarray(design, dtype=float)
    single = design.ndim == 1
    rows = design[None, :] if single else design
    if rows.shape[1] != coefficients.shape[0]:
        raise NumericalError(
            ERROR_MESSAGES["ARITY_MISMATCH"].format(
                seen=rows.shape[1], expected=coefficients.shape[0]
            )
        )
    eta = np.column_stack([rows @ coefficients, np.zeros(len(rows))])
    probs = softmax(eta, axis=1)
    probs = probs / probs.sum(axis=1, keepdims=True)
    return probs[0] if single else probs
