"""
Root finder for small nonlinear systems
"""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import optimize

from app.constants.constants import (
    FD_STEP,
    SOLVER_MAX_DIMENSION,
    SOLVER_MAX_ITERATIONS,
    SOLVER_TOLERANCE,
)
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import NumericalError

Residual = Callable[[np.ndarray], np.ndarray]


@dataclass
class EquationSystem:
    """F(x) = 0 with a starting point; domain marks probability unknowns"""

    residual: Residual
    x0: np.ndarray
    tolerance: float = SOLVER_TOLERANCE
    domain: Optional[Tuple[float, float]] = None

    @property
    def dimension(self) -> int:
        return len(self.x0)


@dataclass(frozen=True)
class SolverResult:
    root: np.ndarray
    residual: float  # max |F(root)|
    iterations: int
    method: str  # "newton" or "hybr"
    converged: bool
    out_of_domain: bool = False


def finite_difference_jacobian(
    func: Residual, x: np.ndarray, fx: np.ndarray
) -> np.ndarray:
    """Forward differences with step FD_STEP * max(1, |x_i|)"""
    jacobian = np.empty((len(fx), len(x)))
    for i in range(len(x)):
        step = FD_STEP * max(1.0, abs(x[i]))
        shifted = x.copy()
        shifted[i] += step
        jacobian[:, i] = (func(shifted) - fx) / step
    return jacobian


def _max_abs(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if np.all(np.isfinite(values)) else np.inf


def solve_system(system: EquationSystem) -> SolverResult:
    """
    Damped Newton with a backtracking line search; when a Newton step makes
    no progress, hand the current point to the hybrid dogleg method once.
    """
    if system.dimension > SOLVER_MAX_DIMENSION:
        raise NumericalError(
            ERROR_MESSAGES["SYSTEM_TOO_LARGE"].format(
                dimension=system.dimension, limit=SOLVER_MAX_DIMENSION
            )
        )

    def func(x: np.ndarray) -> np.ndarray:
        return np.asarray(system.residual(x), dtype=float)

    x = np.asarray(system.x0, dtype=float).copy()
    fx = func(x)
    if not np.all(np.isfinite(fx)):
        raise NumericalError(ERROR_MESSAGES["BAD_START"])

    best_x, best = x.copy(), _max_abs(fx)
    method = "newton"
    dogleg_used = False
    iterations = 0

    for iteration in range(1, SOLVER_MAX_ITERATIONS + 1):
        iterations = iteration
        if best <= system.tolerance:
            return _result(system, best_x, best, iteration - 1, method)

        jacobian = finite_difference_jacobian(func, x, fx)
        step = np.linalg.lstsq(jacobian, -fx, rcond=None)[0]
        norm = np.linalg.norm(fx)
        t = 1.0
        accepted = False
        while t > 1e-4:
            candidate = x + t * step
            f_candidate = func(candidate)
            if np.all(np.isfinite(f_candidate)) and np.linalg.norm(f_candidate) < (
                1.0 - 1e-4 * t
            ) * norm:
                accepted = True
                break
            t *= 0.5

        if not accepted:
            if dogleg_used:
                break
            dogleg_used = True
            method = "hybr"
            logger.debug(f"Newton stalled at residual {best:.3e}; switching to dogleg")
            solution = optimize.root(func, x, method="hybr", options={"xtol": 1e-15})
            candidate = np.asarray(solution.x, dtype=float)
            f_candidate = func(candidate)
            if _max_abs(f_candidate) >= best:
                break

        x, fx = candidate, f_candidate
        residual = _max_abs(fx)
        if residual < best:
            best_x, best = x.copy(), residual

    if best <= system.tolerance:
        return _result(system, best_x, best, iterations, method)
    raise NumericalError(
        ERROR_MESSAGES["NO_CONVERGENCE"].format(
            iterations=iterations, residual=best
        ),
        best_residual=best,
    )


def _result(
    system: EquationSystem, root: np.ndarray, residual: float, iterations: int, method: str
) -> SolverResult:
    out_of_domain = False
    if system.domain is not None:
        low, high = system.domain
        out_of_domain = bool(np.any((root <= low) | (root >= high)))
        if out_of_domain:
            logger.warning(f"Root outside ({low}, {high}): {np.round(root, 6)}")
    return SolverResult(
        root=root,
        residual=residual,
        iterations=iterations,
        method=method,
        converged=True,
        out_of_domain=out_of_domain,
    )
