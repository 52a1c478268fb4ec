"""
Error-context decorators for imputation steps
"""
import functools
import inspect
from typing import Any, Callable, TypeVar

from app.constants.messages import ERROR_MESSAGES
from app.exceptions import ImputationError, NumericalError

F = TypeVar("F", bound=Callable[..., Any])


def with_imputation_context(func: F) -> F:
    """
    Decorator that annotates kernel failures with the variable and cycle
    of the wrapped call.

    The wrapped function must take `variable` (a VariableSpec or a name) and
    may take `cycle`; both are read from the bound call arguments.

    Usage:
    @with_imputation_context
    def _impute_variable(self, dataset, variable, cycle, rng):
        ...
    """
    signature = inspect.signature(func)

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ImputationError:
            raise
        except (NumericalError, ValueError, ArithmeticError) as error:
            bound = signature.bind_partial(*args, **kwargs).arguments
            variable = bound.get("variable")
            name = getattr(variable, "name", variable)
            cycle = bound.get("cycle")
            raise ImputationError(
                ERROR_MESSAGES["FIT_FAILED"].format(
                    variable=name, cycle=cycle, error=error
                ),
                variable=name,
                cycle=cycle,
            ) from error

    return wrapper  # type: ignore[return-value]
