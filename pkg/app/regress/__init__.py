from app.regress.draws import ParameterDraw, draw_normal, draw_params
from app.regress.linear import LinearFit, fit_linear
from app.regress.logistic import LogisticFit, fit_logistic, predict_proba
from app.regress.solver import EquationSystem, SolverResult, solve_system

__all__ = [
    "EquationSystem",
    "LinearFit",
    "LogisticFit",
    "ParameterDraw",
    "SolverResult",
    "draw_normal",
    "draw_params",
    "fit_linear",
    "fit_logistic",
    "predict_proba",
    "solve_system",
]
