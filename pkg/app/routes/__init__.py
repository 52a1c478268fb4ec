from . import estimate, impute, report, simulate

COMMANDS = [simulate, impute, estimate, report]

__all__ = ["COMMANDS", "estimate", "impute", "report", "simulate"]
