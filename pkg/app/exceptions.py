"""
Application Exceptions
"""
from typing import Optional


class MDAMError(Exception):
    """Base error; exit_code is what the command line returns"""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DataParseError(MDAMError):
    """Malformed input file"""

    exit_code = 2

    def __init__(self, detail: str, line: Optional[int] = None):
        super().__init__(detail)
        self.line = line


class DataValidationError(MDAMError):
    """Input violates a data-model invariant"""

    exit_code = 2


class MissingArtifactError(MDAMError):
    """A prior command's output is missing"""

    exit_code = 2


class NumericalError(MDAMError):
    """A numerical kernel failed"""

    exit_code = 3

    def __init__(self, detail: str, best_residual: Optional[float] = None):
        super().__init__(detail)
        self.best_residual = best_residual


class ImputationError(MDAMError):
    """An imputation step failed; carries where it failed"""

    exit_code = 3

    def __init__(
        self,
        detail: str,
        variable: Optional[str] = None,
        cycle: Optional[int] = None,
        dataset: Optional[int] = None,
    ):
        super().__init__(detail)
        self.variable = variable
        self.cycle = cycle
        self.dataset = dataset


class StudyAbortedError(MDAMError):
    """Too many simulation replicates failed"""

    exit_code = 3
