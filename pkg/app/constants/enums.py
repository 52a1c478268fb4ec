"""
Application Enums
"""
from enum import Enum


class VariableKind(str, Enum):
    """Survey variable kind enumeration"""

    CATEGORICAL = "categorical"
    CONTINUOUS = "continuous"


class Provenance(str, Enum):
    """Origin of a completed-data cell"""

    MISSING = "missing"  # Not yet imputed
    OBSERVED = "observed"
    ITEM_IMPUTED = "item-imputed"
    UNIT_IMPUTED = "unit-imputed"

    @property
    def code(self) -> int:
        return PROVENANCE_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Provenance":
        return _PROVENANCE_BY_CODE[int(code)]


PROVENANCE_CODES = {
    Provenance.MISSING: -1,
    Provenance.OBSERVED: 0,
    Provenance.ITEM_IMPUTED: 1,
    Provenance.UNIT_IMPUTED: 2,
}
_PROVENANCE_BY_CODE = {code: prov for prov, code in PROVENANCE_CODES.items()}


class WeightMode(str, Enum):
    """Horvitz-Thompson weight view"""

    DESIGN = "design"
    FABRICATED = "fabricated"  # Nonrespondents share N minus respondent weights


class ImputationMethod(str, Enum):
    """Chained-equations model per variable"""

    BAYES_LOGISTIC = "bayes-logistic"
    BAYES_LINEAR = "bayes-linear"
    PMM = "pmm"  # Predictive mean matching


class WorkingMode(str, Enum):
    """How the working distribution for margined variables is derived"""

    LOGISTIC_ON_Z = "logistic-on-z"
    LOGISTIC_ON_W = "logistic-on-w"
    INTERCEPT_ONLY = "intercept-only"
    WEIGHTED_RATIO = "weighted-ratio"

    @property
    def varies_by_unit(self) -> bool:
        """Whether probabilities can differ for units in the same conditioning cell"""
        return self in (WorkingMode.LOGISTIC_ON_Z, WorkingMode.LOGISTIC_ON_W)


class MarginMethod(str, Enum):
    """Unit-nonresponse treatment"""

    ADJ = "adj"  # Multiplicative adjustment
    SYS = "sys"  # System of equations for the second margined variable
    YR = "yr"  # Adjustment under fabricated weights
    IH = "ih"  # Item imputation plus whole-record hot deck, no margins
    BD = "bd"  # Before deletion: complete sample, no nonresponse

    @property
    def uses_margins(self) -> bool:
        return self in (MarginMethod.ADJ, MarginMethod.SYS, MarginMethod.YR)

    @property
    def weight_mode(self) -> WeightMode:
        return WeightMode.FABRICATED if self == MarginMethod.YR else WeightMode.DESIGN


class EstimandKind(str, Enum):
    """Population quantity enumeration"""

    TOTAL = "total"
    CONDITIONAL_PROB = "conditional_prob"
    JOINT_PROB = "joint_prob"


class SafeguardFlag(str, Enum):
    """Safeguards fired while finalizing imputation probabilities"""

    RENORMALIZED = "renormalized"  # Partial factors exceeded 1, all levels rescaled
    CLAMPED = "clamped"  # Negative probabilities set to zero
    SOLVER_CLAMPED = "solver-clamped"  # Solved table left [0, 1]
