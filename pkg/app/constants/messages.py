"""
Application Messages and Constants
"""

# Success Messages
SUCCESS_MESSAGES = {
    "IMPUTATION_COMPLETED": "Wrote {count} completed datasets to {path}",
    "STUDY_COMPLETED": "Study finished: {replicates} replicates, {failed} failed",
    "ESTIMATES_WRITTEN": "Pooled estimates written to {path}",
    "REPORT_WRITTEN": "Report written to {path}",
}

# Error Messages
ERROR_MESSAGES = {
    # Ingestion and validation
    "FILE_NOT_FOUND": "Input file not found: {path}",
    "MISSING_COLUMN": "Column '{column}' missing from {path}",
    "WRONG_ARITY": "Line {line}: expected {expected} fields, saw {seen}",
    "NONPOSITIVE_WEIGHT": "Line {line}: weight must be positive, got {value}",
    "BAD_NUMBER": "Line {line}: column '{column}' is not a number: '{value}'",
    "BAD_UNIT_FLAG": "Line {line}: unit_nr must be 0 or 1, got '{value}'",
    "LEVEL_OUT_OF_RANGE": "Line {line}: '{variable}' value {value} outside levels 1..{levels}",
    "UNKNOWN_LABEL": "Line {line}: '{variable}' label '{value}' not in schema",
    "UNIT_NR_WITH_VALUES": "Line {line}: unit nonrespondent has a non-empty value for '{variable}'",
    "INVALID_FRAME": "Sample frame failed validation: {violations}",
    "UNKNOWN_VARIABLE": "Variable '{variable}' not in schema",
    "NOT_MARGINED": "Variable '{variable}' has no auxiliary margin",
    # Weights
    "NO_NONRESPONDENTS": "Fabricated weights need at least one unit nonrespondent",
    "RESPONDENT_WEIGHTS_EXCEED_N": "respondent weights exceed N ({total:.6g} >= {population})",
    # Regression kernel
    "EMPTY_LEVEL": "Response level {level} has no observations",
    "SINGLE_LEVEL": "Response has a single level; nothing to model",
    "ZERO_WEIGHTS": "Case weights are all zero",
    "ZERO_DF": "Zero effective degrees of freedom (sum of weights {total:.6g}, {columns} columns)",
    "NOT_PSD": "Covariance is not positive semidefinite after jitter",
    "ARITY_MISMATCH": "Design rows have {seen} columns, fit expects {expected}",
    "NO_CONVERGENCE": "No convergence in {iterations} iterations (best residual {residual:.3e})",
    "SYSTEM_TOO_LARGE": "System dimension {dimension} exceeds {limit}",
    "BAD_START": "Residual function not finite at the initial point",
    # Item imputation
    "NO_OBSERVED_DONORS": "no observed donors for variable '{variable}'",
    "NO_RESPONDENTS": "Sample has no unit respondents",
    "FIT_FAILED": "Imputation model for '{variable}' failed in cycle {cycle}: {error}",
    # Margin imputation
    "MARGIN_VARIANCE_TOO_LARGE": "margin variance too large for '{variable}': {attempts} draws had a negative total",
    "ZERO_DENOMINATOR": "Adjustment for '{variable}' level {level} has zero working mass but needs {needed:.6g}",
    "NON_FINITE_FACTOR": "Adjustment factor for '{variable}' level {level} is not finite",
    "INFEASIBLE_ADJUSTMENT": "infeasible adjustment for '{variable}': a probability vector clamps to zero",
    "INESTIMABLE_LOG_ODDS": "inestimable log-odds: no respondents with '{conditioner}' = {level}",
    "SYS_SOLVER_FAILED": "Dataset {dataset}: system for '{variable}' failed: {error}",
    "NOT_CATEGORICAL": "Margined variable '{variable}' must be categorical",
    "UNRESOLVED_VARIANCE": "No variance for '{variable}' level {level}; resolve defaults first",
    # Hot deck
    "NO_DONORS": "Hot deck has no respondents to draw donors from",
    # Estimation
    "ZERO_WEIGHT_CONDITION": "Conditioning cell of '{estimand}' has zero weight",
    "TOO_FEW_IMPUTATIONS": "Combining rules need at least 2 estimates, got {count}",
    "TOO_FEW_REPLICATES": "Replicate metrics need at least 2 replicates, got {count}",
    # Study and CLI
    "STUDY_ABORTED": "{failed} of {total} replicates failed (cap {cap:.0%})",
    "MISSING_ARTIFACT": "Missing {path}; run `{command}` first",
}
