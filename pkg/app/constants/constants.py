"""
Numeric tolerances, defaults and file names
"""
UTF8 = "utf-8"

# CSV layout
WEIGHT_COLUMN = "weight"
UNIT_NR_COLUMN = "unit_nr"
PROVENANCE_SUFFIX = "__prov"
COMPLETED_FILE_TEMPLATE = "completed_{index}.csv"
REPORT_FILE = "report.json"
ESTIMATES_FILE = "estimates.csv"
REPLICATES_FILE = "replicates.csv"
METRICS_FILE = "metrics.csv"
STUDY_FILE = "study.json"
RRMSE_PLOT_FILE = "rrmse.svg"
COVERAGE_PLOT_FILE = "coverage.svg"

# Weight checks
WEIGHT_RELATIVE_TOLERANCE = 1e-12
WEIGHT_SUM_TOLERANCE = 1e-9

# Logistic regression (IRLS)
IRLS_TOLERANCE = 1e-8
IRLS_MAX_ITERATIONS = 100
SEPARATION_NORM = 30.0
RIDGE_FALLBACK = 1e-4

# Parameter draws
COVARIANCE_JITTER = 1e-10

# Nonlinear systems
SOLVER_TOLERANCE = 1e-10
SOLVER_MAX_ITERATIONS = 200
SOLVER_MAX_DIMENSION = 64
FD_STEP = 1e-7

# Simplex checks
SIMPLEX_TOLERANCE = 1e-12

# Margin imputation
TARGET_REDRAW_LIMIT = 100
CONTINUITY_WEIGHT_FRACTION = 0.5

# Item imputation
DEFAULT_IMPUTATIONS = 10
DEFAULT_CYCLES = 10
PMM_DONORS = 5

# Estimation
CONFIDENCE_LEVEL = 0.95

# Simulation
REPLICATE_FAILURE_CAP = 0.02
