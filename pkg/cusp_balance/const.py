"""Constants for the cusp_balance package."""

import math

# Quadrature defaults
DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-300  # compared in log-space
DEFAULT_MAX_DEPTH = 60
DEFAULT_TAIL_STEP = 1.0
GAUSS_ORDER = 10  # panel rule pairs GAUSS_ORDER with 2 * GAUSS_ORDER nodes
INITIAL_PANELS = 4
MAX_PANELS = 4096
MAX_TAIL_DOUBLINGS = 200
TAIL_DROP_FACTOR = 1e-3  # truncate where integrand < rel_tol * factor * running max

# Series truncation
SERIES_DROP = -math.log(1e-18)  # term cutoff relative to the running maximum
PSI_EXTRA_DROP = 10.0  # extra headroom for the second-moment window
NECK_POLYLOG_POWER = 5  # g_a keeps |c| <= (log k) ** 5

# Model levels
MIN_LEVEL = 8.0
MIN_VOLUME_LEVEL = 50.0
NECK_WINDOW_POWER = 2  # u-integral over |u| <= (log k) ** 2
NECK_TAIL_TOL = 1e-12
LADDER_PARTITION_SLACK = 2.0  # nMax ** 2 < k / (2 log k)
LADDER_INTEGRAL_SLACK = 1.0  # closed-form integrals accept n ** 2 < k / log k
CONCENTRATION_WIDTH = 1.0  # window half-width in units of sqrt(k) log k / a

# Regimes
REGIME_CASE_I = "CaseI"
REGIME_CASE_II = "CaseII"
REGIME_CASE_III = "CaseIII"

# Ladder reference values
LADDER_REF_DIAGONAL = 3 / 8
LADDER_REF_NEIGHBOUR = 1 / 8
LADDER_REF_FAR = 0.0

# Chow balance
CHOW_SIGMA_MAX = 60.0  # s = exp(sigma), FS mass beyond |sigma| > 60 is ~1e-26
CHOW_REL_TOL = 1e-13
CHOW_ABS_TOL = 1e-15
DEFAULT_FLOW_TOL = 1e-9
DEFAULT_FLOW_MAX_ITER = 200
FLOW_ARMIJO = 1e-4
FLOW_MIN_STEP = 1e-12
FLOW_TAU_LIMIT = 60.0  # |log weight| beyond this is treated as divergence
STRICTNESS_OFFSET = 0.05
STRICTNESS_FLOOR = 1e-4
BALANCE_LAMBDA_CURVE = 2 / 3  # curve with three marked points

# Energy estimator
DEFAULT_ERROR_CONSTANT = 1.0
DEFAULT_EPSILON_POWER = 10.0
CROSS_CLASS_EPSILON = "epsilon"
CROSS_CLASS_QUADRATIC = "ck2"
BULK_RESCALED = "rescaled"
BULK_RAW = "raw"
ENERGY_SLOPE_BOUND = -1.2

# Output
SCHEMA_VERSION = 1
FLOAT_FORMAT = ".17g"
FORMAT_CSV = "csv"
FORMAT_JSON = "json"

# Configuration keys (cycle configs)
CONF_AMBIENT_DIM = "ambient_dim"
CONF_LAMBDA = "lambda"
CONF_COMPONENTS = "components"
CONF_DIVISOR = "divisor"
CONF_WEIGHTS = "weights"
CONF_KIND = "kind"
CONF_INDEX = "index"
CONF_INDICES = "indices"

# Component kinds
KIND_POINT = "point"
KIND_LINE = "line"
KIND_RNC = "rnc"

# Configuration keys (run configs)
CONF_COMMAND = "command"
CONF_PARAMETERS = "parameters"
CONF_FORMAT = "format"
CONF_OUT = "out"
CONF_TOL = "tol"
CONF_THREADS = "threads"

# Subcommands
CMD_MODEL_MU = "model-mu"
CMD_THETA_CHECK = "theta-check"
CMD_LADDER_TABLE = "ladder-table"
CMD_CHOW_VERIFY = "chow-verify"
CMD_ENERGY_SCAN = "energy-scan"
CMD_BALANCE_FLOW = "balance-flow"

# Default per-command tolerances
DEFAULT_MU_TOL = 0.02
DEFAULT_THETA_TOL = 1e-8
DEFAULT_LADDER_TOL = 0.01
DEFAULT_LADDER_FAR_TOL = 1e-4
DEFAULT_CHOW_TOL = 1e-7
