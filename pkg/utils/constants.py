"""
Constants for the positive routing control toolkit.
"""
import os

APP_NAME = "posroute"
APP_VERSION = "1.0.0"

# Goal vertex label used in model files
GOAL_LABEL = "goal"

# Tolerances
LP_TOLERANCE = 1e-9
MEMBERSHIP_TOLERANCE = 1e-12
ZERO_STATE_TOLERANCE = 1e-9
VALUE_RESIDUAL_TOLERANCE = 1e-9
HORIZON_EPSILON = 1e-12
CERTIFICATE_TOLERANCE = 1e-6

# Simplex
MAX_SIMPLEX_ITERATIONS = 50_000
REFACTOR_EVERY = 50

# Geometric program
GP_BARRIER_FACTOR = 10.0
GP_DUALITY_TOLERANCE = 1e-8
GP_NEWTON_TOLERANCE = 1e-10
# Newton decrement per unit of t: centred below STALL, accepted on a stalled line search below ACCEPT
GP_STALL_TOLERANCE = 1e-12
GP_STALL_ACCEPT = 1e-9
# Largest gap m/t of a centred iterate returned when a later centring breaks down
GP_ACCEPTABLE_GAP = 1e-7
GP_MAX_NEWTON_STEPS = 200
GP_MAX_OUTER_ITERATIONS = 60
GP_INTERIOR_SHRINK = 0.99
GP_BISECTION_TOLERANCE = 1e-7
LINE_SEARCH_ALPHA = 0.01
LINE_SEARCH_BETA = 0.5

# Horizon defaults
DEFAULT_ALPHA_TARGET = 0.5
DEFAULT_N_MAX = 40

# Simulation defaults
DEFAULT_T_MAX = 200

# Controller kinds
CONTROLLER_MPC = "mpc"
CONTROLLER_SCALED = "scaled"
CONTROLLER_UNCONSTRAINED = "unconstrained"
CONTROLLERS = [CONTROLLER_MPC, CONTROLLER_SCALED, CONTROLLER_UNCONSTRAINED]

# Initial state sources
X0_XBAR = "xbar"
X0_ZERO = "zero"
X0_EXPLICIT_PREFIX = "explicit:"

# Termination reasons
TERMINATION_REACHED_ZERO = "reached-zero"
TERMINATION_MAX_STEPS = "max-steps"

# Membership decisions
MEMBERSHIP_IN = "IN"
MEMBERSHIP_OUT = "OUT"

# Exit codes
EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INPUT = 2

# Environment variables
ENV_TOLERANCE = "POSROUTE_TOLERANCE"
ENV_LOG_LEVEL = "POSROUTE_LOG_LEVEL"


def get_tolerance(override: float = None) -> float:
    """Return the LP / zero-detection tolerance (flag > environment > default)."""
    if override is not None:
        value = override
    else:
        raw = os.environ.get(ENV_TOLERANCE)
        if raw is None or raw.strip() == "":
            return LP_TOLERANCE
        try:
            value = float(raw)
        except ValueError:
            from utils.exceptions import InputError
            raise InputError(f"{ENV_TOLERANCE} must be a number, got '{raw}'")
    if not (0.0 < value < 1e-3):
        from utils.exceptions import InputError
        raise InputError(f"Tolerance must lie in (0, 1e-3), got {value}")
    return float(value)
