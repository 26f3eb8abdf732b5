"""
Error hierarchy for the positive routing control toolkit.

InputError subclasses map to exit code 2, NumericalError subclasses to exit code 1.
"""


class PosRouteError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 1


class InputError(PosRouteError):
    """Raised when user input (model file, flags, vectors) is invalid."""
    exit_code = 2


class NumericalError(PosRouteError):
    """Raised when a numerical routine fails or a certificate does not hold."""
    exit_code = 1


class ModelError(InputError):
    """Raised when a model description cannot be turned into a routing graph."""


class UnreachableGoal(InputError):
    """Raised when some vertex has no directed path to the goal."""

    def __init__(self, vertices):
        self.vertices = sorted(vertices)
        labels = ", ".join(str(v) for v in self.vertices)
        super().__init__(f"Goal unreachable from vertex(es) {labels}")


class NonpositiveS(InputError):
    """Raised when a state weight is not strictly positive."""


class X0OutOfBounds(InputError):
    """Raised when an initial state is not admissible."""


class LambdaNotAdmissible(InputError):
    """Raised when a scaling vector lies outside the admissible set L."""


class GammaBelowOne(InputError):
    """Raised when a performance bound below one is supplied."""


class BoundsRequired(InputError):
    """Raised when an operation needs capacity bounds and the model has none."""


class InfeasibleInput(InputError):
    """Raised when user supplied constraints leave the geometric program empty."""


class CycleDetected(NumericalError):
    """Raised when a feedback gain routes commodity around a cycle."""


class NumericalFailure(NumericalError):
    """Raised when an iterative solver stagnates."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class Unbounded(NumericalError):
    """Raised when a linear program is unbounded."""


class MaxIterations(NumericalError):
    """Raised when the simplex iteration limit is hit."""


class CertificateMismatch(NumericalError):
    """Raised when a GP solution fails re-evaluation in the original space."""


class AdmissibilityViolation(NumericalError):
    """Raised when a simulated step leaves the admissible sets."""


class TruncatedCost(NumericalError):
    """Raised when an MPC run stops before reaching zero; value is a lower bound."""

    def __init__(self, message, lower_bound):
        super().__init__(message)
        self.lower_bound = lower_bound
