"""
Validators for the positive routing control toolkit.

Every validator returns a (valid, message) tuple; callers decide which exception to raise.
"""
import math
from typing import Optional, Sequence

import numpy as np


def validate_count(value, field_name: str, minimum: int = 1) -> tuple[bool, str]:
    """Validate an integer count with a lower bound."""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        return False, f"'{field_name}' must be an integer"
    if value < minimum:
        return False, f"'{field_name}' must be >= {minimum}, got {value}"
    return True, ""


def validate_length(values: Sequence, expected: int, field_name: str) -> tuple[bool, str]:
    """Validate that a vector has the expected length."""
    if len(values) != expected:
        return False, f"'{field_name}' has length {len(values)}, expected {expected}"
    return True, ""


def validate_finite(values: Sequence, field_name: str) -> tuple[bool, str]:
    """Validate that all entries are finite numbers."""
    for idx, value in enumerate(values):
        if not math.isfinite(float(value)):
            return False, f"'{field_name}[{idx + 1}]' is not finite"
    return True, ""


def validate_positive_vector(values: Sequence, field_name: str) -> tuple[bool, str]:
    """Validate that every entry is strictly positive."""
    valid, msg = validate_finite(values, field_name)
    if not valid:
        return valid, msg
    for idx, value in enumerate(values):
        if value <= 0:
            return False, f"'{field_name}[{idx + 1}]' must be > 0, got {value}"
    return True, ""


def validate_nonnegative_vector(values: Sequence, field_name: str) -> tuple[bool, str]:
    """Validate that every entry is nonnegative."""
    valid, msg = validate_finite(values, field_name)
    if not valid:
        return valid, msg
    for idx, value in enumerate(values):
        if value < 0:
            return False, f"'{field_name}[{idx + 1}]' must be >= 0, got {value}"
    return True, ""


def validate_edge(tail: int, head: Optional[int], n: int) -> tuple[bool, str]:
    """Validate one edge; head None stands for the goal vertex."""
    if not 1 <= tail <= n:
        return False, f"Edge tail {tail} out of range 1..{n}"
    if head is None:
        return True, ""
    if not 1 <= head <= n:
        return False, f"Edge head {head} out of range 1..{n} (use 'goal' for the goal vertex)"
    if head == tail:
        return False, f"Self-loop at vertex {tail}"
    return True, ""


def validate_state_in_box(x: np.ndarray, upper: Optional[np.ndarray],
                          tol: float = 0.0) -> tuple[bool, str]:
    """Validate 0 <= x <= upper elementwise (upper None means no upper bound)."""
    for idx, value in enumerate(x):
        if value < -tol:
            return False, f"x[{idx + 1}] = {value} is negative"
        if upper is not None and value > upper[idx] + tol:
            return False, f"x[{idx + 1}] = {value} exceeds x_max = {upper[idx]}"
    return True, ""


def validate_lambda(lam: Sequence, n: int) -> tuple[bool, str]:
    """Validate a scaling vector: length n and entries in (0, 1]."""
    valid, msg = validate_length(lam, n, "lambda")
    if not valid:
        return valid, msg
    for idx, value in enumerate(lam):
        if not (0.0 < value <= 1.0):
            return False, f"lambda[{idx + 1}] = {value} must lie in (0, 1]"
    return True, ""


def validate_gamma(gamma: float) -> tuple[bool, str]:
    """Validate a performance bound."""
    if not math.isfinite(gamma):
        return False, f"gamma must be finite, got {gamma}"
    if gamma < 1.0:
        return False, f"gamma must be >= 1, got {gamma}"
    return True, ""


def validate_alpha_target(alpha: float) -> tuple[bool, str]:
    """Validate a suboptimality target in (0, 1)."""
    if not (0.0 < alpha < 1.0):
        return False, f"alpha target must lie in (0, 1), got {alpha}"
    return True, ""
