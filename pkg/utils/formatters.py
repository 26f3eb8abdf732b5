"""
Formatters for the positive routing control toolkit.
"""
from typing import Optional, Sequence

from utils.constants import GOAL_LABEL


def format_vertex(vertex: int, n: int) -> str:
    """Format a vertex label; n+1 is the goal."""
    return GOAL_LABEL if vertex == n + 1 else str(vertex)


def format_edge(tail: int, head: int, n: int) -> str:
    """Format an edge as 'tail->head'."""
    return f"{tail}->{format_vertex(head, n)}"


def format_number(value: float, digits: int = 6) -> str:
    """Format a float compactly."""
    return f"{value:.{digits}g}"


def format_vector(values: Sequence[float], digits: int = 6) -> str:
    """Format a vector as '(a b c)'."""
    return "(" + " ".join(format_number(float(v), digits) for v in values) + ")"


def round_for_report(value: float, digits: int = 12) -> float:
    """Round a float for machine reports; -0.0 becomes 0.0."""
    rounded = round(float(value), digits)
    return 0.0 if rounded == 0 else rounded


def parse_vector(text: str, expected: Optional[int] = None) -> list:
    """Parse '1,2,3' or '1 2 3' into floats; raises ValueError on bad input."""
    parts = [p for p in text.replace(",", " ").split() if p]
    values = [float(p) for p in parts]
    if expected is not None and len(values) != expected:
        raise ValueError(f"expected {expected} values, got {len(values)}")
    return values
