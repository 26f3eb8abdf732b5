"""
Logging setup for the positive routing control toolkit.
"""
import logging
import os
import sys
from typing import Optional

from utils.constants import ENV_LOG_LEVEL
from utils.exceptions import InputError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    """Configure one stderr handler; stdout stays reserved for machine output."""
    name = level or os.environ.get(ENV_LOG_LEVEL, "WARNING")
    numeric = logging.getLevelName(name.upper())
    if not isinstance(numeric, int):
        raise InputError(f"Unknown log level '{name}'")

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(numeric)


def status(message: str, ok: bool = True) -> None:
    """Print a short status line on stderr."""
    marker = "✅" if ok else "❌"
    print(f"{marker} {message}", file=sys.stderr)
