"""Python bindings for the calagent calendar assistant."""

from ._calagent import (
    CalagentError,
    Service,
    decide,
    normalize_state,
    parse_temporal,
    run_eval,
)

__all__ = [
    "CalagentError",
    "Service",
    "decide",
    "normalize_state",
    "parse_temporal",
    "run_eval",
]


def error_code(exc: CalagentError) -> str:
    """Error code name carried by a CalagentError, e.g. "UnknownSession"."""
    return exc.args[0]
