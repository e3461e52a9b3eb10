"""Exception types shared across the toolkit.

Plain ``ValueError`` is used for programmer-contract violations (shape
mismatches, bad arguments).  The classes below mark conditions the CLI
maps to distinct exit codes.
"""


class TflError(Exception):
    """Base class for toolkit-specific failures."""


class UsageError(TflError):
    """Invalid flag combination or contradictory configuration."""


class DataError(TflError):
    """Malformed or unusable input data (files, series, counters)."""


class NumericError(TflError):
    """Numerical breakdown: non-finite loss, diverging parameters."""
