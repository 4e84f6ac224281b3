"""Exception types shared across the package.

Each carries the CLI exit code it maps to.
"""


class PDNError(Exception):
    exit_code = 1


class ConfigError(PDNError, ValueError):
    """Inconsistent shapes, channel counts, or configuration values."""

    exit_code = 1


class UsageError(PDNError, RuntimeError):
    """An API was called out of order (e.g. backward without a live forward)."""

    exit_code = 1


class DataError(PDNError, ValueError):
    """Invalid labels, unreadable sample files, or undefined metrics."""

    exit_code = 2


class CheckpointError(DataError):
    exit_code = 2


class NumericError(PDNError, ArithmeticError):
    """Non-finite values or a failed gradient check."""

    exit_code = 3


class OracleError(NumericError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
