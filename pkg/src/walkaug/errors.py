"""Exception types shared across the pipeline, mapped to CLI exit codes."""


class ConfigError(Exception):
    """Invalid configuration value or argument combination (exit code 2)."""


class DataError(Exception):
    """Unreadable, malformed, or inconsistent input data (exit code 3)."""


class NumericError(Exception):
    """Non-finite value produced during optimization (exit code 4)."""

    def __init__(self, message, triplet=None):
        super().__init__(message)
        self.triplet = triplet


class MiningLimitError(DataError):
    """Metapath working table exceeded the configured row budget."""
