"""Exception types that map onto the CLI's exit codes."""


class UsageError(Exception):
    """Bad command line or missing required argument (exit code 1)."""


class DataFormatError(Exception):
    """Malformed dataset, checkpoint, or config input (exit code 2)."""


class NumericError(Exception):
    """Numeric failure: non-finite state, unreachable calibration (exit code 3)."""
