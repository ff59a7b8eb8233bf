"""Shared exception types; the CLI maps them to exit codes."""


class ErgolabError(Exception):
    """Base class for library errors."""


class ConfigError(ErgolabError):
    """Bad family name, parameter out of range, malformed config (CLI exit 2)."""


class UnsupportedError(ErgolabError):
    """Operation not available for this map/measure combination (CLI exit 2)."""


class ConvergenceError(ErgolabError):
    """Iterative solver failed to converge (CLI exit 3); carries diagnostics."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
