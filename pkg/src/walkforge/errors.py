"""Exception hierarchy shared by every walkforge module."""


class WalkforgeError(Exception):
    """Base class for all errors raised by walkforge."""


class GraphFormatError(WalkforgeError):
    """An edge list or binary graph file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidDistributionError(WalkforgeError, ValueError):
    """Weights are empty, negative, non-finite, or all zero."""


class EmptyDomainError(WalkforgeError, ValueError):
    """A uniform draw was requested over an empty range."""


class NonterminatingSamplerError(WalkforgeError, RuntimeError):
    """Rejection sampling exceeded its trial cap without accepting."""


class ConfigurationError(WalkforgeError, ValueError):
    """A walk program and sampler combination cannot be executed."""


class ProgramContractError(WalkforgeError, ValueError):
    """A user Weight function broke its contract (e.g. negative weight)."""


class GraphBoundsError(WalkforgeError, IndexError):
    """A vertex id or adjacency offset is out of range."""
