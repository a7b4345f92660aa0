"""Exception hierarchy shared by the solver, the CLI and the bench harness.

Each family maps to a distinct CLI exit code (see ``roscut.cli``).
"""


class RosError(Exception):
    """Base class for all package errors."""


class GraphFormatError(RosError, ValueError):
    """Malformed graph input. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IndexRangeError(GraphFormatError):
    pass


class DuplicateEdgeError(GraphFormatError):
    pass


class ShapeError(RosError, ValueError):
    """Dimension mismatch between graphs, matrices, labelings or models."""


class ConfigError(RosError, ValueError):
    """Invalid arguments or configuration values."""


class GenerationError(RosError, RuntimeError):
    pass


class InfeasibleError(RosError, ValueError):
    """A matrix that cannot be brought onto the simplex product."""


class DegenerateSupportError(RosError, ValueError):
    pass


class EnumerationTooLargeError(RosError, ValueError):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"enumeration size {size} exceeds cap {cap}")


class StepTooLargeError(RosError, FloatingPointError):
    pass


class NonFiniteError(RosError, FloatingPointError):
    pass


class StaleCacheError(RosError, RuntimeError):
    pass


class ModelFormatError(RosError, ValueError):
    pass
