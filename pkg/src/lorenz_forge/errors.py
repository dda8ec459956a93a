"""Exception hierarchy.

Validation problems (bad input, violated model conditions) and numerical
failures (non-convergence, orbits leaving a chart) are kept apart because
the command line maps them to different exit codes.
"""


class LorenzForgeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(LorenzForgeError, ValueError):
    """Input rejected before any computation."""


class ConditionViolation(ValidationError):
    """A model coefficient set violates one of the defining conditions.

    ``condition`` names it: ``"A"``, ``"B"``, ``"C"``, ``"D"``, ``"det"``
    (the global-map determinants) or ``"case"``.
    """

    def __init__(self, condition, message):
        super().__init__(f"condition {condition}: {message}")
        self.condition = condition
        self.detail = message


class ConfigError(ValidationError):
    """A configuration file failed schema validation.

    ``field`` is a dotted path into the document; ``line`` is the line of
    the offending entry when it could be located.
    """

    def __init__(self, field, message, line=None):
        where = field if line is None else f"{field} (line {line})"
        super().__init__(f"{where}: {message}")
        self.field = field
        self.line = line


class DomainError(LorenzForgeError, ValueError):
    """Arguments outside the mathematical domain of an operation."""


class ComputationError(LorenzForgeError, ArithmeticError):
    """A numerical procedure failed (e.g. Newton did not converge).

    ``trace`` holds whatever iterate history the failing routine recorded.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class OrbitEscape(ComputationError):
    """An orbit left the escape radius or overflowed."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class ChartExit(ComputationError):
    """A point left the coordinate chart of a local or global map.

    ``stage`` is one of ``"T01^i"``, ``"T12"``, ``"T02^j"``, ``"T21"`` or a
    chart name such as ``"Pi1^-"``.
    """

    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
