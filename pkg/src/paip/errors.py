"""Exception types shared across the package.

Refusals carry enough detail for the CLI to map them onto exit codes.
"""


class PaipError(Exception):
    """Base class for all package errors."""


class AbsoluteContinuityViolation(PaipError, ValueError):
    """p(x) > 0 where q(x) = 0 inside a KL divergence."""


class InvalidDistribution(PaipError, ValueError):
    pass


class IndexOutOfRange(PaipError, IndexError):
    pass


class ShapeMismatch(PaipError, ValueError):
    pass


class ComplexityRefusal(PaipError):
    """An enumeration would exceed the configured cap."""

    def __init__(self, what: str, size: float, cap: float):
        self.what = what
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: {size:.6g} entries exceeds cap {cap:.6g}")


class NonConvergence(PaipError):
    """An iterative solver ran out of iterations.

    ``report`` holds whatever the solver produced last (a fit report or
    the last capacity bound), so callers may accept the result anyway.
    """

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class ConditioningOnNullEvent(PaipError, ZeroDivisionError):
    pass


class UnsupportedView(PaipError):
    pass


class MotivationUnsupported(PaipError):
    pass


class HorizonTooShort(PaipError, ValueError):
    pass


class ZeroEvidence(PaipError, ZeroDivisionError):
    pass


class UnknownQuery(PaipError, KeyError):
    pass


class OracleInfeasible(PaipError):
    pass


class AgentStepError(PaipError):
    """Wraps an error raised by the agent at a given step."""

    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"agent failed at step t={step}: {cause!r}")


class ConfigError(PaipError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ValidationError(ConfigError):
    """All violations found in a config, as (field path, message) pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{path}: {msg}" for path, msg in self.violations]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))
