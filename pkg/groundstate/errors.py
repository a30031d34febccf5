"""Exception hierarchy for the ground-state toolkit."""

from typing import Any, Optional, Sequence


class GroundStateError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(GroundStateError):
    """Malformed or inadmissible run configuration."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class AdmissibilityError(ConfigError):
    """Problem data violating the positivity or growth conditions."""


class GridMismatchError(GroundStateError):
    """Fields sampled on different grids were combined."""


class DimensionMismatchError(GroundStateError):
    """Number of components does not match the problem data."""


class ProjectionUndefinedError(GroundStateError):
    """The Nehari projection scalar does not exist (zero field or zero nonlinear part)."""


class StudyInputError(GroundStateError, ValueError):
    """Input outside the domain of an energy-comparison experiment (semitrivial base, zero profile, theta <= 0)."""


class NotOnManifoldError(GroundStateError):
    """A field expected on the Nehari manifold has tau beyond tolerance."""


class InvalidBracketError(GroundStateError):
    """Bisection bracket with the same classification at both ends."""

    def __init__(self, message: str, low_report: Any = None, high_report: Any = None):
        self.low_report = low_report
        self.high_report = high_report
        super().__init__(message)


class SubsystemSolveError(GroundStateError):
    """A subsystem solve failed; carries the index subset that failed."""

    def __init__(self, subset: Sequence[int], cause: BaseException):
        self.subset = tuple(subset)
        self.cause = cause
        super().__init__(f"subsystem {list(self.subset)} failed: {cause}")


class AuditViolationError(GroundStateError):
    """One or more audited inequalities fell outside tolerance."""

    def __init__(self, message: str, rows: Sequence[Any] = ()):
        self.rows = list(rows)
        super().__init__(message)
