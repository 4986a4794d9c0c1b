"""Exception types shared across the package."""


class ScorecfError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(ScorecfError):
    """A document is structurally malformed (missing keys, wrong types)."""


class ValidationError(ScorecfError):
    """A document is well-formed but semantically invalid."""


class TargetTypeError(ScorecfError):
    """An operation was requested on an incompatible scorecard target type."""


class EmptyDataError(ScorecfError):
    """A computation that needs sample rows received none."""


class SingularityError(ScorecfError):
    """A covariance matrix stayed non-positive-definite after ridge escalation."""


class BuildError(ScorecfError):
    """A counterfactual model could not be assembled from the given inputs."""


class DecodeError(ScorecfError):
    """Solver values violate a structural invariant of the formulation."""


class NumericalError(ScorecfError):
    """The simplex ran out of numerically acceptable pivots."""


class SizeError(ScorecfError):
    """An enumeration or model exceeds the configured size guard."""


class ArgumentError(ScorecfError, ValueError):
    """An argument value is outside the documented domain."""


class InternalError(ScorecfError):
    """An internal consistency check failed; indicates a bug, not bad input."""
