"""Exception hierarchy shared by every subsystem.

CLI exit codes: ConfigurationError -> 2, MissingArtifactError -> 3,
NumericError -> 4.
"""


class ParetoFuseError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ParetoFuseError):
    """Invalid shapes, unknown options, malformed config files."""


class UsageError(ParetoFuseError):
    """API misuse, e.g. backward called twice on the same graph."""


class ContractViolation(ParetoFuseError):
    """A documented precondition was violated by the caller."""


class NumericError(ParetoFuseError):
    """Non-finite values or numerically invalid inputs."""


class UndefinedMetricError(ParetoFuseError):
    """A metric has no defined value on the given data."""


class DegenerateDistributionError(NumericError):
    """A score sample has zero variance where spread is required."""


class MissingArtifactError(ParetoFuseError):
    """A pipeline stage needs an output another stage has not produced."""
