"""Exception and warning types raised by the package."""


class GNEError(Exception):
    """Base class for all package errors."""


class DomainError(GNEError, ValueError):
    """Input outside the domain of an operation (bad sizes, bad parameters)."""


class ConnectivityError(DomainError):
    """The communication graph is not connected."""


class NumericalError(GNEError, ArithmeticError):
    """A non-finite value appeared during an evaluation or an iteration."""

    def __init__(self, message, iteration=None, state=None):
        super().__init__(message)
        self.iteration = iteration
        self.state = state


class CertificationError(GNEError):
    """Algorithm parameters fail the convergence hypotheses."""

    def __init__(self, message, min_c=None, report=None):
        super().__init__(message)
        self.min_c = min_c
        self.report = report


class OracleError(GNEError):
    """The reference (centralized) solver did not converge."""


class ConfigError(GNEError, ValueError):
    """Scenario configuration violates the schema. ``key`` holds the dotted key path."""

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(key if message is None else f"{key}: {message}")


class ComparisonError(GNEError):
    """Report bundles cannot be compared (different games, too few bundles)."""


class MonotonicityWarning(UserWarning):
    """Estimated strong-monotonicity constant is not positive."""
