"""Exception hierarchy for fracocp."""


class FracOCPError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FracOCPError, ValueError):
    """Invalid mesh, problem or run configuration."""


class ParameterError(FracOCPError, ValueError):
    """A numerical parameter is outside its admissible range."""


class DomainError(FracOCPError, ValueError):
    """A point lies outside the domain where a quantity is defined."""


class DimensionError(FracOCPError, ValueError):
    """Functions or operators live on incompatible meshes."""


class OperatorError(FracOCPError, RuntimeError):
    """The assembled operator is invalid (e.g. Cholesky failed)."""


class IntegrationError(FracOCPError, RuntimeError):
    """A closed-form integral was requested outside its convergent range."""


class OracleError(FracOCPError, RuntimeError):
    """A verification oracle failed (test infrastructure, not product)."""


class FitError(FracOCPError, ValueError):
    """Too few usable points for a rate fit."""


class ConvergenceWarning(UserWarning):
    """An optimizer stopped before meeting its tolerance; the best iterate is returned."""
