class SasakiGHError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SasakiGHError, ValueError):
    """A point lies outside the domain of a chart."""


class ConfigError(SasakiGHError, ValueError):
    """Invalid parameters, bounds or family specification."""


class ConstructionError(SasakiGHError, RuntimeError):
    """A scenario embedding could not be built."""


class NumericError(SasakiGHError, ArithmeticError):
    """A numerical step failed (singular matrix, off-manifold point, ...)."""
