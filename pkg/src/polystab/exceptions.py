"""Exception hierarchy.

Domain and configuration problems derive from :class:`PolystabError` via
:class:`DomainError`; failures of the numerics derive from
:class:`NumericError`.  The command line maps the first family to exit code 1
and the second to exit code 2.
"""


class PolystabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PolystabError, ValueError):
    """An input lies outside the domain of an operation."""


class GeometryError(DomainError):
    """Invalid polygon or domain geometry."""


class DimensionError(DomainError):
    """Sizes of two inputs do not match."""


class DegenerateAngleError(DomainError):
    """A corner angle equals pi (or lies outside (0, 2*pi))."""


class TrivialityError(DomainError):
    """A boundary current vanishes after mean-zero projection."""


class DegeneracyError(DomainError):
    """Two probing currents are linearly dependent."""


class FeasibilityError(DomainError):
    """Rejection sampling could not produce an admissible polygon."""


class ConfigError(DomainError):
    """Invalid experiment or reconstruction configuration."""


class NumericError(PolystabError, ArithmeticError):
    """Non-finite values or a failed numerical procedure."""


class FitError(NumericError):
    """Corner-coefficient least squares is rank deficient."""


class DiscretizationError(NumericError):
    """The discrete boundary-integral system is singular or inaccurate."""
