"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (a ``ValueError``),
numerical breakdowns from :class:`NumericalError`.  The CLI maps the two
families onto distinct exit codes.
"""


class ElasticReflectError(Exception):
    """Base class for all package errors."""


class ValidationError(ElasticReflectError, ValueError):
    pass


class NumericalError(ElasticReflectError, ArithmeticError):
    pass


class NonPositiveVolatility(ValidationError):
    pass


class EmptyDomain(ValidationError):
    pass


class OutOfDomain(ValidationError):
    pass


class NegativeLocalTime(ValidationError):
    pass


class DescendingHit(ValidationError):
    pass


class BoundaryOrder(ValidationError):
    pass


class EmptySamples(ValidationError):
    pass


class MethodUnavailable(ValidationError):
    pass


class AnchorDivergence(NumericalError):
    pass


class NonPositive(NumericalError):
    """The integrated log-derivative left the positive half-line."""


class QuadratureFailure(NumericalError):
    pass


class DomainExit(NumericalError):
    pass


class ExcessiveJumps(NumericalError):
    pass


class NonHittingDrift(UserWarning):
    """Drift pushes away from the target level, so hitting is not certain."""


class NonRecurrentModel(UserWarning):
    pass
