"""Exception hierarchy shared by all modules."""

import numpy as np


class OrientedError(Exception):
    """Base class for every error raised by this package."""


class ExpressionSyntaxError(OrientedError, ValueError):
    """Malformed expression text. ``position`` is a 0-based character offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class DomainError(OrientedError, ValueError):
    """A field was evaluated outside its domain."""

    def __init__(self, point, message="point outside the field domain"):
        self.point = np.asarray(point, dtype=float).tolist()
        super().__init__(f"{message}: {self.point}")


class PreconditionError(OrientedError):
    """A hypothesis of a check failed (interior, balancedness, value condition, ...)."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class OrthogonalityError(PreconditionError, ValueError):
    """Components of an orthogonal sum are not pairwise orthogonal."""


class NonconvergenceError(OrientedError):
    """Difference quotients show no Cauchy behaviour."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class ConditioningError(OrientedError):
    """The least-squares design matrix is too ill-conditioned."""

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class UnsupportedOperationError(OrientedError, NotImplementedError):
    """Operation not available for this kind of object."""
