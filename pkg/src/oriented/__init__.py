"""Oriented (direction-restricted) derivatives: estimation, calculus-law checks and extrema."""

from .dirset import make_direction_set, parse_set
from .errors import (
    ConditioningError,
    DomainError,
    ExpressionSyntaxError,
    NonconvergenceError,
    OrientedError,
    OrthogonalityError,
    PreconditionError,
    UnsupportedOperationError,
)
from .extrema import classify_critical_point, definiteness_on_S, necessary_condition
from .fields import ScalarField, VectorField, load_field
from .odiff import (
    StepSchedule,
    differentiability_diagnostic,
    directional_derivative_plus,
    higher_derivative,
    oriented_derivative_operator,
    oriented_gradient,
    oriented_hessian,
)
from .laws import (
    check_chain_rule,
    check_decomposition,
    check_product_rule,
    check_schwarz,
    mean_value_integral,
    taylor_expand,
)
from .span import decompose, orthosum, span_basis

__version__ = "0.1.0"
