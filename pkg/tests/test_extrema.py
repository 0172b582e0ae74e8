import numpy as np
import pytest

from oriented.corpus import builtin_field
from oriented.dirset import Cone, FullSet, LinearSpan, Orthant, ZeroSet, parse_set
from oriented.errors import PreconditionError
from oriented.extrema import (
    classify_critical_point,
    definiteness_on_S,
    necessary_condition,
    sufficient_condition_quadratic,
)
from oriented.fields import ScalarField

E = ScalarField.from_expression
HALF_LINE = parse_set("product(orthant:+ & zero:1)")


def test_necessary_condition_examples():
    assert necessary_condition(E("-(x1^2 + x2^2)", 2), [0, 0], FullSet(2)).passed
    v = necessary_condition(E("x1", 2), [0, 0], HALF_LINE)
    assert not v.passed
    np.testing.assert_allclose(v.witness, [1, 0])
    v = necessary_condition(E("-x1", 2), [0, 0], HALF_LINE)
    assert v.passed and v.worst_value == pytest.approx(-1)


def test_necessary_condition_uses_one_sided_derivatives_when_not_differentiable():
    v = necessary_condition(E("-abs(x1) - abs(x2)", 2), [0, 0], FullSet(2))
    assert v.method == "directional" and v.passed
    v = necessary_condition(E("abs(x1)", 2), [0, 0], FullSet(2))
    assert not v.passed


def test_definiteness_examples():
    v = definiteness_on_S(np.diag([-2.0, -3.0]), FullSet(2))
    assert v.verdict == "strongly_negative" and v.lambda_estimate == pytest.approx(2)
    v = definiteness_on_S(np.diag([1.0, -1.0]), FullSet(2))
    assert v.verdict == "indefinite"
    np.testing.assert_allclose(np.abs(v.witnesses), [[1, 0], [0, 1]], atol=1e-12)
    v = definiteness_on_S(np.diag([1.0, -1.0]), LinearSpan([[1, 0]], 2))
    assert v.verdict == "strongly_positive" and v.lambda_estimate == pytest.approx(1)
    assert definiteness_on_S(np.eye(2), ZeroSet(2)).verdict == "inconclusive"


def test_definiteness_sampled_on_cones():
    v = definiteness_on_S(np.diag([1.0, -1.0]), Orthant([1, 1]))
    assert v.verdict == "indefinite" and v.method == "sampled"
    v = definiteness_on_S(np.array([[0.0, 1.0], [1.0, 0.0]]), Orthant([1, 1]))
    assert v.verdict in ("positive_semi", "strongly_positive")
    v = definiteness_on_S(np.array([[1.0, 0.0], [0.0, 0.0]]), FullSet(2))
    assert v.verdict == "positive_semi"


def test_definiteness_matches_eigen_oracle(rng):
    for i in range(100):
        A = rng.normal(size=(3, 3))
        L = A + A.T
        S = LinearSpan(rng.normal(size=(rng.integers(1, 4), 3)), 3)
        v = definiteness_on_S(L, S, seed=i)
        O = np.linalg.svd(S.O, full_matrices=False)[0]
        w = np.linalg.eigvalsh(O.T @ L @ O)
        if w.max() <= -1e-9:
            assert v.verdict == "strongly_negative"
        elif w.min() >= 1e-9:
            assert v.verdict == "strongly_positive"
        elif w.min() < -1e-9 and w.max() > 1e-9:
            assert v.verdict == "indefinite"


def test_definiteness_records_asymmetry():
    v = definiteness_on_S(np.array([[1.0, 0.5], [0.0, 1.0]]), FullSet(2))
    assert v.symmetry_defect == 0.5


@pytest.mark.parametrize("expr,set_text,expected", [
    ("-(x1^2 + x2^2)", "full", "strict_local_max"),
    ("x1^2 - x2^2", "full", "no_extremum"),
    ("x1^2 - x2^2", "linear:e1", "strict_local_min"),
    ("x1^2 + x2^2", "orthant:+-", "strict_local_min"),
    ("x1", "full", "first_order_violation"),
])
def test_classify_examples(expr, set_text, expected):
    v = classify_critical_point(E(expr, 2), [0, 0], parse_set(set_text, 2))
    assert v.verdict == expected
    assert v.cross_check_agrees


def test_classify_boundary_gradient_is_inconclusive():
    v = classify_critical_point(E("x1 + x2", 2), [0, 0], Orthant([1, 1]))
    assert v.verdict == "inconclusive"


def test_classify_scaling_invariance():
    for name in ("neg_quad", "saddle", "booth"):
        f = builtin_field(name)
        x = [1.0, 3.0] if name == "booth" else [0.0, 0.0]
        assert classify_critical_point(f, x, FullSet(2)).verdict == \
            classify_critical_point(f.scaled(3.5), x, FullSet(2)).verdict


def test_restriction_consistency():
    f = builtin_field("neg_quad")
    assert classify_critical_point(f, [0, 0], FullSet(2)).verdict == "strict_local_max"
    for S in (Orthant([1, -1]), Cone([1, 2]), LinearSpan([[1, 1]], 2)):
        assert necessary_condition(f, [0, 0], S).passed


def test_sufficient_condition_examples():
    v = sufficient_condition_quadratic(builtin_field("cubic_bump"), [0, 0], FullSet(2),
                                       -2 * np.eye(2))
    assert v.hypothesis_holds and v.verdict == "strict_local_max"
    assert v.slope == pytest.approx(3, abs=0.2)
    v = sufficient_condition_quadratic(builtin_field("neg_quad"), [0, 0], FullSet(2),
                                       -2 * np.eye(2))
    assert v.verdict == "strict_local_max"
    v = sufficient_condition_quadratic(builtin_field("saddle"), [0, 0], FullSet(2),
                                       np.diag([2.0, -2.0]))
    assert v.verdict == "no_extremum"
    np.testing.assert_allclose(np.abs(v.witnesses), [[1, 0], [0, 1]], atol=1e-12)


def test_sufficient_condition_rejects_wrong_form():
    v = sufficient_condition_quadratic(builtin_field("cubic_bump"), [0, 0], FullSet(2),
                                       -0.5 * np.eye(2))
    # a weaker form still bounds phi from above: -|h|^2 + |h|^3 <= -|h|^2/4 near 0
    assert v.hypothesis_holds and v.verdict == "strict_local_max"
    v = sufficient_condition_quadratic(E("-(x1^2 + x2^2) + abs(x1)^2.5", 2), [0, 0], FullSet(2),
                                       -4 * np.eye(2))
    assert not v.hypothesis_holds and v.verdict == "inconclusive"
    with pytest.raises(PreconditionError):
        sufficient_condition_quadratic(builtin_field("neg_quad"), [0, 0], FullSet(2), np.eye(2))
