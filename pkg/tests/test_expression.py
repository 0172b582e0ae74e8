import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oriented.errors import ExpressionSyntaxError
from oriented.expression import (
    BinOp,
    Call,
    Neg,
    Num,
    Var,
    compile_expression,
    format_expression,
    max_variable,
    parse_expression,
)

DIM = 3


def ev(text, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v, ok = compile_expression(parse_expression(text, x.shape[1]))(x)
    return v[0], ok[0]


@pytest.mark.parametrize("text,x,expected", [
    ("x1^2 + x2^2", [1, 2], 5.0),
    ("abs(x1)", [-3], 3.0),
    ("x1*x2", [2, 3], 6.0),
    ("relu(x1)", [-2], 0.0),
    ("-x1^2", [3], -9.0),
    ("2^3^2", [0], 512.0),
    ("max(x1, x2) - min(x1, x2)", [1, 4], 3.0),
    ("x1 - x2 - 1", [5, 1], 3.0),
    ("x1 / x2 / 2", [8, 2], 2.0),
])
def test_evaluation(text, x, expected):
    v, ok = ev(text, x)
    assert ok
    assert v == pytest.approx(expected)


def test_syntax_error_offset():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression("x1 +", 1)
    assert info.value.position == 4
    assert "offset 4" in str(info.value)


@pytest.mark.parametrize("text", ["x3", "foo(x1)", "x1 x2", "(x1", "x0", "max(x1)", "1.2.3"])
def test_rejects(text):
    with pytest.raises(ExpressionSyntaxError):
        parse_expression(text, 2)


@pytest.mark.parametrize("text,x", [
    ("sqrt(x1)", [-1]), ("log(x1)", [0]), ("1/x1", [0]), ("x1^0.5", [-2]), ("x1^-1", [0]),
])
def test_non_total_operations_flag_invalid(text, x):
    _, ok = ev(text, x)
    assert not ok


def test_max_variable():
    assert max_variable(parse_expression("x1 + sin(x3)", 3)) == 3


# --- round trip -------------------------------------------------------------

nums = st.floats(min_value=0, max_value=1e6, allow_nan=False).map(lambda v: Num(float(v)))
leaves = st.one_of(nums, st.integers(1, DIM).map(Var))


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(["abs", "sqrt", "exp", "log", "sin", "cos", "relu"]),
                  children).map(lambda t: Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(["max", "min"]), children, children).map(
            lambda t: Call(t[0], (t[1], t[2]))),
    )


asts = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(asts)
def test_parse_print_parse_is_identity(ast):
    text = format_expression(ast)
    assert parse_expression(text, DIM) == ast
    assert format_expression(parse_expression(text, DIM)) == text


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-9, 9), min_size=1, max_size=8),
       st.floats(min_value=-2, max_value=2, allow_nan=False))
def test_polynomial_matches_horner(coeffs, x):
    text = " + ".join(f"{c}*x1^{k}" if c >= 0 else f"-{-c}*x1^{k}" for k, c in enumerate(coeffs))
    v, ok = ev(text, [x])
    assert ok
    horner = 0.0
    for c in reversed(coeffs):
        horner = horner * x + c
    scale = sum(abs(c) * abs(x) ** k for k, c in enumerate(coeffs))
    assert abs(v - horner) <= 1e-14 * max(scale, 1.0) * len(coeffs)
