import numpy as np
import pytest

from oriented.corpus import builtin_corpus, builtin_field, smooth_corpus
from oriented.errors import DomainError
from oriented.fields import (
    ScalarField,
    VectorField,
    compose,
    evaluate,
    load_field,
    product,
)

from conftest import central_gradient


def test_expression_field_values():
    f = ScalarField.from_expression("x1*x2", 2)
    assert f([2, 3]) == 6.0
    assert ScalarField.from_expression("relu(x1)", 1)([-2]) == 0.0


def test_domain_error_carries_point():
    f = ScalarField.from_expression("sqrt(x1)", 1, domain="x1")
    with pytest.raises(DomainError) as info:
        f([-1.0])
    assert info.value.point == [-1.0]


def test_eval_only_called_inside_domain():
    seen = []

    def func(X):
        seen.append(X.copy())
        return X[:, 0]

    f = ScalarField.from_callable(func, 1, domain=lambda x: x[0] > 0, vectorized=True)
    v, ok = f.eval_many(np.array([[-1.0], [2.0], [0.0]]))
    assert ok.tolist() == [False, True, False]
    assert np.all(np.concatenate(seen) > 0)
    assert v[1] == 2.0


def test_deterministic():
    f = builtin_field("rosenbrock")
    x = np.array([0.3, 0.7])
    assert evaluate(f, x) == evaluate(f, x)


def test_compose_and_product():
    inner = VectorField.from_expressions(["x1^2", "x2"], 2)
    outer = ScalarField.from_expression("x1 + x2", 2)
    assert compose(outer, inner)([2, 3]) == 7.0
    a = ScalarField.from_expression("x1", 2)
    b = ScalarField.from_expression("x2", 2)
    assert product(a, b)([2, 3]) == 6.0


def test_corpus_contents():
    names = [f.label for f in builtin_corpus()]
    assert len(names) == len(set(names))
    assert {"abs1d", "quad", "saddle"} <= set(names)
    assert builtin_field("abs1d").reference["oriented"][0]["gradient"] == [1.0]
    np.testing.assert_allclose(builtin_field("saddle").reference["hessian"](np.zeros(2)),
                               np.diag([2.0, -2.0]))
    with pytest.raises(KeyError):
        builtin_field("nope")


@pytest.mark.parametrize("fld", smooth_corpus(), ids=lambda f: f.label)
def test_corpus_reference_gradients(fld):
    x = np.asarray(fld.reference["point"], dtype=float)
    np.testing.assert_allclose(fld.reference["gradient"](x), central_gradient(fld, x),
                               rtol=1e-7, atol=1e-7)


def test_load_field_forms(tmp_path):
    assert load_field("quad").label == "quad"
    assert load_field({"builtin": "cubic"})([2.0]) == 8.0
    p = tmp_path / "f.json"
    p.write_text('{"dim": 2, "expr": "x1 - x2"}')
    assert load_field(str(p))([3, 1]) == 2.0
