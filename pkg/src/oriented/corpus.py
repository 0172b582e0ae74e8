"""Builtin test fields with closed-form references.

Each field's ``reference`` dict may hold:

``gradient`` / ``hessian``
    callables of a point giving the classical derivatives,
``smoothness``
    ``"Cinf"``, ``"C1"`` or ``"C0"``,
``point``
    a representative evaluation point,
``oriented``
    list of ``{"set": <set spec>, "point": [...], "gradient": [...]}`` records
    for one-sided references.
"""

from functools import lru_cache

import numpy as np

from .fields import ScalarField


def _softmax(x):
    e = np.exp(x - np.max(x))
    return e / e.sum()


def _schwarz_counter(X):
    x, y = X[:, 0], X[:, 1]
    r2 = x * x + y * y
    out = np.zeros_like(x)
    nz = r2 > 0
    out[nz] = x[nz] * y[nz] * (x[nz] ** 2 - y[nz] ** 2) / r2[nz]
    return out


_A_QF = np.array([[2.0, 1.0], [1.0, 4.0]])
_A_EXPLIN = np.array([0.1, -0.2, 0.3, -0.1, 0.2])
_TRIDIAG6 = 2 * np.eye(6) + np.eye(6, k=1) + np.eye(6, k=-1)


def _cosprod_hess(x):
    a, b, c, d = x
    p, q = a * b, c * d
    H = np.zeros((4, 4))
    H[0, 0], H[1, 1] = -b * b * np.cos(p), -a * a * np.cos(p)
    H[0, 1] = H[1, 0] = -np.sin(p) - p * np.cos(p)
    H[2, 2], H[3, 3] = -d * d * np.sin(q), -c * c * np.sin(q)
    H[2, 3] = H[3, 2] = np.cos(q) - q * np.sin(q)
    return H


# name, dim, expression, gradient, hessian, smoothness, point, domain
_SPECS = [
    ("abs1d", 1, "abs(x1)", None, None, "C0", [0.0], None),
    ("quad", 3, "x1^2 + x2^2 + x3^2", lambda x: 2 * x, lambda x: 2 * np.eye(3), "Cinf",
     [1.0, 2.0, -0.5], None),
    ("saddle", 2, "x1^2 - x2^2", lambda x: np.array([2 * x[0], -2 * x[1]]),
     lambda x: np.diag([2.0, -2.0]), "Cinf", [1.0, 0.5], None),
    ("quad_form", 2, "x1^2 + x1*x2 + 2*x2^2", lambda x: _A_QF @ x, lambda x: _A_QF, "Cinf",
     [1.0, -1.0], None),
    ("rosenbrock", 2, "(1 - x1)^2 + 100*(x2 - x1^2)^2",
     lambda x: np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2),
                         200 * (x[1] - x[0] ** 2)]),
     lambda x: np.array([[2 - 400 * (x[1] - x[0] ** 2) + 800 * x[0] ** 2, -400 * x[0]],
                         [-400 * x[0], 200.0]]),
     "Cinf", [0.5, 0.8], None),
    ("exp_sum", 3, "exp(x1) + exp(x2) + exp(x3)", np.exp, lambda x: np.diag(np.exp(x)), "Cinf",
     [0.1, -0.3, 0.5], None),
    ("sin_cos", 2, "sin(x1)*cos(x2)",
     lambda x: np.array([np.cos(x[0]) * np.cos(x[1]), -np.sin(x[0]) * np.sin(x[1])]),
     lambda x: np.array([[-np.sin(x[0]) * np.cos(x[1]), -np.cos(x[0]) * np.sin(x[1])],
                         [-np.cos(x[0]) * np.sin(x[1]), -np.sin(x[0]) * np.cos(x[1])]]),
     "Cinf", [0.3, 0.7], None),
    ("logsumexp", 3, "log(exp(x1) + exp(x2) + exp(x3))", _softmax,
     lambda x: np.diag(_softmax(x)) - np.outer(_softmax(x), _softmax(x)), "Cinf",
     [0.2, -0.1, 0.4], None),
    ("cubic", 1, "x1^3", lambda x: 3 * x ** 2, lambda x: np.array([[6 * x[0]]]), "Cinf",
     [0.7], None),
    ("quartic", 4, "x1^4 + x2^4 + x3*x4 + x1*x2*x3",
     lambda x: np.array([4 * x[0] ** 3 + x[1] * x[2], 4 * x[1] ** 3 + x[0] * x[2],
                         x[3] + x[0] * x[1], x[2]]),
     lambda x: np.array([[12 * x[0] ** 2, x[2], x[1], 0.0],
                         [x[2], 12 * x[1] ** 2, x[0], 0.0],
                         [x[1], x[0], 0.0, 1.0],
                         [0.0, 0.0, 1.0, 0.0]]),
     "Cinf", [0.5, -0.4, 0.3, 0.2], None),
    ("gaussian", 2, "exp(-(x1^2 + x2^2))",
     lambda x: -2 * x * np.exp(-x @ x),
     lambda x: np.exp(-x @ x) * (4 * np.outer(x, x) - 2 * np.eye(2)), "Cinf", [0.3, -0.4], None),
    ("mixed", 2, "x1^2*x2", lambda x: np.array([2 * x[0] * x[1], x[0] ** 2]),
     lambda x: np.array([[2 * x[1], 2 * x[0]], [2 * x[0], 0.0]]), "Cinf", [1.0, 2.0], None),
    ("trig3", 3, "sin(x1 + 2*x2) + cos(x3)",
     lambda x: np.array([np.cos(x[0] + 2 * x[1]), 2 * np.cos(x[0] + 2 * x[1]), -np.sin(x[2])]),
     lambda x: np.array([[-1.0, -2.0, 0.0], [-2.0, -4.0, 0.0], [0.0, 0.0, 0.0]])
     * np.sin(x[0] + 2 * x[1]) + np.diag([0.0, 0.0, -np.cos(x[2])]),
     "Cinf", [0.1, 0.2, 0.3], None),
    ("rational", 2, "1/(1 + x1^2 + x2^2)",
     lambda x: -2 * x / (1 + x @ x) ** 2,
     lambda x: -2 * np.eye(2) / (1 + x @ x) ** 2 + 8 * np.outer(x, x) / (1 + x @ x) ** 3,
     "Cinf", [0.5, -0.5], None),
    ("softnorm", 2, "sqrt(1 + x1^2 + x2^2)",
     lambda x: x / np.sqrt(1 + x @ x),
     lambda x: np.eye(2) / np.sqrt(1 + x @ x) - np.outer(x, x) / (1 + x @ x) ** 1.5,
     "Cinf", [0.6, 0.8], None),
    ("chain6", 6,
     "x1^2 + x2^2 + x3^2 + x4^2 + x5^2 + x6^2 + x1*x2 + x2*x3 + x3*x4 + x4*x5 + x5*x6",
     lambda x: _TRIDIAG6 @ x, lambda x: _TRIDIAG6, "Cinf", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6], None),
    ("explin", 5, "exp(0.1*x1 - 0.2*x2 + 0.3*x3 - 0.1*x4 + 0.2*x5)",
     lambda x: _A_EXPLIN * np.exp(_A_EXPLIN @ x),
     lambda x: np.outer(_A_EXPLIN, _A_EXPLIN) * np.exp(_A_EXPLIN @ x), "Cinf",
     [0.5, 0.5, 0.5, 0.5, 0.5], None),
    ("himmelblau", 2, "(x1^2 + x2 - 11)^2 + (x1 + x2^2 - 7)^2",
     lambda x: np.array([4 * x[0] * (x[0] ** 2 + x[1] - 11) + 2 * (x[0] + x[1] ** 2 - 7),
                         2 * (x[0] ** 2 + x[1] - 11) + 4 * x[1] * (x[0] + x[1] ** 2 - 7)]),
     lambda x: np.array([[12 * x[0] ** 2 + 4 * x[1] - 42, 4 * x[0] + 4 * x[1]],
                         [4 * x[0] + 4 * x[1], 12 * x[1] ** 2 + 4 * x[0] - 26]]),
     "Cinf", [1.0, 1.0], None),
    ("booth", 2, "(x1 + 2*x2 - 7)^2 + (2*x1 + x2 - 5)^2",
     lambda x: np.array([2 * (x[0] + 2 * x[1] - 7) + 4 * (2 * x[0] + x[1] - 5),
                         4 * (x[0] + 2 * x[1] - 7) + 2 * (2 * x[0] + x[1] - 5)]),
     lambda x: np.array([[10.0, 8.0], [8.0, 10.0]]), "Cinf", [0.0, 0.0], None),
    ("log_barrier", 2, "log(x1) + log(x2)", lambda x: 1 / x, lambda x: np.diag(-1 / x ** 2),
     "Cinf", [1.0, 2.0], "min(x1, x2)"),
    ("cosprod", 4, "cos(x1*x2) + sin(x3*x4)",
     lambda x: np.array([-x[1] * np.sin(x[0] * x[1]), -x[0] * np.sin(x[0] * x[1]),
                         x[3] * np.cos(x[2] * x[3]), x[2] * np.cos(x[2] * x[3])]),
     _cosprod_hess, "Cinf", [0.5, 0.6, 0.7, 0.8], None),
    ("neg_quad", 2, "-(x1^2 + x2^2)", lambda x: -2 * x, lambda x: -2 * np.eye(2), "Cinf",
     [0.5, -0.2], None),
    ("xabsx", 1, "x1*abs(x1)", lambda x: 2 * np.abs(x), None, "C1", [-0.5], None),
    ("kink2d", 2, "abs(x1) + x2", None, None, "C0", [0.0, 0.0], None),
    ("cubic_bump", 2, "-(x1^2 + x2^2) + (x1^2 + x2^2)^1.5", None, None, "C2", [0.0, 0.0], None),
]

_ORIENTED_REFS = {
    "abs1d": [
        {"set": {"kind": "orthant", "signs": [1]}, "point": [0.0], "gradient": [1.0]},
        {"set": {"kind": "orthant", "signs": [-1]}, "point": [0.0], "gradient": [-1.0]},
    ],
    "kink2d": [
        {"set": {"kind": "halfspace", "normal": [1.0, 0.0]}, "point": [0.0, 0.0],
         "gradient": [1.0, 1.0]},
    ],
}


def _make(spec):
    name, dim, expr, grad, hess, smoothness, point, domain = spec
    ref = {"smoothness": smoothness, "point": point}
    if grad is not None:
        ref["gradient"] = grad
    if hess is not None:
        ref["hessian"] = hess
    if name in _ORIENTED_REFS:
        ref["oriented"] = _ORIENTED_REFS[name]
    return ScalarField.from_expression(expr, dim, domain=domain, label=name, reference=ref)


@lru_cache(maxsize=None)
def _corpus():
    fields = [_make(s) for s in _SPECS]
    fields.append(
        ScalarField.from_callable(
            _schwarz_counter, 2, label="schwarz_counter", vectorized=True,
            reference={"smoothness": "C1", "point": [0.0, 0.0],
                       "mixed_partials": {"d1d2": 1.0, "d2d1": -1.0}},
        )
    )
    return tuple(fields)


def builtin_corpus():
    """All builtin fields, in a fixed order."""
    return list(_corpus())


def builtin_field(name):
    for f in _corpus():
        if f.label == name:
            return f
    raise KeyError(f"unknown builtin field {name!r}")


def smooth_corpus():
    return [f for f in _corpus() if f.reference.get("smoothness") == "Cinf"]
