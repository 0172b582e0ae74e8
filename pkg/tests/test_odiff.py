import math

import numpy as np
import pytest

from oriented.corpus import builtin_field, smooth_corpus
from oriented.dirset import Cone, FullSet, HalfSpace, LinearSpan, Orthant, ZeroSet, parse_set
from oriented.errors import ConditioningError, DomainError, NonconvergenceError, PreconditionError
from oriented.fields import ScalarField, VectorField
from oriented.odiff import (
    StepSchedule,
    differentiability_diagnostic,
    directional_derivative_plus,
    extrapolate,
    higher_derivative,
    oriented_derivative_operator,
    oriented_gradient,
    oriented_gradient_via_projection,
    oriented_hessian,
    quadratic_model,
)
from oriented.span import SpanBasis

E = ScalarField.from_expression


def test_schedule_validation():
    with pytest.raises(ValueError):
        StepSchedule(levels=2)
    with pytest.raises(ValueError):
        StepSchedule(t0=0)
    np.testing.assert_allclose(StepSchedule().steps()[:3], [1e-2, 5e-3, 2.5e-3])


def test_extrapolation_cancels_polynomial_bias():
    t = 0.1 * 0.5 ** np.arange(6)
    vals = 3.0 + 2 * t - 5 * t ** 2
    est, err, best = extrapolate(t, vals, 2)
    assert est[best] == pytest.approx(3.0, abs=1e-13)


# --- one-sided directional derivative ----------------------------------------

def test_ddir_examples():
    a = E("abs(x1)", 1)
    assert directional_derivative_plus(a, [0], [1]).value == pytest.approx(1.0, abs=1e-14)
    assert directional_derivative_plus(a, [0], [-1]).value == pytest.approx(1.0, abs=1e-14)
    r = directional_derivative_plus(E("x1^2", 1), [1], [1])
    assert r.value == pytest.approx(2.0, abs=1e-8)
    assert r.order == pytest.approx(1.0, abs=0.05)


def test_ddir_errors():
    with pytest.raises(ValueError):
        directional_derivative_plus(E("x1", 1), [0], [0])
    f = E("sqrt(x1)", 1, domain="x1")
    with pytest.raises(DomainError):
        directional_derivative_plus(f, [0], [-1])
    with pytest.raises(NonconvergenceError) as info:
        directional_derivative_plus(E("sqrt(x1)", 1, domain="x1"), [0], [1])
    assert len(info.value.trace) == 10


def test_ddir_skips_levels_outside_domain():
    f = E("x1", 1, domain="0.004 - x1")
    r = directional_derivative_plus(f, [0], [1])
    assert r.skipped_levels == [0, 1]
    assert r.value == pytest.approx(1.0)


# --- gradients ----------------------------------------------------------------

def test_gradient_examples():
    r = oriented_gradient(E("x1^2 + x2^2", 2), [1, 2], FullSet(2))
    np.testing.assert_allclose(r.g, [2, 4], atol=1e-6)
    assert r.verdict == "differentiable_consistent"
    z = oriented_gradient(builtin_field("rosenbrock"), [0.3, 0.2], ZeroSet(2))
    assert np.array_equal(z.g, np.zeros(2))
    r = oriented_gradient(builtin_field("abs1d"), [0], Orthant([1]))
    assert r.g[0] == pytest.approx(1.0, abs=1e-8)
    assert r.verdict == "differentiable_consistent"
    r = oriented_gradient(builtin_field("abs1d"), [0], Orthant([-1]))
    assert r.g[0] == pytest.approx(-1.0, abs=1e-8)


def test_gradient_lies_in_v():
    r = oriented_gradient(builtin_field("trig3"), [0.1, 0.2, 0.3], Cone([1, 2, 0]))
    P = r.basis.P
    assert np.linalg.norm(P @ r.g - r.g) <= 1e-10 * (1 + np.linalg.norm(r.g))


@pytest.mark.parametrize("fld", smooth_corpus(), ids=lambda f: f.label)
def test_gradient_matches_analytic(fld):
    x = np.asarray(fld.reference["point"], dtype=float)
    ref = fld.reference["gradient"](x)
    g = oriented_gradient(fld, x, FullSet(fld.dim)).g
    assert np.linalg.norm(g - ref) <= 1e-6 * max(1.0, np.linalg.norm(ref))


@pytest.mark.parametrize("name", ["quad", "exp_sum", "logsumexp", "trig3"])
def test_restriction_monotonicity(name):
    fld = builtin_field(name)
    x = np.asarray(fld.reference["point"])
    full = oriented_gradient(fld, x, FullSet(3)).g
    for S in (Orthant([1, -1, 1]), LinearSpan([[1, 1, 0], [0, 0, 1]], 3), Cone([1, -1, 2])):
        r = oriented_gradient(fld, x, S)
        np.testing.assert_allclose(r.g, r.basis.P @ full, atol=1e-6)


def test_basis_invariance():
    fld = builtin_field("cosprod")
    x = np.asarray(fld.reference["point"])
    S = LinearSpan([[1, 0, 1, 0], [0, 1, 0, -1]], 4)
    r1 = oriented_gradient(fld, x, S)
    Q = np.array([[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]])
    r2 = oriented_gradient(fld, x, S, basis=SpanBasis.from_columns(r1.basis.O @ Q))
    np.testing.assert_allclose(r1.g, r2.g, atol=1e-8)


def test_ddir_equals_gradient_on_cones():
    fld = builtin_field("gaussian")
    x = np.asarray(fld.reference["point"])
    S = Orthant([1, -1])
    g = oriented_gradient(fld, x, S)
    assert g.verdict == "differentiable_consistent"
    for h in S.sample(2.0, 10, seed=3):
        d = directional_derivative_plus(fld, x, h).value
        assert abs(d - g.g @ h) <= 1e-5 * (1 + np.linalg.norm(h))


def test_interior_precondition():
    f = E("log(x1)", 1, domain="x1")
    with pytest.raises(PreconditionError):
        oriented_gradient(f, [0.0], FullSet(1))


def test_fit_samples_bound():
    with pytest.raises(ValueError):
        oriented_gradient(E("x1 + x2", 2), [0, 0], FullSet(2), fit_samples=3)


def test_conditioning_error():
    with pytest.raises(ConditioningError):
        oriented_gradient(E("x1 + x2", 2), [0, 0], FullSet(2), fit_samples=8,
                          basis=SpanBasis.from_columns(np.array([[1.0, 1.0], [0.0, 1e-12]])))


def test_seed_determinism():
    fld = builtin_field("himmelblau")
    a = oriented_gradient(fld, [1, 1], HalfSpace([1, 1]), seed=7)
    b = oriented_gradient(fld, [1, 1], HalfSpace([1, 1]), seed=7)
    assert np.array_equal(a.g, b.g) and a.remainders == b.remainders


def test_projection_characterisation():
    fld = builtin_field("quartic")
    x = np.asarray(fld.reference["point"])
    for S in (Orthant([1, 1, -1, 1]), HalfSpace([1, 0, 2, 0]), Cone([1, 2, 3, 4]), FullSet(4)):
        a = oriented_gradient(fld, x, S).g
        b = oriented_gradient_via_projection(fld, x, S).g
        np.testing.assert_allclose(a, b, atol=1e-5)


# --- operators ----------------------------------------------------------------

def test_operator_examples():
    phi = VectorField.from_expressions(["x1 + x2", "x1*x2"], 2)
    op = oriented_derivative_operator(phi, [1, 1], FullSet(2))
    np.testing.assert_allclose(op.ambient, [[1, 1], [1, 1]], atol=1e-6)
    A = np.array([[1.0, 2.0, 0.5], [-1.0, 0.0, 3.0]])
    S = LinearSpan([[1, 1, 0]], 3)
    op = oriented_derivative_operator(VectorField.linear(A), [0.2, 0.1, 0.3], S)
    np.testing.assert_allclose(op.ambient, A @ op.basis.P, atol=1e-8)
    assert op.matrix.shape == (2, 1)


def test_operator_scalar_matches_gradient():
    fld = builtin_field("sin_cos")
    x = fld.reference["point"]
    op = oriented_derivative_operator(fld, x, Orthant([1, 1]))
    np.testing.assert_allclose(op.ambient[0], oriented_gradient(fld, x, Orthant([1, 1])).g,
                               atol=1e-12)


# --- diagnostics --------------------------------------------------------------

def test_diagnostic_examples():
    k = builtin_field("kink2d")
    d = differentiability_diagnostic(k, [0, 0], FullSet(2))
    assert d.verdict == "inconsistent" and d.slope <= 1.1
    d = differentiability_diagnostic(k, [0, 0], HalfSpace([1, 0]))
    assert d.verdict == "differentiable_consistent" and d.slope >= 1.9
    d = differentiability_diagnostic(builtin_field("quad_form"), [1, -1], FullSet(2))
    assert d.slope == pytest.approx(2.0, abs=0.05)


def test_diagnostic_c1_field():
    d = differentiability_diagnostic(builtin_field("xabsx"), [0.0], FullSet(1))
    assert d.verdict == "differentiable_consistent"


# --- second and higher derivatives --------------------------------------------

def test_hessian_examples():
    h = oriented_hessian(builtin_field("quad_form"), [0.3, 0.1], FullSet(2))
    np.testing.assert_allclose(h.H, [[2, 1], [1, 4]], atol=1e-4)
    h = oriented_hessian(builtin_field("saddle"), [0, 0], ZeroSet(2))
    assert np.array_equal(h.H, np.zeros((2, 2)))
    h = oriented_hessian(builtin_field("saddle"), [0, 0], LinearSpan([[1, 0]], 2))
    np.testing.assert_allclose(h.H, [[2, 0], [0, 0]], atol=1e-8)


def test_hessian_needs_balanced():
    with pytest.raises(PreconditionError):
        oriented_hessian(builtin_field("saddle"), [0, 0], Orthant([1, 1]))


def test_hessian_projection_property():
    fld = builtin_field("cosprod")
    x = fld.reference["point"]
    h = oriented_hessian(fld, x, parse_set("linear:1,1,0,0;0,0,1,-1"))
    P = h.basis.P
    tol = 1e-8 * (1 + np.abs(h.H).max())
    assert np.abs(P @ h.H - h.H).max() <= tol and np.abs(h.H @ P - h.H).max() <= tol


def test_hessian_detects_unequal_mixed_partials():
    h = oriented_hessian(builtin_field("schwarz_counter"), [0, 0], FullSet(2))
    assert h.symmetry_defect > 1.0


def test_higher_derivative_examples():
    t = higher_derivative(E("x1^3", 1), [0], FullSet(1), 3)
    assert t.tensor[0, 0, 0] == pytest.approx(6, abs=1e-3)
    t = higher_derivative(builtin_field("quad_form"), [0.4, 0.2], FullSet(2), 3)
    assert np.abs(t.tensor).max() <= 1e-4
    fld = builtin_field("sin_cos")
    x = fld.reference["point"]
    np.testing.assert_allclose(higher_derivative(fld, x, FullSet(2), 2).tensor,
                               oriented_hessian(fld, x, FullSet(2)).coords, atol=1e-6)


def test_higher_derivative_symmetric_and_exact():
    fld = E("x1^2*x2^2 + x1*x2*x3", 3)
    t = higher_derivative(fld, [0.5, -0.5, 1.0], FullSet(3), 4)
    assert t.tensor[0, 0, 1, 1] == pytest.approx(4, abs=1e-4)
    assert t.tensor[0, 1, 0, 1] == t.tensor[1, 1, 0, 0]
    t3 = higher_derivative(fld, [0.5, -0.5, 1.0], FullSet(3), 3)
    assert t3.tensor[0, 1, 2] == pytest.approx(1, abs=1e-6)
    assert t3.apply([1, 0, 0], [0, 1, 0], [0, 0, 1]) == pytest.approx(1, abs=1e-6)
    with pytest.raises(ValueError):
        higher_derivative(fld, [0, 0, 0], FullSet(3), 5)


def test_quadratic_model_on_orthant():
    fld = builtin_field("quad_form")
    m = quadratic_model(fld, [0.0, 0.0], Orthant([1, -1]))
    np.testing.assert_allclose(m.H, [[2, 1], [1, 4]], atol=1e-6)
    np.testing.assert_allclose(m.g, [0, 0], atol=1e-8)
    m = quadratic_model(builtin_field("mixed"), [1.0, 2.0], Orthant([1, 1]))
    np.testing.assert_allclose(m.g, [4, 1], atol=1e-6)
    assert not math.isnan(m.error_estimate)
