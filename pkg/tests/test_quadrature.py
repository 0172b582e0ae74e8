import numpy as np
import pytest

from oriented.quadrature import Quadrature, integrate


def test_gauss_exact_on_polynomials():
    r = integrate(lambda t: t ** 7 - 3 * t ** 2, Quadrature(nodes=4, refine=False))
    assert float(r.value) == pytest.approx(1 / 8 - 1, abs=1e-14)


def test_vector_valued():
    r = integrate(lambda t: np.stack([np.sin(t), np.cos(t)], axis=1))
    np.testing.assert_allclose(r.value, [1 - np.cos(1), np.sin(1)], atol=1e-14)


def test_kink_falls_back_to_simpson():
    r = integrate(lambda t: np.abs(t - 0.3))
    assert r.rule == "composite_simpson"
    assert float(r.value) == pytest.approx(0.3 ** 2 / 2 + 0.7 ** 2 / 2, abs=1e-7)


def test_smooth_stays_gauss():
    r = integrate(np.exp)
    assert r.rule == "gauss_legendre"
    assert float(r.value) == pytest.approx(np.e - 1, abs=1e-14)


def test_simpson_rule():
    r = integrate(lambda t: t ** 3, Quadrature(rule="composite_simpson", nodes=8))
    assert float(r.value) == pytest.approx(0.25, abs=1e-12)


def test_validation():
    with pytest.raises(ValueError):
        Quadrature(nodes=2)
    with pytest.raises(ValueError):
        Quadrature(rule="trapezoid")
