import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from rydberg_eit.bessel import bessel, jv, jv_zeros, y0, y1

J01 = 2.404825557695773


def _envelope(nu, x):
    return np.hypot(sp.jv(nu, x), sp.yv(nu, x))


@pytest.mark.parametrize("nu", [-2, -1.5, -1, -0.5, -1 / 3, -0.1, 0, 0.1, 1 / 3, 0.5, 0.9, 1, 1.5, 2])
def test_jv_against_scipy(nu):
    x = np.concatenate([np.linspace(1e-3, 50, 5001), [5.0, 5.0 + 1e-9, 20.0 - 1e-9, 20.0]])
    got, ref = jv(nu, x), sp.jv(nu, x)
    # relative accuracy measured against the local amplitude sqrt(J^2 + Y^2)
    assert np.max(np.abs(got - ref) / _envelope(nu, x)) < 1e-12
    away = np.abs(ref) > 1e-2
    assert np.max(np.abs(got - ref)[away] / np.abs(ref)[away]) < 1e-12


def test_y_against_scipy():
    x = np.linspace(1e-3, 50, 5001)
    assert np.max(np.abs(y0(x) - sp.y0(x)) / _envelope(0, x)) < 1e-12
    assert np.max(np.abs(y1(x) - sp.y1(x)) / _envelope(1, x)) < 1e-12


def test_special_values():
    assert abs(jv(0, J01)) < 1e-12
    assert jv(1, 0.0) == 0.0
    assert jv(0, 0.0) == 1.0
    assert jv(-0.5, 1.0) == pytest.approx(math.sqrt(2 / math.pi) * math.cos(1.0), rel=1e-14)
    assert jv(0.5, 3.0) == pytest.approx(math.sqrt(2 / (3 * math.pi)) * math.sin(3.0), rel=1e-13)


def test_domain_errors():
    with pytest.raises(ValueError):
        y1(0.0)
    with pytest.raises(ValueError):
        jv(0.0, -1.0)
    with pytest.raises(ValueError):
        jv(2.5, 1.0)
    with pytest.raises(ValueError):
        bessel("Y", 2, 1.0)
    assert bessel("J", 1, 2.0) == jv(1, 2.0)
    assert bessel("Y", 1, 2.0) == y1(2.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1.95, 1.95), st.floats(0.5, 45))
def test_random_points_match_scipy(nu, x):
    # random (order, argument) pairs across all three evaluation regimes
    a, b, c = jv(nu - 0.05, x), jv(nu, x), jv(nu + 0.05, x)
    assert np.isfinite([a, b, c]).all()
    ref = sp.jv(nu, x)
    assert abs(b - ref) <= 1e-12 * max(1.0, float(_envelope(nu, x)))


@pytest.mark.parametrize("nu", [0, 1, -0.5, -1 / 3, -0.1, 0.5, 2])
def test_zeros(nu):
    z = jv_zeros(nu, 40)
    assert np.all(np.diff(z) > 0)
    assert np.max(np.abs(jv(nu, z))) < 1e-10
    if float(nu).is_integer():
        assert np.allclose(z, sp.jn_zeros(int(nu), 40), rtol=0, atol=1e-11)


def test_many_zeros_half_order():
    z = jv_zeros(-0.5, 10000)
    assert np.max(np.abs(z - (np.arange(1, 10001) - 0.5) * math.pi)) < 1e-9
