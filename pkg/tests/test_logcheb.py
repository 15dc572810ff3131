import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpcircle.logcheb import LogCheb, LogGrid, cheb_diff_matrix, cheb_nodes, values_to_coeffs

GRID = LogGrid(1.0, 1e12, 128)
XS = np.geomspace(1.5, 1e11, 40)


def test_diff_matrix_exact_on_polynomials():
    x = cheb_nodes(12)
    D = cheb_diff_matrix(12)
    np.testing.assert_allclose(D @ x**5, 5 * x**4, atol=1e-11)
    np.testing.assert_allclose(D @ np.ones(12), 0.0, atol=1e-13)


def test_values_to_coeffs_recovers_chebyshev_series():
    c = np.array([1.0, -0.5, 0.25, 0.0, 0.125])
    x = cheb_nodes(9)
    v = np.polynomial.chebyshev.chebval(x, c)
    np.testing.assert_allclose(values_to_coeffs(v)[:5], c, atol=1e-14)
    np.testing.assert_allclose(values_to_coeffs(v)[5:], 0.0, atol=1e-14)


def test_grid_validation():
    with pytest.raises(ValueError):
        LogGrid(0.0, 10.0, 16)
    with pytest.raises(ValueError):
        LogGrid(1.0, 10.0, 4)


@settings(max_examples=30)
@given(st.floats(-3, 2), st.floats(-2, 2))
def test_power_and_regauge(gamma, g2):
    f = LogCheb.power(GRID, gamma, 2.0)
    np.testing.assert_allclose(f(XS), 2.0 * XS**gamma, rtol=1e-10)
    # regauging trades relative accuracy for accuracy relative to max |H|
    r = f.regauge(g2)
    H_interp = r(XS) * XS**-g2
    H_exact = 2.0 * XS ** (gamma - g2)
    assert np.max(np.abs(H_interp - H_exact)) <= 1e-10 * np.max(np.abs(r.h))


@settings(max_examples=30)
@given(st.floats(-3, 2), st.floats(-3, 2))
def test_algebra(g1, g2):
    f = LogCheb.from_function(GRID, g1, lambda x: x**g1 * (1 + 1 / x))
    g = LogCheb.power(GRID, g2, 1j)
    np.testing.assert_allclose((f * g)(XS), f(XS) * g(XS), rtol=1e-9)
    np.testing.assert_allclose((f + g)(XS), f(XS) + g(XS), rtol=1e-9, atol=1e-300)
    np.testing.assert_allclose((f - f)(XS), 0.0, atol=1e-300)


def test_derivative():
    f = LogCheb.from_function(GRID, -1.0, lambda x: 1 / x + 1 / x**2)
    want = -1 / XS**2 - 2 / XS**3
    np.testing.assert_allclose(f.d_xi()(XS), want, rtol=1e-10)


def test_tail_integral_exact_power():
    # int_xi^inf eta^-3 = xi^-2 / 2
    f = LogCheb.power(GRID, -3.0)
    np.testing.assert_allclose(f.tail_integral()(XS), XS**-2 / 2, rtol=1e-12)


def test_tail_integral_mixed():
    # int_xi^inf (eta^-2 + eta^-3) = 1/xi + 1/(2 xi^2)
    f = LogCheb.from_function(GRID, -2.0, lambda x: x**-2.0 + x**-3.0)
    W = f.tail_integral()
    np.testing.assert_allclose(W(XS), 1 / XS + 0.5 / XS**2, rtol=1e-10)


def test_tail_integral_oscillating_closed_form():
    # int_xi^inf eta^-2 e^{i/eta} d eta = (e^{i/xi} - 1) / i
    f = LogCheb.from_function(GRID, -2.0, lambda x: np.exp(1j / x) / x**2)
    W = f.tail_integral()
    u = 1 / XS
    exact = (-2 * np.sin(u / 2) ** 2 + 1j * np.sin(u)) / 1j  # cancellation-free e^{iu} - 1
    np.testing.assert_allclose(W(XS), exact, rtol=1e-10)


def test_tail_integral_requires_decay():
    with pytest.raises(ValueError):
        LogCheb.power(GRID, -1.0).tail_integral()


def test_integral_t():
    f = LogCheb.power(GRID, 0.0, 1.0)  # integrate 1 dt = log xi
    F = f.integral_t(0.0)
    np.testing.assert_allclose(F(XS), np.log(XS), rtol=1e-11)


def test_resolution_diagnostics():
    smooth = LogCheb.from_function(GRID, 0.0, lambda x: 1 / (1 + np.log(x) ** 2 / 100))
    assert smooth.resolution() < 1e-12
    rough = LogCheb.from_function(GRID, 0.0, lambda x: np.cos(3 * np.log(x)) ** 41)
    assert rough.resolution() > 1e-6
    assert LogCheb.zero(GRID).is_zero() and LogCheb.zero(GRID).resolution() == 0.0
