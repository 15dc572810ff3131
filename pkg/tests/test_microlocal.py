import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpcircle.errors import EstimateFailure, SeparationError, UnsupportedInput
from rpcircle.microlocal import (
    build_escape,
    check_separation,
    conjugated_shift,
    default_eps,
    escape_derivative_check,
    hp_escape_log,
    mourre_symbol_check,
    smooth_step,
    smooth_step_derivative,
    weight_eval,
    write_field_csv,
)
from rpcircle.symbols import PrincipalSymbol
from rpcircle.trigpoly import TrigPoly

SIN = TrigPoly.sin(1)
ELL = TrigPoly([2.0], [1.0])


def even(a, m):
    return PrincipalSymbol.even(a, m)


def test_smooth_step_profile():
    t = np.linspace(-1, 2, 301)
    s = smooth_step(t)
    assert np.all(s[t <= 0] == 0) and np.all(s[t >= 1] == 1)
    assert np.all(np.diff(s) >= 0)
    h = 1e-6
    mid = np.linspace(0.05, 0.95, 19)
    fd = (smooth_step(mid + h) - smooth_step(mid - h)) / (2 * h)
    np.testing.assert_allclose(smooth_step_derivative(mid), fd, rtol=1e-6, atol=1e-9)


def test_escape_examples():
    e = build_escape(even(SIN, 2), eps=0.5, R=10)
    assert e(0.1, 100.0) == 1.0
    assert e(math.pi - 0.1, 100.0) == -1.0
    xs = np.linspace(0, 2 * np.pi, 50)
    assert np.all(e(xs, 5.0) == 0.0)
    # negative fiber: source at pi, sink at 0
    assert e(math.pi + 0.1, -100.0) == 1.0
    assert e(0.1, -100.0) == -1.0


@settings(max_examples=200)
@given(st.floats(0, 2 * math.pi), st.floats(-1e5, 1e5))
def test_escape_bounded_and_supported(x, xi):
    e = build_escape(even(SIN, 2), eps=0.5, R=10)
    v = e(x, xi)
    assert -1.0 <= v <= 1.0
    if abs(xi) <= 10:
        assert v == 0.0
    d0 = min(abs((x + math.pi) % (2 * math.pi) - math.pi), abs(x - math.pi))
    if d0 >= 0.5:
        assert v == 0.0


@settings(max_examples=60)
@given(st.floats(0, 2 * math.pi), st.floats(12.0, 30.0))
def test_escape_gradient_matches_finite_difference(x, xi):
    e = build_escape(even(SIN, 2), eps=0.5, R=10)
    ex, exi = e.gradient(x, xi)
    errs = []
    for h in (1e-4, 5e-5):
        fx = (e(x + h, xi) - e(x - h, xi)) / (2 * h)
        fxi = (e(x, xi + h) - e(x, xi - h)) / (2 * h)
        errs.append(abs(fx - ex) + abs(fxi - exi))
    assert errs[1] <= errs[0] / 3.0 + 1e-8


def test_default_eps_and_separation():
    assert default_eps(even(SIN, 2)) == pytest.approx(math.pi / 4)
    check_separation(even(SIN, 2), 0.5)
    with pytest.raises(SeparationError) as exc:
        check_separation(even(TrigPoly.sin(4), 2), 0.5)
    assert exc.value.pair is not None


@pytest.mark.parametrize("m", [1.0, 2.0])
def test_escape_estimate_constant(m):
    p = even(SIN, m)
    rep = escape_derivative_check(p, build_escape(p, eps=0.3, R=10))
    assert rep.constant >= 0.9
    assert rep.grid["n_x"] * rep.grid["n_xi"] >= 64 * 64
    assert rep.extra["compensation_inside_quarter_regions"] == 0


def test_estimate_constant_is_exact_grid_max():
    p = even(SIN, 2)
    e = build_escape(p, eps=0.3, R=10)
    rep = escape_derivative_check(p, e, n_x=16, n_xi=8)
    x, xi = rep.location
    assert hp_escape_log(p, e, x, xi) / (1 + xi**2) ** 0.5 == pytest.approx(rep.worst_ratio, rel=1e-12)


def test_hp_oracle_on_plateau():
    # on e == 1: H_p log<xi> = -a'(x) xi^m * xi/<xi>^2
    p = even(SIN, 2)
    e = build_escape(p, eps=0.3, R=10)
    x, xi = 0.05, 300.0
    assert hp_escape_log(p, e, x, xi) == pytest.approx(-math.cos(x) * xi**3 / (1 + xi**2), rel=1e-12)


def test_elliptic_is_vacuous():
    p = even(ELL, 2)
    rep = escape_derivative_check(p, build_escape(p))
    assert rep.vacuous and rep.constant is None


def test_estimate_failure_with_wrong_sign():
    # swapping sources and sinks flips the sign of H_p(e log<xi>)
    p = even(SIN, 2)
    e = build_escape(p, eps=0.3, R=10)
    e.sources, e.sinks = e.sinks, e.sources
    with pytest.raises(EstimateFailure) as exc:
        escape_derivative_check(p, e)
    assert exc.value.location is not None


def test_conjugated_shift_linear_in_t():
    p = even(SIN, 2)
    e = build_escape(p, eps=0.3, R=10)
    s0 = conjugated_shift(p, 0.0, e, n_x=16, n_xi=16)
    s1 = conjugated_shift(p, 1.0, e, n_x=16, n_xi=16)
    s2 = conjugated_shift(p, 2.0, e, n_x=16, n_xi=16)
    assert np.all(s0.values == 0.0)
    np.testing.assert_array_equal(s2.values, 2.0 * s1.values)
    assert s1.inner_bound_ok
    assert np.all(s1.values <= -0.9 * np.sqrt(1 + s1.xi**2))


@pytest.mark.parametrize("m, c_min", [(1.0, 0.9), (0.5, 0.4)])
def test_mourre_constant(m, c_min):
    rep = mourre_symbol_check(even(SIN, m), eps=0.3)
    assert rep.constant >= c_min


def test_mourre_preconditions():
    with pytest.raises(UnsupportedInput):
        mourre_symbol_check(even(ELL, 1.0))
    with pytest.raises(UnsupportedInput):
        mourre_symbol_check(even(SIN, 2.0))


def test_weight_eval_regions():
    p = even(SIN, 2)
    e = build_escape(p, eps=0.5, R=10)
    xi = 1000.0
    jap = math.sqrt(1 + xi**2)
    assert weight_eval(e, 1.0, 2.0, 2.0, xi) == pytest.approx(jap**0.5)
    assert weight_eval(e, 1.0, 2.0, 0.05, xi) == pytest.approx(jap**1.5)
    assert weight_eval(e, 1.0, 2.0, math.pi, xi) == pytest.approx(jap**-0.5)


def test_field_csv(tmp_path):
    p = even(SIN, 2)
    path = tmp_path / "field.csv"
    write_field_csv(path, p, build_escape(p), n_x=8, n_xi=4)
    rows = list(csv.reader(open(path)))
    assert len(rows) == 1 + 8 * 8
    assert len(rows[0]) == 4
