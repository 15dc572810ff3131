import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rpcircle.errors import NotCharacteristic, NotPrincipalType, OrderOverflow, UnsupportedOrder
from rpcircle.symbols import (
    Completeness,
    EsaVerdict,
    LowerOrderSymbol,
    LowerOrderTerm,
    PrincipalSymbol,
    analytic_completeness,
    characteristic_order,
    classify_esa,
    describe,
    is_real_principal_type,
    radial_sets,
    zero_sets,
)
from rpcircle.trigpoly import DERIVATIVE_FLOOR, TrigPoly, find_zeros

SIN = TrigPoly.sin(1)
SIN2 = SIN * SIN
SIN3 = SIN2 * SIN
ELL = TrigPoly([2.0], [1.0])


def even(a, m):
    return PrincipalSymbol.even(a, m)


def test_evaluation_by_fiber_sign():
    p = PrincipalSymbol(2.0, SIN, ELL)
    assert p(1.0, 3.0) == pytest.approx(math.sin(1.0) * 9)
    assert p(1.0, -3.0) == pytest.approx((2 + math.sin(1.0)) * 9)
    assert p(1.0, 0.0) == 0.0


@settings(max_examples=100)
@given(
    st.floats(0, 2 * math.pi),
    st.floats(0.01, 100),
    st.floats(0.01, 100),
    st.sampled_from([-1.0, 1.0]),
    st.sampled_from([0.5, 1.0, 1.5, 2.0, 3.0]),
)
def test_homogeneity(x, xi, lam, sign, m):
    xi *= sign
    p = PrincipalSymbol(m, SIN + TrigPoly.cos(2, 0.3), ELL)
    lhs = p(x, lam * xi)
    rhs = lam**m * p(x, xi)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(rhs))


def test_order_must_be_positive():
    with pytest.raises(UnsupportedOrder):
        PrincipalSymbol(0.0, SIN, SIN)


def test_principal_type_examples():
    assert is_real_principal_type(even(SIN, 2)) == (True, None)
    ok, w = is_real_principal_type(even(SIN2, 2))
    assert not ok and w == pytest.approx(0.0, abs=1e-9)
    assert is_real_principal_type(even(ELL, 2)) == (True, None)


def test_zero_sets_examples():
    z = zero_sets(even(SIN, 2))
    assert z.z_plus == pytest.approx([0, math.pi], abs=1e-12)
    assert z.z_pp == pytest.approx([0], abs=1e-12) and z.z_pm == pytest.approx([math.pi])
    z = zero_sets(even(ELL, 2))
    assert not any([z.z_plus, z.z_minus, z.z_pp, z.z_pm, z.z_mp, z.z_mm])
    z = zero_sets(even(TrigPoly.sin(2), 2))
    assert len(z.z_pp) == len(z.z_pm) == 2
    with pytest.raises(NotPrincipalType):
        zero_sets(even(SIN2, 2))


@st.composite
def simple_root_polys(draw):
    c = draw(st.lists(st.floats(-2, 2), min_size=1, max_size=7))
    s = draw(st.lists(st.floats(-2, 2), min_size=0, max_size=6))
    a = TrigPoly(c, s)
    assume(not a.is_zero())
    return a


@settings(max_examples=60, deadline=None)
@given(simple_root_polys(), simple_root_polys())
def test_balance(ap, am):
    p = PrincipalSymbol(2.0, ap, am)
    ok, _ = is_real_principal_type(p)
    # keep only symbols whose roots are comfortably simple
    assume(ok)
    assume(all(abs(d) > 1e-4 for a in (ap, am) for _, d in find_zeros(a)))
    z = zero_sets(p)
    assert z.balanced()
    for x in z.z_plus:
        assert abs(ap(x)) < 1e-10 and abs(ap.derivative()(x)) > DERIVATIVE_FLOOR


def test_characteristic_orders():
    assert characteristic_order(even(SIN, 2), 0.0, 1) == 1
    assert characteristic_order(even(SIN2, 2), 0.0, 1) == 2
    assert characteristic_order(even(SIN3, 2), 0.0, 1) == 3
    with pytest.raises(NotCharacteristic):
        characteristic_order(even(SIN, 2), 1.0, 1)
    with pytest.raises(OrderOverflow):
        characteristic_order(even(SIN2, 2), 0.0, 1, k_max=1)


def test_radial_sets():
    r = radial_sets(even(SIN, 2))
    assert r["source"] == [(0.0, 1), (pytest.approx(math.pi), -1)]
    assert r["sink"] == [(pytest.approx(math.pi), 1), (0.0, -1)]
    assert radial_sets(even(ELL, 2)) == {"source": [], "sink": []}
    r = radial_sets(even(TrigPoly.sin(2), 2))
    assert len(r["source"]) == len(r["sink"]) == 4


@pytest.mark.parametrize(
    "a, m, verdict, branch",
    [
        (SIN, 2.0, EsaVerdict.NOT_ESA, "non_elliptic_high_order"),
        (ELL, 2.0, EsaVerdict.ESA, "elliptic"),
        (SIN, 1.0, EsaVerdict.ESA, "order"),
        (SIN, 0.5, EsaVerdict.ESA, "order"),
        (TrigPoly.sin(2), 3.0, EsaVerdict.NOT_ESA, "non_elliptic_high_order"),
    ],
)
def test_classify_esa(a, m, verdict, branch):
    rep = classify_esa(even(a, m))
    assert rep.esa_verdict is verdict and rep.branch == branch
    want = Completeness.COMPLETE if verdict is EsaVerdict.ESA else Completeness.INCOMPLETE
    assert rep.completeness_verdict is want


def test_classify_rejects_degenerate_symbol():
    with pytest.raises(NotPrincipalType) as exc:
        classify_esa(even(SIN2, 2))
    assert exc.value.witness == pytest.approx(0.0, abs=1e-9)


def test_describe_non_principal_type_annotates_order():
    rep = describe(even(SIN2, 2))
    assert not rep.is_principal_type and rep.esa_verdict is None
    assert set(rep.char_orders.values()) == {2}
    assert rep.completeness_verdict is Completeness.COMPLETE
    assert describe(even(SIN2, 3)).completeness_verdict is Completeness.INCOMPLETE


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("m", [0.5, 1.0, 1.5, 2.0, 3.0])
def test_analytic_completeness_rule(k, m):
    verdict, orders, _ = analytic_completeness(even(SIN ** k, m))
    assert set(orders.values()) == {k}
    assert (verdict is Completeness.COMPLETE) == (m <= k)


def test_lower_order_symbol_order_check():
    V = LowerOrderSymbol(1.0, (LowerOrderTerm(1, 1.0, 0.5),))
    V.check_order(2.0)
    with pytest.raises(ValueError):
        V.check_order(1.5)
    with pytest.raises(ValueError):
        LowerOrderSymbol(1.5)
    with pytest.raises(ValueError):
        classify_esa(even(SIN, 1.5), V)


def test_lower_order_from_trig_evaluates():
    V = LowerOrderSymbol.from_trig(TrigPoly.cos(1), 1.0, 1.0)
    x, xi = 0.3, 4.0
    assert V(x, xi) == pytest.approx(math.cos(x) * math.sqrt(1 + xi**2))


def test_near_threshold_flag():
    # a'(0) = 5e-8 sits within 10x of the derivative floor
    a = TrigPoly([0.0], [5e-8])
    rep = classify_esa(even(a, 2))
    assert rep.near_threshold
