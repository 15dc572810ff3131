import math

import numpy as np
import pytest
import sympy as sp

from rpcircle.errors import (
    InconclusiveFit,
    KappaError,
    NotCharacteristic,
    NotPrincipalType,
    PreconditionError,
    ResolutionError,
)
from rpcircle.spectral import ToroidalOperator, assemble
from rpcircle.symbols import LowerOrderSymbol, PrincipalSymbol
from rpcircle.trigpoly import TrigPoly
from rpcircle.wkb import (
    PlateauCutoff,
    WkbState,
    build_amplitude,
    local_data,
    pointwise_convergence,
    residual_order,
    sample_grid,
    sobolev_trend,
    solve_b0,
    solve_bk,
    synthesize,
)

SIN = TrigPoly.sin(1)
COS = TrigPoly([0.0, 1.0])


@pytest.fixture(scope="module")
def op():
    return ToroidalOperator.from_divergence(SIN)


@pytest.fixture(scope="module")
def amp_z0(op):
    return build_amplitude(local_data(op, math.pi, 0.0, N=2))


@pytest.fixture(scope="module")
def state_z0(amp_z0):
    return synthesize(amp_z0, None, N_syn=4096)


def test_local_taylor_data_against_sympy(op):
    loc = local_data(op, math.pi, 0.0, N=3)
    x = sp.Symbol("x")
    # a_+ = -sin x for d/dx(sin x d/dx); expand at pi
    series = sp.series(-sp.sin(x + sp.pi), x, 0, 6).removeO()
    exact = [float(series.coeff(x, k)) for k in range(6)]
    np.testing.assert_allclose(loc.taylor_a, exact[: loc.taylor_a.size], atol=1e-15)
    assert loc.a_prime == pytest.approx(1.0, abs=1e-15)


def test_c_vanishes_and_b0_is_inverse_xi(op, amp_z0):
    loc = amp_z0.local
    assert np.abs(loc.c_profile).max() == 0.0
    xs = amp_z0.xi_grid
    assert xs[0] == 2.0 and xs[-1] == pytest.approx(1e4) and xs.size == 2048
    np.testing.assert_allclose(amp_z0.b_levels[0], 1.0 / xs, rtol=1e-14)
    # f_1 vanishes at z = 0 and the next level is at roundoff
    assert np.abs(amp_z0.b_levels[1]).max() < 1e-25
    for chk in amp_z0.checks:
        assert chk.transport_residual < 1e-6
    assert amp_z0.checks[0].fd_residual < 1e-6


def test_b0_closed_form_at_z_i(op):
    amp = build_amplitude(local_data(op, math.pi, 1j, N=2))
    xs = amp.xi_grid
    # c = -i so Phi = int_1^xi -i eta^-2 = i (1/xi - 1)
    exact = np.exp(1.0 - 1.0 / xs) / xs
    np.testing.assert_allclose(amp.b_levels[0], exact, rtol=1e-12)
    for chk in amp.checks:
        assert chk.order_fit <= -1.0 - chk.level + 0.1
        assert chk.transport_residual < 1e-6


def test_lower_order_potential_example():
    V = LowerOrderSymbol.from_trig(COS, 1.0, 1.0)
    opv = ToroidalOperator.from_divergence(SIN, V=V)
    loc = local_data(opv, math.pi, 0.0, N=2)
    xs = sample_grid()
    sel = xs >= 10.0
    bracket = np.sqrt(1.0 + xs**2)
    # symmetrizing the potential shifts c by O(xi^-2)
    assert np.max(np.abs(loc.c_profile[sel] + bracket[sel]) / xs[sel]) < 1e-4
    amp = build_amplitude(loc)
    b0 = amp.b_levels[0]
    np.testing.assert_allclose(np.abs(b0), 1.0 / xs, rtol=1e-12)
    # quadrature oracle: int eta^-2 (-<eta>) = -(asinh eta - <eta>/eta)
    oracle = -(np.arcsinh(xs) - bracket / xs)
    drift = np.unwrap(np.angle(b0 * np.exp(-1j * oracle)))[sel]
    assert np.ptp(drift) < 1e-4
    slope = np.polyfit(np.log(xs[xs > 100]), np.unwrap(np.angle(b0))[xs > 100], 1)[0]
    assert slope == pytest.approx(-1.0, abs=1e-3)


def test_local_data_errors(op):
    with pytest.raises(NotPrincipalType):
        local_data(ToroidalOperator.from_divergence(TrigPoly([2.0], [1.0])), 0.0)
    with pytest.raises(NotCharacteristic):
        local_data(op, 1.0)
    with pytest.raises(KappaError):
        local_data(op, math.pi, kappa=1.5)
    with pytest.raises(KappaError):
        local_data(op, math.pi, kappa=0.0)
    with pytest.raises(PreconditionError):
        local_data(op, math.pi, N=5)
    with pytest.raises(PreconditionError):
        local_data(op, 0.0)  # a sink for the positive fiber
    m1 = ToroidalOperator.from_symbol(PrincipalSymbol.even(SIN, 1.0))
    with pytest.raises(PreconditionError):
        local_data(m1, 0.0, z=1j)


def test_solve_bk_order(op, amp_z0):
    with pytest.raises(PreconditionError):
        solve_bk(amp_z0.local, solve_b0(amp_z0.local), 2)


def test_synthesis_support_and_one_sidedness(amp_z0, state_z0):
    n, u = state_z0.n, state_z0.fourier_coeffs
    assert np.all(u[n <= 1] == 0)
    k = np.arange(2, 50)
    np.testing.assert_allclose(u[k + 4096], np.exp(-1j * k * math.pi) / k, rtol=1e-13)
    assert state_z0.negative_mass() == 0.0
    cut = synthesize(amp_z0, PlateauCutoff(math.pi, 1.0), N_syn=4096)
    # the cutoff smears mass onto |n| ~ 1/eps only; the far negative tail is rapid-decay
    assert cut.negative_mass(tail_from=1024) < 1e-8
    assert cut.negative_mass(tail_from=1024) < cut.negative_mass(tail_from=256) < cut.negative_mass(tail_from=64)
    with pytest.raises(ResolutionError):
        synthesize(amp_z0, None, N_syn=32)


def test_sobolev_threshold(state_z0):
    below = sobolev_trend(state_z0, 0.4)
    at = sobolev_trend(state_z0, 0.5)
    assert below.summable and below.exponent == pytest.approx(-1.2, abs=0.05)
    assert not at.summable and at.exponent == pytest.approx(-1.0, abs=0.05)
    # partial sums at s = 1/2 grow by ~log 2 per doubling
    growth = np.diff([v for _, v in at.partial_sums])
    np.testing.assert_allclose(growth, math.log(2.0), rtol=0.02)


def test_decay_law(state_z0):
    k = np.arange(400, 4097)
    slope = np.polyfit(np.log(k), np.log(np.abs(state_z0.fourier_coeffs[k + 4096])), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_pointwise_convergence_away_from_source(amp_z0):
    st = synthesize(amp_z0, PlateauCutoff(math.pi, 1.0), N_syn=4096)
    rep = pointwise_convergence(st, 0.0)
    assert rep.errors[-2] < 1e-12
    # super-algebraic: local slopes get steeper than any fixed power tested
    assert min(rep.slopes[:3]) < -8.0


def test_residual_z0_is_exact(op, amp_z0):
    st = synthesize(amp_z0, None, N_syn=128, depth=0)
    rep = residual_order(op, 0.0, st, N=0)
    assert rep.fitted_exponent <= -2.0 + 0.3
    assert rep.consistent and rep.roundoff_fraction > 0.5


def test_residual_improves_with_depth_at_z_i(op):
    amp = build_amplitude(local_data(op, math.pi, 1j, N=2))
    fits = {}
    for N in (0, 2):
        st = synthesize(amp, None, N_syn=128, depth=N)
        rep = residual_order(op, 1j, st, N=N)
        assert rep.consistent and rep.r_squared > 0.99
        assert rep.predicted_exponent == 1.0 - (N + 2)
        assert rep.sobolev_index == -2.0 + (N + 1)
        fits[N] = rep.fitted_exponent
    assert fits[0] - fits[2] == pytest.approx(2.0, abs=0.3)


def test_residual_of_smooth_elliptic_eigenvector():
    op = ToroidalOperator.from_divergence(TrigPoly([2.0], [1.0]))
    M = assemble(op, 64)
    w, v = np.linalg.eigh(M.entries)
    i = int(np.argmax(w))
    state = WkbState.from_coefficients({k: v[k + 64, i] for k in range(-64, 65)}, 128)
    try:
        rep = residual_order(op, w[i], state, N=0, m=2.0)
    except InconclusiveFit as exc:
        rep = exc.report
    assert rep.max_abs < 1e-8


def test_amplitude_csv(tmp_path, amp_z0):
    path = tmp_path / "amp.csv"
    amp_z0.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "xi,re_b0,im_b0,re_b1,im_b1,re_b2,im_b2"
    assert len(lines) == 2049
    xi, re0 = map(float, lines[1].split(",")[:2])
    assert re0 == pytest.approx(1.0 / xi, rel=1e-15)
