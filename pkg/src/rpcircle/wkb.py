"""Conormal quasimodes concentrated at a radial source.

Near a source x0 (a_+(x0) = 0, a_+'(x0) > 0) the ansatz
u(x) = sum_n b(n) e^{in(x - x0)} with a one-sided symbol b ~ b_0 + b_1 + ...
turns (A - z)u = 0 into a hierarchy of first-order ODEs in xi (transport
equations).  Every level shares the oscillating factor e^{i Phi(xi)} of b_0,
so levels are stored phase-free as :class:`LogCheb` objects and the
xi-derivative acts as D_Phi = d/dxi + i Phi'(xi).

Taylor data come from the exact toroidal symbol of the operator, the same
one the matrix in :mod:`spectral` realizes; residuals of the synthesized
series are therefore measured with the very operator the ansatz solves.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import (
    InconclusiveFit,
    KappaError,
    NotCharacteristic,
    NotPrincipalType,
    OrderViolation,
    PreconditionError,
    ResolutionError,
)
from .logcheb import LogCheb, LogGrid
from .microlocal import smooth_step
from .spectral import ToroidalOperator, fit_tail
from .trigpoly import DERIVATIVE_FLOOR, ROOT_TOL, TWO_PI

SAMPLE_XI_MIN = 2.0
SAMPLE_XI_MAX = 1e4
SAMPLE_NODES = 2048
CHEB_XI_MAX = 1e12
CHEB_NODES = 256
MAX_DEPTH = 4
MIN_SYNTHESIS = 64
ORDER_SLACK = 0.1
TRANSPORT_TOL = 1e-6
ZERO_LEVEL = 1e-13
ROUNDOFF_FACTOR = 64.0 * np.finfo(float).eps


def sample_grid() -> np.ndarray:
    """Log-spaced sampling grid for reported amplitudes."""
    return np.geomspace(SAMPLE_XI_MIN, SAMPLE_XI_MAX, SAMPLE_NODES)


def _fit_power(xi: np.ndarray, vals: np.ndarray, floor: np.ndarray | float = 0.0) -> float:
    """Least-squares exponent of |vals| in xi; -inf when everything is below ``floor``."""
    mag = np.abs(vals)
    ok = mag > floor
    if ok.sum() < 3:
        return -math.inf
    return float(np.polyfit(np.log(xi[ok]), np.log(mag[ok]), 1)[0])


@dataclass
class LocalData:
    """Taylor data of the operator at a source, in coordinates centered there.

    ``sigma[alpha]`` is the alpha-th x-Taylor coefficient of the full symbol
    minus its principal part, minus z (alpha = 0); it is the sum of
    ``s_alpha`` (quantization/subprincipal part) and ``V_alpha``.
    """

    op: ToroidalOperator
    x0: float
    fiber_sign: int
    x_local: float
    a_prime: float
    taylor_a: np.ndarray
    s_alpha: list
    V_alpha: list
    sigma: list
    c: LogCheb
    phase_rate: LogCheb
    z: complex
    m: float
    kappa: float
    depth: int
    grid: LogGrid
    xi_min: float
    im_c_exponent: float

    @property
    def xi_grid(self) -> np.ndarray:
        return sample_grid()

    @property
    def c_profile(self) -> np.ndarray:
        return self.c(self.xi_grid)

    def to_dict(self) -> dict:
        return {
            "x0": self.x0,
            "fiber_sign": self.fiber_sign,
            "a_prime": self.a_prime,
            "taylor_a": [float(v) for v in self.taylor_a],
            "z": [self.z.real, self.z.imag],
            "m": self.m,
            "kappa": self.kappa,
            "depth": self.depth,
            "im_c_exponent": self.im_c_exponent,
        }


def _taylor_profiles(op: ToroidalOperator, x: float, order: int, grid: LogGrid, gamma: float):
    """x-Taylor coefficients at x of the non-principal symbol of ``op`` as LogCheb objects."""
    xi = grid.xi
    if op.divergence is not None and op.V is None:
        # i*scale*a'(x)*xi (+ drift*xi): real Taylor data keep cancellations exact
        da = op.divergence.a.derivative().taylor(x, order)
        out = []
        for alpha in range(order + 1):
            # stored directly as H = (...) xi^{1-gamma}; xi**0 is exactly 1
            h = 1j * op.divergence.scale * da[alpha] * xi ** (1.0 - gamma)
            if alpha == 0 and op.drift:
                h = h + op.drift * xi ** (1.0 - gamma)
            out.append(LogCheb(grid, gamma, h))
        return out
    b = op.band_width
    hats = {d: op.lower_order_fourier(d, xi) for d in range(-b, b + 1)}
    out = []
    for alpha in range(order + 1):
        acc = np.zeros(xi.shape, dtype=complex)
        for d, h in hats.items():
            if d == 0 and alpha > 0:
                continue
            acc += h * np.exp(1j * d * x) * (1j * d) ** alpha
        acc /= math.factorial(alpha)
        out.append(LogCheb(grid, gamma, acc * xi ** (-gamma)))
    return out


def local_data(op: ToroidalOperator, x0: float, z: complex = 0.0, N: int = 2,
               kappa: float | None = None, fiber_sign: int = +1,
               cheb_xi_max: float = CHEB_XI_MAX, cheb_nodes: int = CHEB_NODES) -> LocalData:
    """Collect Taylor coefficients, lower-order profiles and c(xi) at a source."""
    z = complex(z)
    p = op.principal
    m = p.m
    if not 0 <= N <= MAX_DEPTH:
        raise PreconditionError(f"transport depth must lie in [0, {MAX_DEPTH}]")
    if p.is_elliptic():
        raise NotPrincipalType("elliptic symbol has no characteristic points", None)
    if m <= 1 and z.imag != 0:
        raise PreconditionError("for m <= 1 the spectral parameter must be real")
    if kappa is None:
        kappa = op.V.kappa if op.V is not None else 1.0
    if not 0 < kappa <= 1:
        raise KappaError(f"kappa must lie in (0, 1], got {kappa}")
    if m > 1 and kappa > m - 1 + 1e-12:
        raise KappaError(f"kappa = {kappa} exceeds m - 1 = {m - 1}")
    if op.V is not None:
        op.V.check_order(m)

    work = op if fiber_sign > 0 else op.reflect()
    x_local = float(x0) % TWO_PI if fiber_sign > 0 else float(-x0) % TWO_PI
    a = work.principal.a_plus
    if abs(a(x_local)) >= ROOT_TOL:
        raise NotCharacteristic(f"a({x0}) = {a(x_local)} does not vanish")
    a1 = float(a.derivative()(x_local))
    if abs(a1) <= DERIVATIVE_FLOOR:
        raise NotPrincipalType(f"a' vanishes at x = {x0}", x0)
    if a1 < 0:
        raise PreconditionError(f"x = {x0} is a sink for fiber sign {fiber_sign}, not a source")

    taylor = a.taylor(x_local, N + 2)
    taylor[0] = 0.0

    xi_min = 1.0 if work.divergence is not None else 1.0 + work.band_width
    grid = LogGrid(xi_min, cheb_xi_max, cheb_nodes)
    gamma_s = m - 1.0
    if work.drift:
        gamma_s = max(gamma_s, 1.0)
    bare = dataclasses.replace(work, V=None)
    s_alpha = _taylor_profiles(bare, x_local, N + 1, grid, gamma_s)
    if work.V is not None:
        gamma_v = max(t.power for t in work.V.terms) if work.V.terms else 0.0
        full = _taylor_profiles(work, x_local, N + 1, grid, max(gamma_s, gamma_v))
        V_alpha = [f - s for f, s in zip(full, s_alpha)]
    else:
        V_alpha = [LogCheb.zero(grid, gamma_s) for _ in range(N + 2)]
    sigma = [s + v for s, v in zip(s_alpha, V_alpha)]
    if z != 0:
        sigma[0] = sigma[0] + LogCheb.power(grid, 0.0, -z)

    c = (sigma[0] + LogCheb.power(grid, m - 1.0, 0.5j * a1 * m)) * (1.0 / a1)
    phase_rate = c.times_power(-m)

    xs = sample_grid()
    cs = c(xs)
    top = xs >= 100.0
    im_exp = _fit_power(xs[top], cs.imag[top], floor=1e-13 * (1 + np.abs(cs[top])) * xs[top] ** (m - 1))
    return LocalData(
        op=work, x0=float(x0), fiber_sign=fiber_sign, x_local=x_local, a_prime=a1,
        taylor_a=taylor, s_alpha=s_alpha, V_alpha=V_alpha, sigma=sigma, c=c,
        phase_rate=phase_rate, z=z, m=m, kappa=float(kappa), depth=N, grid=grid,
        xi_min=xi_min, im_c_exponent=im_exp,
    )


# -- amplitudes -------------------------------------------------------------------


@dataclass
class LevelCheck:
    level: int
    order_fit: float
    order_bound: float
    transport_residual: float
    fd_residual: float | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class PhaseCheck:
    simpson_vs_spectral: float
    richardson: float
    im_increment: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Amplitude:
    """b = e^{i Phi} (level_0 + level_1 + ...), with sampled values on ``xi_grid``."""

    local: LocalData
    levels: list
    phase_coeffs: object
    xi_grid: np.ndarray
    b_levels: list
    checks: list = field(default_factory=list)
    phase_check: PhaseCheck | None = None

    @property
    def m(self) -> float:
        return self.local.m

    @property
    def kappa(self) -> float:
        return self.local.kappa

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def phase(self, xi):
        return self.phase_coeffs(xi)

    def level(self, k: int, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.exp(1j * self.phase(xi)) * self.levels[k](xi)

    def __call__(self, xi, depth: int | None = None) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        depth = self.depth if depth is None else min(depth, self.depth)
        total = sum(self.levels[k](xi) for k in range(depth + 1))
        return np.exp(1j * self.phase(xi)) * total

    def write_csv(self, path) -> None:
        cols = ["xi"]
        for k in range(len(self.b_levels)):
            cols += [f"re_b{k}", f"im_b{k}"]
        data = [self.xi_grid]
        for b in self.b_levels:
            data += [b.real, b.imag]
        arr = np.column_stack(data)
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in arr:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _D(local: LocalData, F: LogCheb) -> LogCheb:
    return F.d_xi() + (local.phase_rate * F) * 1j


def _iD_power(local: LocalData, F: LogCheb, alpha: int) -> LogCheb:
    for _ in range(alpha):
        F = _D(local, F) * 1j
    return F


def _transport_terms(local: LocalData, levels: list, k: int, include_unknown: bool) -> tuple:
    """Left side of the level-k transport equation and a magnitude scale.

    E_k = sum_{alpha+beta=k+1} (i D)^alpha (A_alpha xi^m b_beta)
        + sum_{alpha+beta=k} (i D)^alpha (sigma_alpha b_beta);
    with ``include_unknown`` False the two terms containing b_k are dropped.
    """
    m = local.m
    terms = []
    for alpha in range(1, k + 2):
        beta = k + 1 - alpha
        if beta >= len(levels) or (beta == k and not include_unknown):
            continue
        A = local.taylor_a[alpha] if alpha < len(local.taylor_a) else 0.0
        if A:
            terms.append(_iD_power(local, levels[beta].times_power(m) * A, alpha))
    for alpha in range(0, k + 1):
        beta = k - alpha
        if beta >= len(levels) or (beta == k and not include_unknown):
            continue
        if alpha < len(local.sigma):
            terms.append(_iD_power(local, local.sigma[alpha] * levels[beta], alpha))
    if not terms:
        return None, None
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total, terms


def _relative_transport(local: LocalData, levels: list, k: int, xs: np.ndarray) -> float:
    """max |E_k| over the sum of term sizes plus the nominal size of the level-k terms."""
    total, terms = _transport_terms(local, levels, k, include_unknown=True)
    if total is None:
        return 0.0
    m = local.m
    nominal = abs(local.a_prime) * m * xs ** (m / 2.0 - 1.0 - local.kappa * k)
    scale = sum(np.abs(t(xs)) for t in terms) + nominal
    res = np.abs(total(xs))
    ok = scale > 0
    return float(np.max(res[ok] / scale[ok])) if np.any(ok) else 0.0


def _fd_residual_b0(local: LocalData, xs: np.ndarray, b0: np.ndarray) -> float:
    """First transport equation on the sampled grid with 4th-order differences in log xi."""
    m, a1 = local.m, local.a_prime
    t = np.log(xs)
    h = t[1] - t[0]
    g = xs**m * b0
    dg = (g[:-4] - 8 * g[1:-3] + 8 * g[3:-1] - g[4:]) / (12 * h)
    inner = slice(2, -2)
    sig = local.sigma[0](xs[inner])
    res = 1j * a1 * dg / xs[inner] + sig * b0[inner]
    scale = np.abs(a1 * m * xs[inner] ** (m - 1) * b0[inner]) + np.abs(sig * b0[inner])
    return float(np.max(np.abs(res) / scale))


def _order_fit(local: LocalData, level: LogCheb, b0_vals: np.ndarray, xs: np.ndarray) -> float:
    top = xs >= SAMPLE_XI_MAX / 10
    vals = level(xs[top])
    return _fit_power(xs[top], vals, floor=ZERO_LEVEL * np.abs(b0_vals[top]))


def solve_b0(local: LocalData) -> Amplitude:
    """b_0 = xi^{-m/2} e^{i Phi}, Phi(xi) = int_{xi_ref}^xi eta^{-m} c(eta) d eta.

    The phase is normalized to vanish at xi = 1 when the grid reaches it
    and at the left grid end otherwise.
    """
    grid, m = local.grid, local.m
    b0 = LogCheb.power(grid, -m / 2.0)
    # Phi_t = xi Phi'(xi) = xi^{1-m} c
    phi_t = local.c.times_power(1.0 - m)
    tail = phi_t.tail_size()
    if tail > 1e-10 * max(1.0, float(np.abs(phi_t.h).max())):
        raise ResolutionError(f"phase rate under-resolved (Chebyshev tail {tail:.2e})")
    t_ref = math.log(max(1.0, local.xi_min))
    Phi = phi_t.integral_t(t_ref)

    xs = sample_grid()
    ph = Phi(xs)
    # independent phase: composite Simpson in log xi, plus a Richardson estimate
    rate = phi_t(xs)
    t = np.log(xs)
    def csimp(y, x):
        return cumulative_simpson(y.real, x=x, initial=0.0) + 1j * cumulative_simpson(y.imag, x=x, initial=0.0)

    simp = csimp(rate, t) + Phi(xs[:1])
    half = csimp(rate[::2], t[::2]) + Phi(xs[:1])
    err_simpson = float(np.max(np.abs(simp - ph) / (1 + np.abs(ph))))
    richardson = float(np.max(np.abs(simp[::2] - half)) / 15.0)
    im_inc = float(abs(ph[-1].imag - ph[len(xs) // 2].imag))
    if not np.all(np.isfinite(ph)):
        raise OrderViolation("phase integral is not finite")
    im_rate_exp = _fit_power(xs[xs >= 100], rate.imag[xs >= 100],
                             floor=1e-13 * (1 + np.abs(rate[xs >= 100])))
    if im_rate_exp > -0.05 and im_inc > 1e-6:
        raise OrderViolation(
            f"Im of the phase keeps growing (rate exponent {im_rate_exp:.3f}); check the order of V"
        )
    vals = np.exp(1j * ph) * b0(xs)
    fd = _fd_residual_b0(local, xs, vals)
    check = LevelCheck(0, _order_fit(local, b0, vals, xs), -m / 2.0 + ORDER_SLACK,
                       _relative_transport(local, [b0], 0, xs[2:-2]), fd)
    amp = Amplitude(local, [b0], Phi, xs, [vals], [check],
                    PhaseCheck(err_simpson, richardson, im_inc))
    if fd > TRANSPORT_TOL:
        raise OrderViolation(f"first transport residual {fd:.2e} above {TRANSPORT_TOL}")
    return amp


def solve_bk(local: LocalData, amplitude: Amplitude, k: int) -> Amplitude:
    """Append level k: i D(A_1 xi^m b_k) + sigma_0 b_k = -(known terms of E_k).

    With b_k = xi^{-m/2} e^{i Phi} w_k this reads
    w_k' = -i xi^{-m/2} e^{-i Phi} f_k, f_k = -(known)/A_1, and the decaying
    solution is w_k(xi) = i int_xi^inf (...) d eta.
    """
    if k != len(amplitude.levels):
        raise PreconditionError(f"levels 0..{k - 1} must be solved before level {k}")
    m, grid = local.m, local.grid
    nominal = -m / 2.0 - local.kappa * k
    known, _ = _transport_terms(local, amplitude.levels, k, include_unknown=False)
    if known is None or not np.any(known.h):
        level = LogCheb.zero(grid, nominal)
    else:
        f = known * (-1.0 / local.a_prime)
        g = f.times_power(-m / 2.0)
        lam = g.gamma + 1.0
        if lam >= 0:
            # the data may decay faster than its nominal order; measure it
            top = grid.xi > 10.0
            slope = _fit_power(grid.xi[top], g.values()[top])
            if not slope + 1.0 < 0:
                raise OrderViolation(f"level {k} source does not decay (order {slope:.3f})")
            g = g.regauge(math.floor(slope) if slope + 1 < -0.5 else slope)
        level = (g.tail_integral() * 1j).times_power(-m / 2.0)
    xs = amplitude.xi_grid
    levels = amplitude.levels + [level]
    vals = np.exp(1j * amplitude.phase(xs)) * level(xs)
    order = _order_fit(local, level, amplitude.b_levels[0], xs)
    check = LevelCheck(k, order, nominal + ORDER_SLACK, _relative_transport(local, levels, k, xs[2:-2]))
    out = Amplitude(local, levels, amplitude.phase_coeffs, xs, amplitude.b_levels + [vals],
                    amplitude.checks + [check], amplitude.phase_check)
    if order > check.order_bound:
        raise OrderViolation(f"|b_{k}| decays like xi^{order:.3f}, expected <= {check.order_bound:.3f}")
    if check.transport_residual > TRANSPORT_TOL:
        raise OrderViolation(f"transport residual of level {k} is {check.transport_residual:.2e}")
    return out


def build_amplitude(local: LocalData, depth: int | None = None) -> Amplitude:
    depth = local.depth if depth is None else depth
    amp = solve_b0(local)
    for k in range(1, depth + 1):
        amp = solve_bk(local, amp, k)
    return amp


# -- synthesis --------------------------------------------------------------------


@dataclass(frozen=True)
class PlateauCutoff:
    """Periodized smooth cutoff: 1 for |x - x0| <= eps/2, 0 for |x - x0| >= eps."""

    x0: float
    eps: float

    def __call__(self, x):
        d = np.abs((np.asarray(x, dtype=float) - self.x0 + math.pi) % TWO_PI - math.pi)
        return smooth_step((self.eps - d) / (self.eps / 2.0))


@dataclass
class WkbState:
    n: np.ndarray
    fourier_coeffs: np.ndarray
    x0: float
    fiber_sign: int
    cutoff_eps: float | None
    depth: int
    x_grid: np.ndarray
    u_values: np.ndarray

    @property
    def N_syn(self) -> int:
        return int(self.n[-1])

    @classmethod
    def from_coefficients(cls, coeffs: dict, N_syn: int, x0: float = 0.0) -> "WkbState":
        n = np.arange(-N_syn, N_syn + 1)
        c = np.zeros(n.size, dtype=complex)
        for k, v in coeffs.items():
            c[k + N_syn] = v
        xg, uv = _to_grid(c, N_syn)
        return cls(n, c, x0, +1, None, 0, xg, uv)

    def coefficient(self, k: int) -> complex:
        return complex(self.fourier_coeffs[k + self.N_syn])

    def negative_mass(self, tail_from: int = 1) -> float:
        """max |u_n| over n <= -tail_from (mirrored for fiber sign -), relative to max |u_n|.

        Without a cutoff the spectrum is exactly one-sided.  A cutoff of
        width eps smears mass onto |n| of order 1/eps, so with one the
        meaningful check is rapid decay of the far tail (large ``tail_from``).
        """
        top = np.abs(self.fourier_coeffs).max()
        side = self.fiber_sign * self.n <= -tail_from
        return float(np.abs(self.fourier_coeffs[side]).max() / top) if top else 0.0

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("n,re_u,im_u\n")
            for k, v in zip(self.n, self.fourier_coeffs):
                fh.write(f"{k},{v.real:.17g},{v.imag:.17g}\n")


def _to_grid(coeffs: np.ndarray, N_syn: int, size: int | None = None):
    size = size or 1 << int(math.ceil(math.log2(4 * N_syn + 4)))
    buf = np.zeros(size, dtype=complex)
    n = np.arange(-N_syn, N_syn + 1)
    buf[n % size] = coeffs
    u = np.fft.ifft(buf) * size
    return np.arange(size) * TWO_PI / size, u


def synthesize(amplitude: Amplitude, chi: PlateauCutoff | None = None, N_syn: int = 4096,
               depth: int | None = None) -> WkbState:
    """u_n = b(n) e^{-i n x0} for n >= 2 (mirrored for negative fiber sign), then times chi."""
    if N_syn < MIN_SYNTHESIS:
        raise ResolutionError(f"N_syn = {N_syn} below the minimum {MIN_SYNTHESIS}")
    local = amplitude.local
    n = np.arange(-N_syn, N_syn + 1)
    coeffs = np.zeros(n.size, dtype=complex)
    start = max(2, int(math.ceil(local.xi_min)))
    pos = np.arange(start, N_syn + 1)
    vals = amplitude(pos.astype(float), depth)
    sign = local.fiber_sign
    idx = sign * pos
    coeffs[idx + N_syn] = vals * np.exp(-1j * idx * local.x0)
    eps = None
    if chi is not None:
        eps = chi.eps
        size = 1 << int(math.ceil(math.log2(8 * N_syn + 8)))
        xg, uv = _to_grid(coeffs, N_syn, size)
        prod = np.fft.fft(uv * chi(xg)) / size
        coeffs = prod[n % size]
    xg, uv = _to_grid(coeffs, N_syn)
    return WkbState(n, coeffs, local.x0, sign, eps,
                    amplitude.depth if depth is None else depth, xg, uv)


# -- regularity diagnostics -------------------------------------------------------


@dataclass
class SobolevTrend:
    s: float
    exponent: float
    summable: bool
    partial_sums: list

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def sobolev_trend(state: WkbState, s: float, window: tuple | None = None,
                  threshold: float = -1.05) -> SobolevTrend:
    """Decay of the terms |u_n|^2 <n>^{2s}: summable when the fitted exponent is below ``threshold``."""
    N = state.N_syn
    lo, hi = window or (N // 10, N)
    k = np.arange(lo, hi + 1)
    side = state.fiber_sign
    u = state.fourier_coeffs[side * k + N]
    with np.errstate(divide="ignore"):
        log_terms = 2 * np.log(np.abs(u)) + s * np.log1p(k.astype(float) ** 2)
    fit = fit_tail(k, log_terms)
    ks = np.arange(1, N + 1)
    terms = np.abs(state.fourier_coeffs[side * ks + N]) ** 2 * (1 + ks.astype(float) ** 2) ** s
    csum = np.cumsum(terms)
    marks = [N // 8, N // 4, N // 2, N]
    return SobolevTrend(s, fit.exponent, fit.exponent < threshold,
                        [[int(M), float(csum[M - 1])] for M in marks])


@dataclass
class PointwiseReport:
    x: float
    cutoffs: list
    errors: list
    slopes: list

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def pointwise_convergence(state: WkbState, x: float, cutoffs=(32, 64, 128, 256, 512)) -> PointwiseReport:
    """Smoothly filtered partial sums sum_n phi(|n|/M) u_n e^{inx} against M = N_syn/2.

    The filter phi is 1 on [0, 1/2] and 0 beyond 1.  At a point where u is
    smooth the error then decays faster than any power of M; sharp partial
    sums would only decay like 1/M because of the distant singularity.
    """
    N = state.N_syn
    n = state.n

    def filtered(M):
        phi = smooth_step((1.0 - np.abs(n) / M) / 0.5)
        return complex(np.sum(phi * state.fourier_coeffs * np.exp(1j * n * x)))

    ref = filtered(N // 2)
    errs = [abs(filtered(M) - ref) for M in cutoffs]
    slopes = []
    for (M1, e1), (M2, e2) in zip(zip(cutoffs, errs), zip(cutoffs[1:], errs[1:])):
        if e1 > 0 and e2 > 0:
            slopes.append(math.log(e2 / e1) / math.log(M2 / M1))
        else:
            slopes.append(-math.inf)
    return PointwiseReport(float(x), list(cutoffs), errs, slopes)


# -- residuals --------------------------------------------------------------------


@dataclass
class ResidualReport:
    depth: int
    fitted_exponent: float
    predicted_exponent: float
    sobolev_index: float
    r_squared: float
    window: tuple
    roundoff_fraction: float
    max_abs: float

    @property
    def consistent(self) -> bool:
        return self.fitted_exponent <= self.predicted_exponent + 0.2

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["window"] = list(self.window)
        d["consistent"] = self.consistent
        return d


def residual_order(op: ToroidalOperator, z: complex, state: WkbState, N: int | None = None,
                   window: tuple | None = None, m: float | None = None,
                   kappa: float = 1.0) -> ResidualReport:
    """Decay exponent of r = (A - z)u over a frequency window (default: the upper decade).

    Rows where |r_n| is within a few ulps of sum_k |A_nk||u_k| carry no
    information; when most of the window is at that level the exponent is
    reported as -inf (the residual vanishes to working precision).
    """
    N = state.depth if N is None else N
    m = op.m if m is None else m
    b = op.band_width
    Ns = state.N_syn
    u = state.fourier_coeffs
    from .spectral import apply

    j0, r = apply(op, -Ns, u, z)
    mag = np.zeros(r.size)
    ks = np.arange(-Ns, Ns + 1)
    for d in range(-b, b + 1):
        vals = np.abs(op.band_entries(d, ks) - (z if d == 0 else 0.0))
        mag[b + d : b + d + u.size] += vals * np.abs(u)
    js = j0 + np.arange(r.size)
    lo, hi = window or (max(2 + b, Ns // 10), Ns - b)
    side = state.fiber_sign
    sel = (side * js >= lo) & (side * js <= hi)
    rr, mm, kk = np.abs(r[sel]), mag[sel], np.abs(js[sel])
    floor = ROUNDOFF_FACTOR * mm
    live = rr > floor
    frac = 1.0 - float(live.mean())
    predicted = m / 2.0 - (N + 2) * kappa
    sob = -m / 2.0 - 1.0 + (N + 1) * kappa
    max_abs = float(np.abs(r[(np.abs(js) <= Ns - b)]).max())
    if frac >= 0.5:
        return ResidualReport(N, -math.inf, predicted, sob, 1.0, (lo, hi), frac, max_abs)
    with np.errstate(divide="ignore"):
        fit = fit_tail(kk[live], np.log(rr[live]))
    rep = ResidualReport(N, fit.exponent, predicted, sob, fit.r_squared, (lo, hi), frac, max_abs)
    if fit.r_squared < 0.9:
        err = InconclusiveFit(f"residual decay fit has R^2 = {fit.r_squared:.3f}")
        err.report = rep
        raise err
    return rep
