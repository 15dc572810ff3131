"""Escape function near the radial sets and grid checks of the symbol inequalities it powers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimateFailure, SeparationError, UnsupportedInput
from .symbols import PrincipalSymbol, ZeroSets, radial_sets, zero_sets
from .trigpoly import TWO_PI

DEFAULT_R = 10.0
GRID_X = 256
GRID_XI = 128
XI_MAX = 1e4


def _f(t):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def _df(t):
    with np.errstate(divide="ignore", over="ignore"):
        tt = np.where(t > 0, t, 1.0)
        return np.where(t > 0, np.exp(-1.0 / tt) / tt**2, 0.0)


def smooth_step(t):
    """C^infinity step: 0 for t <= 0, 1 for t >= 1, strictly monotone between."""
    t = np.asarray(t, dtype=float)
    u, v = _f(t), _f(1.0 - t)
    return u / (u + v)


def smooth_step_derivative(t):
    t = np.asarray(t, dtype=float)
    u, v = _f(t), _f(1.0 - t)
    du, dv = _df(t), _df(1.0 - t)
    return (du * v + u * dv) / (u + v) ** 2


def _wrap(d):
    return (np.asarray(d, dtype=float) + math.pi) % TWO_PI - math.pi


def _japanese(xi):
    return np.sqrt(1.0 + np.asarray(xi, dtype=float) ** 2)


@dataclass
class EscapeFunction:
    """e = sum over sources of chi_x * chi_xi minus the same sum over sinks.

    chi_x equals 1 for |x - x0| <= eps/2 and 0 for |x - x0| >= eps;
    chi_xi equals 1 on the matching fiber for |xi| >= 2R and 0 for |xi| <= R.
    """

    p: PrincipalSymbol
    eps: float
    R: float
    zero_sets: ZeroSets | None
    sources: list
    sinks: list
    bump: dict = field(default_factory=lambda: {"profile": "exp(-1/t) smooth step", "x_shell": "(eps/2, eps)", "xi_shell": "(R, 2R) in log|xi|"})

    def _pieces(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        axi = np.abs(xi)
        with np.errstate(divide="ignore"):
            txi = (np.log(np.where(axi > 0, axi, 1e-300)) - math.log(self.R)) / math.log(2.0)
        cxi = smooth_step(txi)
        dcxi = smooth_step_derivative(txi) / (np.where(axi > 0, axi, 1.0) * math.log(2.0)) * np.sign(xi)
        return x, xi, cxi, dcxi

    def _sum(self, x, xi, want_grad):
        x, xi, cxi, dcxi = self._pieces(x, xi)
        shape = np.broadcast(x, xi).shape
        e = np.zeros(shape)
        ex = np.zeros(shape)
        exi = np.zeros(shape)
        half = self.eps / 2.0
        for weight, pts in ((1.0, self.sources), (-1.0, self.sinks)):
            for x0, s in pts:
                d = _wrap(x - x0)
                tx = (self.eps - np.abs(d)) / half
                cx = smooth_step(tx)
                fiber = (s * xi > 0).astype(float)
                e = e + weight * cx * cxi * fiber
                if want_grad:
                    dcx = smooth_step_derivative(tx) * (-np.sign(d)) / half
                    ex = ex + weight * dcx * cxi * fiber
                    exi = exi + weight * cx * dcxi * fiber
        return e, ex, exi

    def __call__(self, x, xi):
        e, _, _ = self._sum(x, xi, False)
        return e if e.ndim else float(e)

    def gradient(self, x, xi):
        """Analytic (d/dx e, d/dxi e)."""
        _, ex, exi = self._sum(x, xi, True)
        return ex, exi

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "R": self.R,
            "sources": [list(v) for v in self.sources],
            "sinks": [list(v) for v in self.sinks],
            "bump": self.bump,
        }


def _all_zeros(p: PrincipalSymbol):
    z = zero_sets(p)
    return z, {1: z.z_plus, -1: z.z_minus}


def default_eps(p: PrincipalSymbol) -> float:
    """Half the smallest half-gap between zeros, capped by the a'-nonvanishing radius."""
    z, zeros = _all_zeros(p)
    best = math.pi / 2.0
    for sign, roots in zeros.items():
        a = p.branch(sign)
        if len(roots) > 1:
            gaps = np.diff(list(roots) + [roots[0] + TWO_PI])
            best = min(best, float(np.min(gaps)) / 4.0)
        for x0 in roots:
            best = min(best, _derivative_radius(a, x0) / 2.0)
    return best


def _derivative_radius(a, x0, n=2048) -> float:
    """Distance from x0 to the nearest sign change (or zero) of a'."""
    da = a.derivative()
    s0 = np.sign(da(x0))
    r = np.linspace(0.0, math.pi, n)[1:]
    bad = (np.sign(da(x0 + r)) != s0) | (np.sign(da(x0 - r)) != s0)
    return float(r[np.argmax(bad)]) if bad.any() else math.pi


def check_separation(p: PrincipalSymbol, eps: float) -> None:
    """Distinct zeros of each branch at least 4 eps apart; a' nonvanishing within 2 eps."""
    _, zeros = _all_zeros(p)
    for sign, roots in zeros.items():
        a = p.branch(sign)
        for i, x in enumerate(roots):
            for y in roots[i + 1 :]:
                if abs(_wrap(x - y)) < 4.0 * eps:
                    raise SeparationError(f"zeros {x} and {y} closer than 4*eps", pair=(x, y))
            r = _derivative_radius(a, x)
            if r <= 2.0 * eps:
                raise SeparationError(f"a' vanishes within 2*eps of {x}", pair=(x, x + r))


def build_escape(p: PrincipalSymbol, eps: float | None = None, R: float = DEFAULT_R) -> EscapeFunction:
    """Escape function: +1 near the radial sources and -1 near the sinks at high frequency.

    Raises
    ------
    SeparationError
        If ``eps`` is too large for the zeros to be separated.
    """
    if eps is None:
        eps = default_eps(p)
    if not (eps > 0 and R > 0):
        raise ValueError("eps and R must be positive")
    check_separation(p, eps)
    rs = radial_sets(p)
    return EscapeFunction(p, float(eps), float(R), zero_sets(p), rs["source"], rs["sink"])


def _hp_product(p: PrincipalSymbol, e: EscapeFunction, x, xi, g, dg):
    """H_p(e * g(xi)) = dp/dxi * e_x * g - dp/dx * (e_xi * g + e * g')."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    ev = e(x, xi)
    ex, exi = e.gradient(x, xi)
    ap, am = p.a_plus, p.a_minus
    a = np.where(xi > 0, ap(x), am(x))
    da = np.where(xi > 0, ap.derivative()(x), am.derivative()(x))
    ax = np.abs(xi)
    dpdxi = p.m * a * ax ** (p.m - 1.0) * np.sign(xi)
    dpdx = da * ax**p.m
    gv, dgv = g(xi), dg(xi)
    return dpdxi * ex * gv - dpdx * (exi * gv + ev * dgv)


def _log_jap(xi):
    return np.log(_japanese(xi))


def _dlog_jap(xi):
    xi = np.asarray(xi, dtype=float)
    return xi / (1.0 + xi**2)


def hp_escape_log(p: PrincipalSymbol, e: EscapeFunction, x, xi):
    """H_p(e(x, xi) log<xi>) evaluated analytically."""
    return _hp_product(p, e, x, xi, _log_jap, _dlog_jap)


@dataclass
class EstimateReport:
    region: str
    grid: dict
    worst_ratio: float | None
    constant: float | None
    location: tuple | None
    vacuous: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "grid": self.grid,
            "worst_ratio": self.worst_ratio,
            "constant": self.constant,
            "location": None if self.location is None else list(self.location),
            "vacuous": self.vacuous,
            "extra": self.extra,
        }


def _inner_grid(e: EscapeFunction, frac: float, r_mult: float, n_x: int, n_xi: int, xi_max: float):
    """Nodes of the regions |x - x0| < frac*eps, sign*xi >= r_mult*R around every radial point."""
    xs, xis = [], []
    offs = np.linspace(-frac * e.eps, frac * e.eps, n_x + 2)[1:-1]
    mags = np.geomspace(r_mult * e.R, xi_max, n_xi)
    for x0, s in list(e.sources) + list(e.sinks):
        X, XI = np.meshgrid((x0 + offs) % TWO_PI, s * mags, indexing="ij")
        xs.append(X.ravel())
        xis.append(XI.ravel())
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(xis)


def escape_derivative_check(
    p: PrincipalSymbol,
    e: EscapeFunction,
    n_x: int = GRID_X,
    n_xi: int = GRID_XI,
    xi_max: float = XI_MAX,
) -> EstimateReport:
    """C = -max of H_p(e log<xi>) / <xi>^(m-1) over the inner source and sink regions.

    Also scans the whole |xi| >= 1 grid for nodes where the bound fails and a
    compensating term would be needed, and checks none of them falls inside
    the quarter-size regions.

    Raises
    ------
    EstimateFailure
        If C <= 0.
    """
    grid = {"n_x": n_x, "n_xi": n_xi, "xi_max": xi_max}
    if not e.sources and not e.sinks:
        return EstimateReport("empty (elliptic)", grid, None, None, None, vacuous=True)
    x, xi = _inner_grid(e, 0.5, 2.0, n_x, n_xi, xi_max)
    ratio = hp_escape_log(p, e, x, xi) / _japanese(xi) ** (p.m - 1.0)
    i = int(np.argmax(ratio))
    worst = float(ratio[i])
    C = -worst
    # complement scan on the full phase-space grid
    gx = np.linspace(0.0, TWO_PI, n_x, endpoint=False)
    mags = np.geomspace(1.0, xi_max, n_xi)
    X, XI = np.meshgrid(gx, np.concatenate([-mags[::-1], mags]), indexing="ij")
    full = hp_escape_log(p, e, X, XI) / _japanese(XI) ** (p.m - 1.0)
    needs = full > -C
    quarter = np.zeros_like(needs)
    for x0, s in list(e.sources) + list(e.sinks):
        quarter |= (np.abs(_wrap(X - x0)) < e.eps / 4.0) & (s * XI >= 4.0 * e.R)
    extra = {
        "compensation_fraction": float(np.mean(needs)),
        "compensation_inside_quarter_regions": int(np.count_nonzero(needs & quarter)),
    }
    rep = EstimateReport("inner source/sink regions", grid, worst, C, (float(x[i]), float(xi[i])), extra=extra)
    if not C > 0:
        raise EstimateFailure(f"escape estimate fails: C = {C}", location=rep.location)
    return rep


@dataclass
class ShiftSamples:
    x: np.ndarray
    xi: np.ndarray
    values: np.ndarray
    inner_bound_ok: bool


def conjugated_shift(
    p: PrincipalSymbol,
    t: float,
    e: EscapeFunction,
    n_x: int = 64,
    n_xi: int = 64,
    xi_max: float = XI_MAX,
    C: float | None = None,
) -> ShiftSamples:
    """Samples of t * H_p(e log<xi>) on the inner regions.

    ``inner_bound_ok`` records whether every sample is <= -C t <xi>^(m-1);
    C defaults to the constant from :func:`escape_derivative_check`.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    x, xi = _inner_grid(e, 0.5, 2.0, n_x, n_xi, xi_max)
    base = hp_escape_log(p, e, x, xi)
    vals = t * base
    if C is None:
        C = escape_derivative_check(p, e).constant or 0.0
    ok = bool(np.all(vals <= -C * t * _japanese(xi) ** (p.m - 1.0) * (1.0 - 1e-12)))
    return ShiftSamples(x, xi, vals, ok)


def mourre_symbol(e: EscapeFunction, m: float):
    """Symbol of the conjugate operator: -e <xi>^(1-m) for m < 1, -e log<xi> for m = 1."""
    if m < 1.0:
        return (lambda xi: _japanese(xi) ** (1.0 - m)), (
            lambda xi: (1.0 - m) * np.asarray(xi, dtype=float) * _japanese(xi) ** (-1.0 - m)
        )
    return _log_jap, _dlog_jap


def mourre_symbol_check(
    p: PrincipalSymbol,
    e: EscapeFunction | None = None,
    n_x: int = GRID_X,
    n_xi: int = GRID_XI,
    xi_max: float = XI_MAX,
    eps: float | None = None,
    R: float = DEFAULT_R,
) -> EstimateReport:
    """c = min of H_p sigma(A) over dist(x, Z) < eps/2, |xi| >= 2R on the matching fiber.

    Raises
    ------
    UnsupportedInput
        For m > 1 or elliptic symbols.
    EstimateFailure
        If c <= 0.
    """
    if not 0.0 < p.m <= 1.0:
        raise UnsupportedInput("the commutator check needs 0 < m <= 1")
    if p.is_elliptic():
        raise UnsupportedInput("the commutator check needs a non-elliptic symbol")
    if e is None:
        e = build_escape(p, eps, R)
    g, dg = mourre_symbol(e, p.m)
    x, xi = _inner_grid(e, 0.5, 2.0, n_x, n_xi, xi_max)
    # sigma(A) = -e g, so H_p sigma(A) = -H_p(e g)
    vals = -_hp_product(p, e, x, xi, g, dg)
    i = int(np.argmin(vals))
    c = float(vals[i])
    rep = EstimateReport(
        "dist(x, Z) < eps/2, |xi| >= 2R", {"n_x": n_x, "n_xi": n_xi, "xi_max": xi_max}, c, c, (float(x[i]), float(xi[i]))
    )
    if not c > 0:
        raise EstimateFailure(f"commutator positivity fails: c = {c}", location=rep.location)
    return rep


def weight_eval(e: EscapeFunction, t: float, m: float, x, xi):
    """Anisotropic weight <xi>^((m-1)/2 + t e(x, xi))."""
    return _japanese(xi) ** ((m - 1.0) / 2.0 + t * np.asarray(e(x, xi)))


def write_field_csv(path, p: PrincipalSymbol, e: EscapeFunction, n_x: int = 64, n_xi: int = 32, xi_max: float = XI_MAX):
    gx = np.linspace(0.0, TWO_PI, n_x, endpoint=False)
    mags = np.geomspace(1.0, xi_max, n_xi)
    X, XI = np.meshgrid(gx, np.concatenate([-mags[::-1], mags]), indexing="ij")
    E = e(X, XI)
    H = hp_escape_log(p, e, X, XI)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "xi", "e", "hp_e_log_jxi"])
        for row in zip(X.ravel(), XI.ravel(), E.ravel(), H.ravel()):
            w.writerow([repr(float(v)) for v in row])


__all__ = [
    "EscapeFunction",
    "EstimateReport",
    "ShiftSamples",
    "build_escape",
    "check_separation",
    "conjugated_shift",
    "default_eps",
    "escape_derivative_check",
    "hp_escape_log",
    "mourre_symbol_check",
    "smooth_step",
    "weight_eval",
]
