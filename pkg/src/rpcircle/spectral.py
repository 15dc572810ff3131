"""Fourier-basis realizations of symbols, recurrence shooting and truncation spectra.

Matrices act on coefficients u_k of u(x) = sum_k u_k e^{ikx}.  Column k,
row k + d of an operator is called the *band entry* at offset d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import logsumexp

from .errors import InconclusiveFit, PreconditionError, RecurrenceBreakdown
from .symbols import (
    DivergenceOperator,
    EsaVerdict,
    LowerOrderSymbol,
    PrincipalSymbol,
    classify_esa,
)
from .trigpoly import TrigPoly

K_MAX_SHOOT = 4096
SUMMABLE_EXPONENT = -0.5
FIT_R2_MIN = 0.95
ANGLE_COS_MIN = 1.0 - 1e-6
DEGENERATE_LEAD = 1e-13
NON_CERTIFICATE_LABEL = "truncation diagnostic — not a spectral-type certificate"


def _abs_pow(k, m):
    k = np.abs(np.asarray(k, dtype=float))
    return np.where(k == 0, 0.0, k**m)


def _japanese(k, power):
    return (1.0 + np.asarray(k, dtype=float) ** 2) ** (power / 2.0)


@dataclass(frozen=True)
class ToroidalOperator:
    """A banded operator on Fourier modes.

    Either the symmetrized toroidal Kohn-Nirenberg quantization of
    ``principal`` (+ ``V``), or, when ``divergence`` is given, the exact
    operator scale * d/dx(a d/dx) (+ symmetrized ``V``).  ``drift`` adds
    drift * D_x, i.e. drift * k on the diagonal.
    """

    principal: PrincipalSymbol
    V: LowerOrderSymbol | None = None
    divergence: DivergenceOperator | None = None
    drift: float = 0.0
    symmetrize: bool = True

    @classmethod
    def from_symbol(cls, p: PrincipalSymbol, V: LowerOrderSymbol | None = None, symmetrize=True):
        if V is not None:
            V.check_order(p.m)
        return cls(principal=p, V=V, symmetrize=symmetrize)

    @classmethod
    def from_divergence(cls, a: TrigPoly, scale: float = 1.0, V: LowerOrderSymbol | None = None,
                        drift: float = 0.0):
        div = DivergenceOperator(a, scale)
        if V is not None:
            V.check_order(2.0)
        return cls(principal=div.principal, V=V, divergence=div, drift=drift)

    # -- structure ------------------------------------------------------------
    @property
    def m(self) -> float:
        return self.principal.m

    @property
    def band_width(self) -> int:
        if self.divergence is not None:
            w = self.divergence.a.degree
        else:
            w = max(self.principal.a_plus.degree, self.principal.a_minus.degree)
        if self.V is not None:
            w = max(w, self.V.band_width)
        return w

    def with_drift(self, drift: float) -> "ToroidalOperator":
        return ToroidalOperator(self.principal, self.V, self.divergence, drift, self.symmetrize)

    def reflect(self) -> "ToroidalOperator":
        """Conjugation by u(x) -> u(-x): symbol p(x, xi) -> p(-x, -xi)."""
        p = self.principal
        rp = PrincipalSymbol(p.m, p.a_minus.reflect(), p.a_plus.reflect())
        rV = None
        if self.V is not None:
            from .symbols import LowerOrderTerm

            rV = LowerOrderSymbol(
                self.V.kappa, tuple(LowerOrderTerm(-t.j, t.power, t.coeff) for t in self.V.terms)
            )
        rdiv = None
        if self.divergence is not None:
            rdiv = DivergenceOperator(self.divergence.a.reflect(), self.divergence.scale)
        return ToroidalOperator(rp, rV, rdiv, -self.drift, self.symmetrize)

    def to_dict(self) -> dict:
        out = {"m": self.m, "drift": self.drift, "symmetrize": self.symmetrize}
        if self.divergence is not None:
            out["divergence"] = {"a": self.divergence.a.to_dict(), "scale": self.divergence.scale}
        else:
            out["principal"] = self.principal.to_dict()
        if self.V is not None:
            out["V"] = self.V.to_dict()
        return out

    # -- entries --------------------------------------------------------------
    def band_entries(self, d: int, k) -> np.ndarray:
        """A_{k+d, k} for an integer array ``k``."""
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape, dtype=complex)
        if self.divergence is not None:
            ad = self.divergence.a.fourier().get(d, 0.0)
            if ad:
                # -scale (k+d) k a_d: exact for integer k
                out += -self.divergence.scale * (k * (k + d)) * ad
        else:
            fp = self.principal.a_plus.fourier().get(d, 0.0)
            fm = self.principal.a_minus.fourier().get(d, 0.0)
            if fp or fm:
                coef_k = np.where(k > 0, fp, fm)
                if self.symmetrize:
                    coef_j = np.where(k + d > 0, fp, fm)
                    out += (coef_k * _abs_pow(k, self.m) + coef_j * _abs_pow(k + d, self.m)) / 2.0
                else:
                    out += coef_k * _abs_pow(k, self.m)
        if self.V is not None:
            for t in self.V.terms:
                if self.symmetrize or self.divergence is not None:
                    if t.j == d:
                        out += t.coeff * _japanese(k, t.power) / 2.0
                    if t.j == -d:
                        out += np.conj(t.coeff) * _japanese(k + d, t.power) / 2.0
                elif t.j == d:
                    out += t.coeff * _japanese(k, t.power)
        if d == 0 and self.drift:
            out += self.drift * k
        return out

    def rows(self, js, z: complex = 0.0) -> np.ndarray:
        """R[i, e] = (A - z)_{j_i, j_i - b + e}, e = 0..2b."""
        js = np.asarray(js, dtype=float)
        b = self.band_width
        R = np.zeros((js.size, 2 * b + 1), dtype=complex)
        for e in range(2 * b + 1):
            d = b - e  # row j, column k = j - d
            R[:, e] = self.band_entries(d, js - d)
        R[:, b] -= z
        return R

    def lower_order_fourier(self, d: int, xi) -> np.ndarray:
        """x-Fourier coefficient at offset d of (full symbol - principal part), xi > band width.

        The toroidal symbol is sigma(x, xi) = sum_d A_{xi+d, xi} e^{idx}
        extended to real xi; the principal part a_+(x) xi^m is removed
        analytically so that no cancellation occurs at large xi.
        """
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape, dtype=complex)
        if self.divergence is not None:
            ad = self.divergence.a.fourier().get(d, 0.0)
            out += -self.divergence.scale * ad * xi * d
        elif self.symmetrize:
            ad = self.principal.a_plus.fourier().get(d, 0.0)
            if ad and d:
                out += ad * xi**self.m * np.expm1(self.m * np.log1p(d / xi)) / 2.0
        if self.V is not None:
            for t in self.V.terms:
                if self.symmetrize or self.divergence is not None:
                    if t.j == d:
                        out += t.coeff * _japanese(xi, t.power) / 2.0
                    if t.j == -d:
                        out += np.conj(t.coeff) * _japanese(xi + d, t.power) / 2.0
                elif t.j == d:
                    out += t.coeff * _japanese(xi, t.power)
        if d == 0 and self.drift:
            out += self.drift * xi
        return out


# -- assembly ---------------------------------------------------------------------


@dataclass
class ToroidalMatrix:
    N: int
    entries: np.ndarray
    symmetrized: bool
    band_width: int

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def entry(self, j: int, k: int) -> complex:
        return complex(self.entries[j + self.N, k + self.N])

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))


def assemble(op: ToroidalOperator, N: int) -> ToroidalMatrix:
    """Dense (2N+1)x(2N+1) truncation on indices -N..N."""
    if N < 8:
        raise PreconditionError("truncation half-width must be at least 8")
    b = op.band_width
    ks = np.arange(-N, N + 1)
    A = np.zeros((2 * N + 1, 2 * N + 1), dtype=complex)
    for d in range(-b, b + 1):
        vals = op.band_entries(d, ks)
        rows = ks + d
        ok = np.abs(rows) <= N
        A[rows[ok] + N, ks[ok] + N] = vals[ok]
    sym = op.symmetrize or op.divergence is not None
    if sym:
        # the band formula is Hermitian up to summation order; make it exact
        A = (A + A.conj().T) / 2.0
    return ToroidalMatrix(N, A, sym, b)


def apply(op: ToroidalOperator, k0: int, u: np.ndarray, z: complex = 0.0):
    """Banded product: ``u`` holds coefficients for k = k0..k0+len(u)-1.

    Returns ``(j0, r)`` with r_j = ((A - z) u)_j for j = j0..; all rows
    touched by the support are included.
    """
    u = np.asarray(u, dtype=complex)
    b = op.band_width
    ks = k0 + np.arange(u.size)
    out = np.zeros(u.size + 2 * b, dtype=complex)
    for d in range(-b, b + 1):
        vals = op.band_entries(d, ks)
        if d == 0:
            vals = vals - z
        out[b + d : b + d + u.size] += vals * u
    return k0 - b, out


# -- tail fits --------------------------------------------------------------------


@dataclass
class TailFit:
    exponent: float
    r_squared: float
    n_blocks: int
    stderr: float = 0.0

    @property
    def summable(self) -> bool:
        return self.exponent < SUMMABLE_EXPONENT and self.r_squared >= FIT_R2_MIN

    @property
    def conclusive(self) -> bool:
        # a flat tail has R^2 near 0 by construction; it is still decided
        # when the slope sits many standard errors above the threshold
        if self.r_squared >= FIT_R2_MIN or self.exponent >= 0.0:
            return True
        return self.exponent - SUMMABLE_EXPONENT > 5.0 * self.stderr


def fit_tail(ks: np.ndarray, log_abs: np.ndarray, n_blocks: int = 24) -> TailFit:
    """Power-law fit of block-RMS magnitudes, robust to sign alternation."""
    ks = np.abs(np.asarray(ks, dtype=float))
    log_abs = np.asarray(log_abs, dtype=float)
    if not np.any(np.isfinite(log_abs)):
        return TailFit(-math.inf, 1.0, 0)
    edges = np.geomspace(ks.min(), ks.max() + 1, n_blocks + 1)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (ks >= lo) & (ks < hi)
        if not np.any(sel):
            continue
        la = log_abs[sel]
        rms = 0.5 * (logsumexp(2.0 * la) - math.log(la.size))
        if np.isfinite(rms):
            xs.append(math.log(np.sqrt(lo * hi)))
            ys.append(rms)
    if len(xs) < 3:
        return TailFit(-math.inf, 1.0, len(xs))
    xs, ys = np.array(xs), np.array(ys)
    slope, icpt = np.polyfit(xs, ys, 1)
    res = ys - (slope * xs + icpt)
    tot = np.sum((ys - ys.mean()) ** 2)
    r2 = 1.0 - float(np.sum(res**2) / tot) if tot > 0 else 1.0
    sxx = np.sum((xs - xs.mean()) ** 2)
    stderr = math.sqrt(np.sum(res**2) / (len(xs) - 2) / sxx) if len(xs) > 2 else math.inf
    return TailFit(float(slope), r2, len(xs), float(stderr))


# -- shooting ---------------------------------------------------------------------


@dataclass
class ShootingSolution:
    """One basis solution of (A - z)u = 0 restricted to one frequency direction.

    ``coeffs[i]`` is u_{sign*i} for i = 0..k_max (normalized so that the first
    nonzero coefficient is 1 when representable, else by the largest one).
    """

    direction: str
    z: complex
    coeffs: np.ndarray
    log_abs: np.ndarray
    decay_exponent_fit: float
    r_squared: float
    singular_value: float
    summable: bool
    conclusive: bool
    normalization: str

    @property
    def k_max(self) -> int:
        return self.coeffs.size - 1


class _Sweep:
    """Log-scaled parametric solution of all rows of (A - z)u = 0 on [-K, K]."""

    def __init__(self, op: ToroidalOperator, z: complex, K: int, param_cap: int = 64):
        b = op.band_width
        if b == 0:
            raise PreconditionError("shooting needs a banded, non-diagonal operator")
        self.op, self.z, self.K, self.b = op, complex(z), K, b
        n = 2 * K + 1
        self.off = K
        cap = 2 * b + param_cap
        self.V = np.zeros((n, cap), dtype=complex)
        self.L = np.full(n, -math.inf)
        self.P = 2 * b
        for i, k in enumerate(range(-b, b)):
            self.V[k + self.off, i] = 1.0
            self.L[k + self.off] = 0.0
        self.constraints: list = []
        self.degenerate_rows: list = []
        self._run(+1)
        self._run(-1)
        C = np.array([c[: self.P] for c in self.constraints]) if self.constraints else None
        if C is None:
            self.null = np.eye(self.P, dtype=complex)
        else:
            self.null = sla.null_space(C, rcond=1e-12)
        self.V = self.V[:, : self.P]

    def _run(self, sign: int):
        b, K = self.b, self.K
        js = np.arange(0, K - b + 1) if sign > 0 else -np.arange(1, K - b + 1)
        R = self.op.rows(js, self.z)
        for i, j in enumerate(js):
            row = R[i]
            if sign > 0:
                known = np.arange(j - b, j + b)
                coefs, lead, new = row[: 2 * b], row[2 * b], j + b
            else:
                known = np.arange(j - b + 1, j + b + 1)
                coefs, lead, new = row[1:], row[0], j - b
            Ls = self.L[known + self.off]
            Lm = Ls.max()
            if np.isfinite(Lm):
                w = (coefs * np.exp(Ls - Lm)) @ self.V[known + self.off]
            else:
                w = np.zeros(self.V.shape[1], dtype=complex)
            scale = np.abs(row).max()
            if abs(lead) <= DEGENERATE_LEAD * scale:
                self.degenerate_rows.append(int(j))
                nw = np.abs(w).max()
                if nw > 0:
                    self.constraints.append(w / nw)
                if self.P >= self.V.shape[1]:
                    raise RecurrenceBreakdown(f"too many degenerate rows near k = {j}")
                self.V[new + self.off, self.P] = 1.0
                self.L[new + self.off] = 0.0
                self.P += 1
                continue
            vec = -w / lead
            nv = np.abs(vec).max()
            if nv == 0 or not np.isfinite(nv):
                if not np.isfinite(nv):
                    raise RecurrenceBreakdown(f"non-finite coefficient at k = {new}")
                continue
            self.V[new + self.off] = vec / nv
            self.L[new + self.off] = Lm + math.log(nv)

    @property
    def dim(self) -> int:
        return self.null.shape[1]

    def log_coeffs(self, phi: np.ndarray, ks: np.ndarray):
        """(log|u_k|, phase vector) for the solution with S-coordinates ``phi``."""
        theta = self.null @ phi
        vals = self.V[ks + self.off] @ theta
        with np.errstate(divide="ignore"):
            la = self.L[ks + self.off] + np.log(np.abs(vals))
        return la, vals

    def tail_basis(self, sign: int):
        """Basis of S ordered from most recessive to most dominant at the far end."""
        K, b = self.K, self.b
        top = np.arange(K - max(8, 4 * self.dim), K + 1)
        ks = sign * top
        Ls = self.L[ks + self.off]
        Lm = Ls.max() if np.isfinite(Ls.max()) else 0.0
        M = (np.exp(Ls - Lm)[:, None] * self.V[ks + self.off]) @ self.null
        _, s, Vh = np.linalg.svd(M)
        s_full = np.zeros(self.dim)
        s_full[: s.size] = s
        order = np.argsort(s_full)
        return [(float(s_full[i]), Vh[i].conj()) for i in order]

    def solution(self, sign: int, phi: np.ndarray, singular_value: float, window: float = 10.0):
        K = self.K
        idx = np.arange(0, K + 1)
        la, vals = self.log_coeffs(phi, sign * idx)
        lo = int(K / window)
        fit = fit_tail(idx[lo:], la[lo:])
        nz = np.flatnonzero(np.isfinite(la) & (np.abs(vals) > 0))
        coeffs = np.zeros(K + 1, dtype=complex)
        norm = "first"
        if nz.size:
            i0 = nz[0]
            ref_L, ref_v = self.L[sign * i0 + self.off], vals[i0]
            with np.errstate(over="ignore", invalid="ignore"):
                c = np.exp(self.L[sign * idx + self.off] - ref_L) * vals / ref_v
            if not np.all(np.isfinite(c[np.isfinite(la)])):
                norm = "max"
                imax = int(np.nanargmax(np.where(np.isfinite(la), la, -np.inf)))
                ref_L, ref_v = self.L[sign * imax + self.off], vals[imax]
                with np.errstate(under="ignore"):
                    c = np.exp(self.L[sign * idx + self.off] - ref_L) * vals / ref_v
            coeffs = np.where(np.isfinite(c), c, 0.0)
        return ShootingSolution(
            direction="positive" if sign > 0 else "negative",
            z=self.z,
            coeffs=coeffs,
            log_abs=la,
            decay_exponent_fit=fit.exponent,
            r_squared=fit.r_squared,
            singular_value=singular_value,
            summable=fit.summable,
            conclusive=fit.conclusive,
            normalization=norm,
        )

    def summable_subspace(self, sign: int):
        sols, basis = [], []
        for s, phi in self.tail_basis(sign):
            sol = self.solution(sign, phi, s)
            sols.append(sol)
            if sol.summable:
                basis.append(phi)
        B = np.array(basis).T if basis else np.zeros((self.dim, 0), dtype=complex)
        return sols, B


def shoot(op: ToroidalOperator, z: complex, direction: str = "positive", k_max: int = K_MAX_SHOOT):
    """Basis solutions of (A - z)u = 0 seen from one frequency direction.

    All rows -k_max..k_max are solved outward from the initial segment
    u_{-b}..u_{b-1}; rows whose outermost coefficient vanishes become
    constraints and release a fresh free coefficient.  The returned basis
    spans the full solution space, ordered from most recessive to most
    dominant at |k| = k_max.
    """
    sign = +1 if direction.startswith("pos") else -1
    sweep = _Sweep(op, z, k_max)
    return [sweep.solution(sign, phi, s) for s, phi in sweep.tail_basis(sign)]


def _intersection(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal vectors of span(A) and span(B) with cosine above ANGLE_COS_MIN."""
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    Qa, Qb = sla.orth(A), sla.orth(B)
    U, cos, _ = np.linalg.svd(Qa.conj().T @ Qb)
    keep = cos > ANGLE_COS_MIN
    return (Qa @ U)[:, : cos.size][:, keep]


@dataclass
class DeficiencyReport:
    n_plus_lower_bound: int
    n_minus_lower_bound: int
    esa_consistent: bool
    analytic_verdict: str
    agrees: bool
    tail_exponents: list
    tail_exponent_target: float
    growth_rates: dict
    inconclusive: list = field(default_factory=list)
    solutions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_plus_lower_bound": self.n_plus_lower_bound,
            "n_minus_lower_bound": self.n_minus_lower_bound,
            "esa_consistent": self.esa_consistent,
            "analytic_verdict": self.analytic_verdict,
            "agrees": self.agrees,
            "tail_exponents": self.tail_exponents,
            "tail_exponent_target": self.tail_exponent_target,
            "growth_rates": self.growth_rates,
            "inconclusive": self.inconclusive,
        }


def _count(op, z, k_max):
    sweep = _Sweep(op, z, k_max)
    sols_p, Bp = sweep.summable_subspace(+1)
    sols_m, Bm = sweep.summable_subspace(-1)
    both = _intersection(Bp, Bm)
    l2 = []
    for phi in both.T:
        for sign in (+1, -1):
            l2.append(sweep.solution(sign, phi, 0.0))
    return both.shape[1], sols_p, sols_m, l2


def deficiency_probe(op: ToroidalOperator, z_pair=(1j, -1j), k_max: int = K_MAX_SHOOT,
                     strict: bool = True) -> DeficiencyReport:
    """Lower bounds for the deficiency indices from square-summable shooting solutions.

    A solution counts when it is summable towards both +infinity and
    -infinity: the dimension of the intersection of the two summable
    subspaces (principal-angle test) is the lower bound.
    """
    counts, tails, growth, bad, all_sols = [], [], {}, [], {}
    for z in z_pair:
        n, sp, sm, l2 = _count(op, z, k_max)
        counts.append(n)
        all_sols[str(complex(z))] = sp + sm
        for s in l2:
            if np.isfinite(s.decay_exponent_fit):
                tails.append(s.decay_exponent_fit)
        for s in sp + sm:
            key = f"{complex(z)}:{s.direction}"
            growth.setdefault(key, []).append(s.decay_exponent_fit)
            if not s.conclusive:
                bad.append({"z": str(complex(z)), "direction": s.direction,
                            "exponent": s.decay_exponent_fit, "r_squared": s.r_squared})
    report = classify_esa(op.principal, op.V)
    consistent = counts[0] == 0 and counts[1] == 0
    rep = DeficiencyReport(
        n_plus_lower_bound=counts[0],
        n_minus_lower_bound=counts[1],
        esa_consistent=consistent,
        analytic_verdict=report.esa_verdict.value,
        agrees=consistent == (report.esa_verdict == EsaVerdict.ESA),
        tail_exponents=tails,
        tail_exponent_target=-op.m / 2.0,
        growth_rates=growth,
        inconclusive=bad,
        solutions=all_sols,
    )
    if strict and bad:
        err = InconclusiveFit(f"{len(bad)} tail fit(s) below R^2 = {FIT_R2_MIN}")
        err.report = rep
        raise err
    return rep


def interior_residual(op: ToroidalOperator, z: complex, sol: ShootingSolution) -> float:
    """||(A - z)u|| / ||u|| over the rows whose band lies inside the truncation."""
    K, b = sol.k_max, op.band_width
    sign = 1 if sol.direction == "positive" else -1
    u = sol.coeffs if sign > 0 else sol.coeffs[::-1]
    k0 = 0 if sign > 0 else -K
    j0, r = apply(op, k0, u, z)
    js = j0 + np.arange(r.size)
    # rows whose whole band lies inside the stored support
    inner = (js - b >= k0) & (js + b <= k0 + K)
    return float(np.linalg.norm(r[inner]) / np.linalg.norm(u))


# -- spectra ----------------------------------------------------------------------


@dataclass
class SpectrumReport:
    N_list: list
    eigenvalues: dict
    elliptic: bool
    label: str
    cauchy: dict
    spacing: dict
    sigma_min: dict
    hermitian_defect: dict

    def to_dict(self) -> dict:
        return {
            "N_list": self.N_list,
            "label": self.label,
            "elliptic": self.elliptic,
            "eigenvalues": {str(n): list(map(float, v)) for n, v in self.eigenvalues.items()},
            "cauchy": {k: list(map(float, v)) for k, v in self.cauchy.items()},
            "spacing": self.spacing,
            "sigma_min": self.sigma_min,
            "hermitian_defect": self.hermitian_defect,
        }


def _nearest_zero(ev: np.ndarray, count: int) -> np.ndarray:
    return np.sort(ev[np.argsort(np.abs(ev))[:count]])


def _spacing_stats(ev: np.ndarray) -> dict:
    n = ev.size
    mid = np.sort(ev)[n // 4 : 3 * n // 4]
    gaps = np.diff(mid)
    if gaps.size < 2 or gaps.mean() == 0:
        return {"mean": 0.0, "std_normalized": 0.0}
    g = gaps / gaps.mean()
    return {"mean": float(gaps.mean()), "std_normalized": float(g.std())}


def _sigma_min(op: ToroidalOperator, N: int, z: complex) -> float:
    b = op.band_width
    ks = np.arange(-N, N + 1)
    R = np.zeros((2 * N + 1 + 2 * b, 2 * N + 1), dtype=complex)
    for d in range(-b, b + 1):
        vals = op.band_entries(d, ks)
        if d == 0:
            vals = vals - z
        R[ks + N + b + d, ks + N] = vals
    return float(sla.svdvals(R)[-1])


def spectrum(op: ToroidalOperator, N_list, n_track: int = 10, z_probe: complex = 1j,
             sigma_min_max_N: int = 256) -> SpectrumReport:
    """Eigenvalues of symmetrized truncations with convergence diagnostics."""
    N_list = sorted(int(n) for n in N_list)
    evs, defects, smin = {}, {}, {}
    for N in N_list:
        M = assemble(op, N)
        defects[str(N)] = M.hermitian_defect()
        evs[N] = sla.eigvalsh(M.entries)
        if N <= sigma_min_max_N:
            smin[str(N)] = _sigma_min(op, N, z_probe)
    elliptic = op.principal.is_elliptic()
    cauchy = {}
    for a, b in zip(N_list[:-1], N_list[1:]):
        cauchy[f"{a}->{b}"] = np.abs(_nearest_zero(evs[b], n_track) - _nearest_zero(evs[a], n_track))
    spacing = {str(N): _spacing_stats(evs[N]) for N in N_list}
    return SpectrumReport(
        N_list=N_list,
        eigenvalues=evs,
        elliptic=elliptic,
        label="elliptic: Cauchy differences of the eigenvalues nearest 0" if elliptic else NON_CERTIFICATE_LABEL,
        cauchy=cauchy,
        spacing=spacing,
        sigma_min=smin,
        hermitian_defect=defects,
    )


# -- Lorentzian modes -------------------------------------------------------------


def lorentzian_operator(epsilon: float, ell: int, n: int) -> ToroidalOperator:
    """Mode n of epsilon d/dx(sin(ell x) d/dx) - 2n D_x."""
    if epsilon == 0 or ell == 0:
        raise PreconditionError("need epsilon != 0 and ell != 0")
    return ToroidalOperator.from_divergence(TrigPoly.sin(ell), scale=epsilon, drift=-2.0 * n)


def lorentzian_modes(epsilon: float, ell: int, n_range, N: int) -> dict:
    return {int(n): assemble(lorentzian_operator(epsilon, ell, n), N) for n in n_range}


@dataclass
class LorentzianWitness:
    epsilon: float
    ell: int
    k_max: int
    residual: float
    decay_exponent: float
    block_matches: bool


def lorentzian_witness(epsilon: float = 1.0, ell: int = 1, k_max: int = 2048, z: complex = 1j):
    """Lift the summable n = 0 shooting solution to w(x, y) = u(x) and check (Box - z)w = 0."""
    op0 = lorentzian_operator(epsilon, ell, 0)
    base = ToroidalOperator.from_divergence(TrigPoly.sin(ell))
    M0 = assemble(op0, 16).entries
    M1 = assemble(base, 16).entries
    sols = [s for s in shoot(op0, z, "positive", k_max) if s.summable and np.any(s.coeffs)]
    if not sols:
        return LorentzianWitness(epsilon, ell, k_max, math.inf, math.nan, bool(np.array_equal(M0, epsilon * M1)))
    sol = sols[0]
    return LorentzianWitness(
        epsilon, ell, k_max, interior_residual(op0, z, sol), sol.decay_exponent_fit,
        bool(np.array_equal(M0, epsilon * M1)),
    )
