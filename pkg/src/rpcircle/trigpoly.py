"""Finite real Fourier series on the circle T = R / 2piZ."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateSymbol

TWO_PI = 2.0 * math.pi

ROOT_TOL = 1e-10
DERIVATIVE_FLOOR = 1e-8
CLUSTER_GAP = 1e-6
MIN_SAMPLES = 4096


def _trim(arr: np.ndarray) -> np.ndarray:
    n = len(arr)
    while n > 1 and arr[n - 1] == 0.0:
        n -= 1
    return arr[:n]


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """a(x) = c_0 + sum_j (c_j cos jx + s_j sin jx).

    ``cos_coeffs[j]`` is c_j for j >= 0 and ``sin_coeffs[j - 1]`` is s_j for
    j >= 1.  Instances are immutable; arithmetic returns new objects.
    """

    cos_coeffs: tuple
    sin_coeffs: tuple

    def __init__(self, cos_coeffs: Sequence[float] = (0.0,), sin_coeffs: Sequence[float] = ()):
        c = np.asarray(cos_coeffs, dtype=float).ravel()
        s = np.asarray(sin_coeffs, dtype=float).ravel()
        if c.size == 0:
            c = np.zeros(1)
        deg = max(c.size - 1, s.size)
        c = np.pad(c, (0, deg + 1 - c.size))
        s = np.pad(s, (0, deg - s.size))
        # drop trailing zero harmonics
        full = _trim(np.concatenate([[1.0], np.abs(c[1:]) + np.abs(s)]))
        deg = full.size - 1
        object.__setattr__(self, "cos_coeffs", tuple(float(v) for v in c[: deg + 1]))
        object.__setattr__(self, "sin_coeffs", tuple(float(v) for v in s[:deg]))

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value: float) -> "TrigPoly":
        return cls([value])

    @classmethod
    def sin(cls, k: int = 1, amplitude: float = 1.0) -> "TrigPoly":
        if k == 0:
            return cls([0.0])
        s = np.zeros(abs(k))
        s[-1] = amplitude * np.sign(k)
        return cls([0.0], s)

    @classmethod
    def cos(cls, k: int = 1, amplitude: float = 1.0) -> "TrigPoly":
        c = np.zeros(abs(k) + 1)
        c[-1] = amplitude
        return cls(c)

    @classmethod
    def from_fourier(cls, coeffs: dict) -> "TrigPoly":
        """Build from complex coefficients {n: a_n}; the imaginary part of the
        resulting real function is discarded (inputs are assumed Hermitian)."""
        deg = max((abs(n) for n in coeffs), default=0)
        c = np.zeros(deg + 1)
        s = np.zeros(deg)
        c[0] = complex(coeffs.get(0, 0.0)).real
        for j in range(1, deg + 1):
            ap = complex(coeffs.get(j, 0.0))
            am = complex(coeffs.get(-j, 0.0))
            c[j] = (ap + am).real
            s[j - 1] = (1j * (ap - am)).real
        return cls(c, s)

    @classmethod
    def from_dict(cls, data: dict) -> "TrigPoly":
        return cls(data.get("cos", [0.0]), data.get("sin", []))

    def to_dict(self) -> dict:
        return {"cos": list(self.cos_coeffs), "sin": list(self.sin_coeffs)}

    # -- basic properties -------------------------------------------------
    @property
    def degree(self) -> int:
        return len(self.cos_coeffs) - 1

    def is_zero(self) -> bool:
        return not any(self.cos_coeffs) and not any(self.sin_coeffs)

    def fourier(self) -> dict:
        """Complex coefficients a_n with a(x) = sum_n a_n e^{inx}."""
        out = {0: complex(self.cos_coeffs[0])}
        for j in range(1, self.degree + 1):
            c, s = self.cos_coeffs[j], self.sin_coeffs[j - 1]
            out[j] = complex(c / 2.0, -s / 2.0)
            out[-j] = complex(c / 2.0, s / 2.0)
        return out

    def __call__(self, x):
        if isinstance(x, (float, int)):
            # scalar fast path; ODE right-hand sides call this per stage
            out = self.cos_coeffs[0]
            for j in range(1, self.degree + 1):
                out += self.cos_coeffs[j] * math.cos(j * x) + self.sin_coeffs[j - 1] * math.sin(j * x)
            return out
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.cos_coeffs[0])
        for j in range(1, self.degree + 1):
            c, s = self.cos_coeffs[j], self.sin_coeffs[j - 1]
            if c:
                out = out + c * np.cos(j * x)
            if s:
                out = out + s * np.sin(j * x)
        return out if out.ndim else float(out)

    # -- calculus ---------------------------------------------------------
    def derivative(self, order: int = 1) -> "TrigPoly":
        c = np.array(self.cos_coeffs)
        s = np.array(self.sin_coeffs)
        for _ in range(order):
            j = np.arange(1, len(c))
            new_c = np.concatenate([[0.0], j * s])
            new_s = -j * c[1:]
            c, s = new_c, new_s
        return TrigPoly(c, s)

    def taylor(self, x0: float, order: int) -> np.ndarray:
        """Taylor coefficients a^{(k)}(x0) / k! for k = 0..order."""
        out = np.empty(order + 1)
        d = self
        for k in range(order + 1):
            out[k] = d(x0) / math.factorial(k)
            d = d.derivative()
        return out

    def shift(self, x0: float) -> "TrigPoly":
        """x -> a(x + x0)."""
        f = self.fourier()
        return TrigPoly.from_fourier({n: v * np.exp(1j * n * x0) for n, v in f.items()})

    def reflect(self) -> "TrigPoly":
        """x -> a(-x)."""
        return TrigPoly(self.cos_coeffs, [-v for v in self.sin_coeffs])

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly.constant(float(other))
        deg = max(self.degree, other.degree)
        c = np.zeros(deg + 1)
        s = np.zeros(deg)
        c[: self.degree + 1] += self.cos_coeffs
        c[: other.degree + 1] += other.cos_coeffs
        s[: self.degree] += self.sin_coeffs
        s[: other.degree] += other.sin_coeffs
        return TrigPoly(c, s)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly([-v for v in self.cos_coeffs], [-v for v in self.sin_coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TrigPoly):
            k = float(other)
            return TrigPoly([k * v for v in self.cos_coeffs], [k * v for v in self.sin_coeffs])
        f, g = self.fourier(), other.fourier()
        h: dict = {}
        for n, a in f.items():
            for k, b in g.items():
                h[n + k] = h.get(n + k, 0.0) + a * b
        return TrigPoly.from_fourier(h)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = TrigPoly.constant(1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __repr__(self):
        return f"TrigPoly(cos={list(self.cos_coeffs)}, sin={list(self.sin_coeffs)})"


def _periodic_gap(x: float, y: float) -> float:
    d = abs(x - y) % TWO_PI
    return min(d, TWO_PI - d)


def find_zeros(a: TrigPoly, tol: float = ROOT_TOL, cluster_gap: float = CLUSTER_GAP):
    """Roots of ``a`` on [0, 2pi) as a sorted list of ``(x, a'(x))`` pairs.

    Simple roots are bracketed by sign changes on a dense grid and refined
    with Brent's method; even-order roots show up as local minima of |a|
    and are refined on a' instead.
    """
    if a.is_zero():
        raise DegenerateSymbol("trigonometric polynomial is identically zero")
    da = a.derivative()
    n = max(MIN_SAMPLES, 8 * max(a.degree, 1))
    xs = np.linspace(0.0, TWO_PI, n, endpoint=False)
    h = TWO_PI / n
    vals = a(xs)
    nxt = np.roll(vals, -1)

    candidates = []
    for i in np.flatnonzero(vals == 0.0):
        candidates.append(xs[i])
    for i in np.flatnonzero(vals * nxt < 0.0):
        lo, hi = xs[i], xs[i] + h
        # the wrap-around bracket ends at 2pi, not 0, so its signs can differ at roundoff level
        flo, fhi = a(lo), a(hi)
        if flo * fhi < 0.0:
            candidates.append(brentq(a, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200))
        else:
            candidates.append(lo if abs(flo) <= abs(fhi) else hi)

    absv = np.abs(vals)
    prev_abs, next_abs = np.roll(absv, 1), np.roll(absv, -1)
    for i in np.flatnonzero((absv <= prev_abs) & (absv <= next_abs) & (absv > 0.0)):
        lo, hi = xs[i] - h, xs[i] + h
        dlo, dhi = da(lo), da(hi)
        if dlo == 0.0:
            x = lo
        elif dhi == 0.0:
            x = hi
        elif dlo * dhi < 0.0:
            x = brentq(da, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        else:
            continue
        if abs(a(x)) < tol:
            candidates.append(x)

    roots: list = []
    for x in sorted(float(v) % TWO_PI for v in candidates):
        if abs(a(x)) >= tol:
            continue
        if roots and _periodic_gap(roots[-1], x) < cluster_gap:
            continue
        roots.append(x)
    if len(roots) > 1 and _periodic_gap(roots[0], roots[-1]) < cluster_gap:
        roots.pop()
    return [(x, float(da(x))) for x in roots]
