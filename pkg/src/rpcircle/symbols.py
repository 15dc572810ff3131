"""Homogeneous symbols a_{+-}(x)|xi|^m on T*T \\ 0 and their pointwise classification."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    NotCharacteristic,
    NotPrincipalType,
    OrderOverflow,
    UnsupportedOrder,
)
from .trigpoly import DERIVATIVE_FLOOR, ROOT_TOL, TrigPoly, find_zeros

K_MAX = 12


class EsaVerdict(str, Enum):
    ESA = "ESA"
    NOT_ESA = "NotESA"


class Completeness(str, Enum):
    COMPLETE = "Complete"
    INCOMPLETE = "Incomplete"
    UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class PrincipalSymbol:
    """p(x, xi) = a_plus(x)|xi|^m for xi > 0 and a_minus(x)|xi|^m for xi < 0."""

    m: float
    a_plus: TrigPoly
    a_minus: TrigPoly

    def __post_init__(self):
        if not self.m > 0:
            raise UnsupportedOrder(f"order must be positive, got {self.m}")

    @classmethod
    def even(cls, a: TrigPoly, m: float) -> "PrincipalSymbol":
        return cls(float(m), a, a)

    def branch(self, sign: int) -> TrigPoly:
        return self.a_plus if sign > 0 else self.a_minus

    def __call__(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        mag = np.abs(xi) ** self.m
        out = np.where(xi > 0, self.a_plus(x) * mag, self.a_minus(x) * mag)
        out = np.where(xi == 0, 0.0, out)
        return out if out.ndim else float(out)

    def is_elliptic(self) -> bool:
        return not find_zeros(self.a_plus) and not find_zeros(self.a_minus)

    def to_dict(self) -> dict:
        return {"m": self.m, "a_plus": self.a_plus.to_dict(), "a_minus": self.a_minus.to_dict()}


@dataclass(frozen=True)
class LowerOrderTerm:
    """coeff * <xi>^power * e^{ijx}"""

    j: int
    power: float
    coeff: complex


@dataclass(frozen=True)
class LowerOrderSymbol:
    kappa: float
    terms: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")

    def check_order(self, m: float) -> None:
        for t in self.terms:
            if t.power > m - self.kappa + 1e-12:
                raise ValueError(
                    f"term e^{{i{t.j}x}}<xi>^{t.power} exceeds order m - kappa = {m - self.kappa}"
                )

    @classmethod
    def from_trig(cls, a: TrigPoly, power: float, kappa: float) -> "LowerOrderSymbol":
        """V(x, xi) = a(x) <xi>^power."""
        terms = tuple(
            LowerOrderTerm(n, power, complex(v)) for n, v in sorted(a.fourier().items()) if v != 0
        )
        return cls(kappa, terms)

    def __call__(self, x, xi):
        x = np.asarray(x, dtype=float)
        jap = np.sqrt(1.0 + np.asarray(xi, dtype=float) ** 2)
        out = np.zeros(np.broadcast(x, jap).shape, dtype=complex)
        for t in self.terms:
            out = out + t.coeff * jap**t.power * np.exp(1j * t.j * x)
        return out

    @property
    def band_width(self) -> int:
        return max((abs(t.j) for t in self.terms), default=0)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "terms": [
                {"j": t.j, "power": t.power, "re": complex(t.coeff).real, "im": complex(t.coeff).imag}
                for t in self.terms
            ],
        }


@dataclass(frozen=True)
class DivergenceOperator:
    """P = scale * d/dx (a(x) d/dx), assembled exactly in Fourier space.

    Full symbol: -scale*a(x) xi^2 + i*scale*a'(x) xi.
    """

    a: TrigPoly
    scale: float = 1.0

    @property
    def principal(self) -> PrincipalSymbol:
        b = self.a * (-self.scale)
        return PrincipalSymbol(2.0, b, b)


@dataclass
class ZeroSets:
    z_plus: list
    z_minus: list
    z_pp: list
    z_pm: list
    z_mp: list
    z_mm: list
    derivatives: dict = field(default_factory=dict)

    def balanced(self) -> bool:
        return len(self.z_pp) == len(self.z_pm) and len(self.z_mp) == len(self.z_mm)

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in ("z_plus", "z_minus", "z_pp", "z_pm", "z_mp", "z_mm")}


@dataclass
class ClassificationReport:
    m: float
    is_principal_type: bool
    witness: float | None
    is_elliptic: bool
    char_orders: dict
    esa_verdict: EsaVerdict | None
    completeness_verdict: Completeness | None
    completeness_witness: tuple | None
    branch: str
    near_threshold: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "is_principal_type": self.is_principal_type,
            "witness": self.witness,
            "is_elliptic": self.is_elliptic,
            "char_orders": [
                {"x0": x0, "fiber_sign": s, "k": k} for (x0, s), k in sorted(self.char_orders.items())
            ],
            "esa_verdict": None if self.esa_verdict is None else self.esa_verdict.value,
            "completeness_verdict": None
            if self.completeness_verdict is None
            else self.completeness_verdict.value,
            "completeness_witness": None
            if self.completeness_witness is None
            else list(self.completeness_witness),
            "branch": self.branch,
            "near_threshold": self.near_threshold,
        }


def is_real_principal_type(p: PrincipalSymbol, floor: float = DERIVATIVE_FLOOR):
    """Return ``(ok, witness)``; witness is the first root with |a'| <= floor."""
    for a in (p.a_plus, p.a_minus):
        for x, d in find_zeros(a):
            if abs(d) <= floor:
                return False, x
    return True, None


def zero_sets(p: PrincipalSymbol) -> ZeroSets:
    ok, witness = is_real_principal_type(p)
    if not ok:
        raise NotPrincipalType(f"a' vanishes at the zero x = {witness}", witness)
    zp = find_zeros(p.a_plus)
    zm = find_zeros(p.a_minus)
    derivs = {("+", x): d for x, d in zp}
    derivs.update({("-", x): d for x, d in zm})
    return ZeroSets(
        z_plus=[x for x, _ in zp],
        z_minus=[x for x, _ in zm],
        z_pp=[x for x, d in zp if d > 0],
        z_pm=[x for x, d in zp if d < 0],
        z_mp=[x for x, d in zm if d > 0],
        z_mm=[x for x, d in zm if d < 0],
        derivatives=derivs,
    )


def characteristic_order(p: PrincipalSymbol, x0: float, fiber_sign: int, k_max: int = K_MAX) -> int:
    """Smallest k with a^{(k)}(x0) != 0, where a is the branch for ``fiber_sign``."""
    a = p.branch(fiber_sign)
    if abs(a(x0)) >= ROOT_TOL:
        raise NotCharacteristic(f"a({x0}) = {a(x0)} is not a zero")
    d = a
    for k in range(1, k_max + 1):
        d = d.derivative()
        if abs(d(x0)) > DERIVATIVE_FLOOR:
            return k
    raise OrderOverflow(f"all derivatives up to order {k_max} vanish at x = {x0}")


def radial_sets(p: PrincipalSymbol) -> dict:
    """Radial source and sink at fiber infinity as lists of ``(x0, fiber_sign)``."""
    if p.m <= 0:
        raise UnsupportedOrder("no radial source or sink for m <= 0")
    z = zero_sets(p)
    return {
        "source": [(x, +1) for x in z.z_pp] + [(x, -1) for x in z.z_mm],
        "sink": [(x, +1) for x in z.z_pm] + [(x, -1) for x in z.z_mp],
    }


def characteristic_points(p: PrincipalSymbol) -> list:
    """All ``(x0, fiber_sign)`` with a_{sign}(x0) = 0, simple or not."""
    pts = [(x, +1) for x, _ in find_zeros(p.a_plus)]
    pts += [(x, -1) for x, _ in find_zeros(p.a_minus)]
    return pts


def analytic_completeness(p: PrincipalSymbol):
    """Completeness at fiber infinity from the order rule.

    Elliptic symbols are complete; otherwise the flow is complete exactly
    when m <= k at every characteristic point of order k.
    Returns ``(verdict, char_orders, witness)``.
    """
    orders = {}
    witness = None
    for x0, s in characteristic_points(p):
        k = characteristic_order(p, x0, s)
        orders[(x0, s)] = k
        if p.m > k and witness is None:
            witness = (x0, float(s))
    verdict = Completeness.COMPLETE if witness is None else Completeness.INCOMPLETE
    return verdict, orders, witness


def _near_threshold(p: PrincipalSymbol) -> list:
    flags = []
    for label, a in (("+", p.a_plus), ("-", p.a_minus)):
        for x, d in find_zeros(a):
            if abs(d) < 10 * DERIVATIVE_FLOOR:
                flags.append({"fiber": label, "x0": x, "derivative": d})
    return flags


def classify_esa(p: PrincipalSymbol, V: LowerOrderSymbol | None = None) -> ClassificationReport:
    """Verdict: ESA iff m <= 1 or the symbol is elliptic (principal type required)."""
    ok, witness = is_real_principal_type(p)
    if not ok:
        raise NotPrincipalType(f"a' vanishes at the zero x = {witness}", witness)
    if V is not None:
        V.check_order(p.m)
    z = zero_sets(p)
    elliptic = not z.z_plus and not z.z_minus
    orders = {(x, +1): 1 for x in z.z_plus}
    orders.update({(x, -1): 1 for x in z.z_minus})
    if elliptic:
        branch = "elliptic"
    elif p.m <= 1:
        branch = "order"
    else:
        branch = "non_elliptic_high_order"
    esa = branch != "non_elliptic_high_order"
    witness_seed = None
    if not esa:
        if z.z_plus:
            witness_seed = (z.z_plus[0], 1.0)
        else:
            witness_seed = (z.z_minus[0], -1.0)
    return ClassificationReport(
        m=p.m,
        is_principal_type=True,
        witness=None,
        is_elliptic=elliptic,
        char_orders=orders,
        esa_verdict=EsaVerdict.ESA if esa else EsaVerdict.NOT_ESA,
        completeness_verdict=Completeness.COMPLETE if esa else Completeness.INCOMPLETE,
        completeness_witness=witness_seed,
        branch=branch,
        near_threshold=_near_threshold(p),
    )


def describe(p: PrincipalSymbol) -> ClassificationReport:
    """Like :func:`classify_esa` but never raises on principal-type failure;
    the report then carries the witness and characteristic orders instead."""
    ok, witness = is_real_principal_type(p)
    if ok:
        return classify_esa(p)
    verdict, orders, cwit = analytic_completeness(p)
    return ClassificationReport(
        m=p.m,
        is_principal_type=False,
        witness=witness,
        is_elliptic=False,
        char_orders=orders,
        esa_verdict=None,
        completeness_verdict=verdict,
        completeness_witness=cwit,
        branch="not_principal_type",
        near_threshold=_near_threshold(p),
    )


__all__ = [
    "ClassificationReport",
    "Completeness",
    "DivergenceOperator",
    "EsaVerdict",
    "LowerOrderSymbol",
    "LowerOrderTerm",
    "PrincipalSymbol",
    "ZeroSets",
    "analytic_completeness",
    "characteristic_order",
    "characteristic_points",
    "classify_esa",
    "describe",
    "is_real_principal_type",
    "radial_sets",
    "zero_sets",
]
