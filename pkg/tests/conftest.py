import math

import numpy as np
import pytest

from rpcircle.spectral import ToroidalOperator
from rpcircle.symbols import PrincipalSymbol
from rpcircle.trigpoly import TrigPoly

SIN = TrigPoly.sin(1)
ELLIPTIC = TrigPoly([2.0], [1.0])


def symbol(a: TrigPoly, m: float) -> PrincipalSymbol:
    return PrincipalSymbol.even(a, m)


@pytest.fixture
def sin_m2():
    return symbol(SIN, 2.0)


@pytest.fixture
def divergence_sin():
    return ToroidalOperator.from_divergence(SIN)


@pytest.fixture
def divergence_elliptic():
    return ToroidalOperator.from_divergence(ELLIPTIC)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def wrap(d: float) -> float:
    return (d + math.pi) % (2 * math.pi) - math.pi


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number: int, ok: bool, detail: str) -> bool:
        lines[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
