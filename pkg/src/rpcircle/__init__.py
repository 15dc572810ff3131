"""Real-principal-type operators on the circle: symbols, Hamilton flow,
escape functions, WKB quasimodes and Fourier-space spectral diagnostics."""

from .symbols import (
    ClassificationReport,
    Completeness,
    DivergenceOperator,
    EsaVerdict,
    LowerOrderSymbol,
    PrincipalSymbol,
    classify_esa,
    zero_sets,
)
from .trigpoly import TrigPoly, find_zeros

__version__ = "0.1.0"
