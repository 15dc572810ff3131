"""Square-summable solution of (P - i)u = 0 for P = d/dx (sin x d/dx).

The Fourier coefficients obey a three-term recurrence; shooting from
u_0 = 0, u_1 = 1 gives a sequence decaying like 1/k, so P is not
essentially self-adjoint.  Elliptic and first-order controls have none.

Run: python demos/deficiency_witness.py
"""

import numpy as np

from rpcircle.spectral import ToroidalOperator, deficiency_probe, interior_residual, shoot
from rpcircle.symbols import PrincipalSymbol
from rpcircle.trigpoly import TrigPoly


def main():
    op = ToroidalOperator.from_divergence(TrigPoly.sin(1))
    sol = next(s for s in shoot(op, 1j, "positive", 2048) if s.summable and np.any(s.coeffs))
    print("u_0..u_5 =", np.round(sol.coeffs[:6].real, 6))
    print(f"decay exponent {sol.decay_exponent_fit:.3f}, interior residual {interior_residual(op, 1j, sol):.1e}")

    cases = {
        "d/dx(sin x d/dx)": op,
        "d/dx((2 + sin x) d/dx)": ToroidalOperator.from_divergence(TrigPoly([2.0], [1.0])),
        "Op((sin x)|xi|)": ToroidalOperator.from_symbol(PrincipalSymbol.even(TrigPoly.sin(1), 1.0)),
    }
    for name, o in cases.items():
        rep = deficiency_probe(o, k_max=2048)
        print(f"{name:<24} n+ >= {rep.n_plus_lower_bound}, n- >= {rep.n_minus_lower_bound}, "
              f"analytic verdict {rep.analytic_verdict}")


if __name__ == "__main__":
    main()
