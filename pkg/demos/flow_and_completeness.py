"""Blow-up of the Hamilton flow for (sin x) xi^2 and the completeness rule m <= k.

Run: python demos/flow_and_completeness.py
"""

import math

from rpcircle.hamflow import PhasePoint, completeness_probe, integrate_flow
from rpcircle.symbols import PrincipalSymbol, analytic_completeness
from rpcircle.trigpoly import TrigPoly


def main():
    p = PrincipalSymbol.even(TrigPoly.sin(1), 2.0)
    tr = integrate_flow(p, PhasePoint(math.pi, 1.0), (0.0, 5.0))
    print(f"seed (pi, 1): {tr.outcome.kind.value} at t = {tr.outcome.blowup_time:.9f} (closed form 1)")
    print(f"  |xi| reached {abs(tr.xi[-1]):.3e}, energy drift {tr.energy_drift():.1e}")

    print("\nk-characteristic zeros of sin^k x, flow probe vs order rule:")
    print("  k    m   probe        rule")
    for k in (1, 2, 3):
        for m in (1.0, 2.0, 3.0):
            q = PrincipalSymbol.even(TrigPoly.sin(1) ** k, m)
            probe = completeness_probe(q, stop_at_first=True).verdict.value
            rule = analytic_completeness(q)[0].value
            print(f"  {k}  {m:3.1f}   {probe:<11}  {rule}")


if __name__ == "__main__":
    main()
