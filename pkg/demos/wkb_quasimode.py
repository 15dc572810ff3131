"""Conormal quasimode at the radial source x = pi of d/dx (sin x d/dx).

Shows the amplitude levels, the Sobolev threshold H^{1/2} and the residual
decay as the transport depth grows.  At z = 0 the quasimode u_n = e^{-i n pi}/n
solves the recurrence exactly, so the residual sits at roundoff; at z = i the
depth gain is visible.

Run: python demos/wkb_quasimode.py
"""

import math

import numpy as np

from rpcircle.spectral import ToroidalOperator
from rpcircle.trigpoly import TrigPoly
from rpcircle.wkb import build_amplitude, local_data, residual_order, sobolev_trend, synthesize


def main():
    op = ToroidalOperator.from_divergence(TrigPoly.sin(1))
    for z in (0.0, 1j):
        amp = build_amplitude(local_data(op, math.pi, z, N=2))
        xi = amp.xi_grid
        print(f"z = {z}: |b_0(xi)| * xi in [{np.min(np.abs(amp.b_levels[0]) * xi):.6f}, "
              f"{np.max(np.abs(amp.b_levels[0]) * xi):.6f}]")
        for chk in amp.checks:
            print(f"  level {chk.level}: order fit {chk.order_fit:.3f} (bound {chk.order_bound:.1f}), "
                  f"transport residual {chk.transport_residual:.1e}")
        state = synthesize(amp, None, N_syn=4096)
        for s in (0.4, 0.5):
            tr = sobolev_trend(state, s)
            print(f"  H^{s}: term exponent {tr.exponent:.3f}, summable {tr.summable}")
        for N in (0, 1, 2):
            rep = residual_order(op, z, synthesize(amp, None, N_syn=128, depth=N), N=N)
            print(f"  depth {N}: residual exponent {rep.fitted_exponent:.3f} "
                  f"(predicted at most {rep.predicted_exponent:.1f})")


if __name__ == "__main__":
    main()
