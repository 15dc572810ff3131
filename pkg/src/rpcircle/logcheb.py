"""Functions of the form xi^gamma * H(log xi) with H stored at Chebyshev-Lobatto nodes.

Symbols of order gamma become O(1) functions H of t = log xi, so products,
xi-derivatives and integrals from infinity keep uniform relative accuracy
over many decades of xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct


def cheb_nodes(n: int) -> np.ndarray:
    """Chebyshev-Lobatto nodes cos(pi j / (n-1)), descending from 1 to -1."""
    return np.cos(np.pi * np.arange(n) / (n - 1))


def cheb_diff_matrix(n: int) -> np.ndarray:
    """Differentiation matrix on :func:`cheb_nodes` (negative-sum diagonal)."""
    x = cheb_nodes(n)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    X = np.tile(x, (n, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return D


def values_to_coeffs(v: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through values at the Lobatto nodes."""
    n = len(v)

    def real_dct(w):
        y = dct(w, type=1) / (n - 1)
        y[0] /= 2.0
        y[-1] /= 2.0
        return y

    if np.iscomplexobj(v):
        return real_dct(v.real) + 1j * real_dct(v.imag)
    return real_dct(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class LogGrid:
    """Chebyshev-Lobatto nodes in t = log xi on [log xi_min, log xi_max]."""

    xi_min: float
    xi_max: float
    n: int

    def __post_init__(self):
        if not (0 < self.xi_min < self.xi_max) or self.n < 8:
            raise ValueError("need 0 < xi_min < xi_max and n >= 8")
        t_lo, t_hi = math.log(self.xi_min), math.log(self.xi_max)
        s = cheb_nodes(self.n)
        object.__setattr__(self, "t", t_lo + (s + 1.0) * (t_hi - t_lo) / 2.0)
        object.__setattr__(self, "D", cheb_diff_matrix(self.n) * 2.0 / (t_hi - t_lo))

    @property
    def xi(self) -> np.ndarray:
        return np.exp(self.t)

    @property
    def domain(self):
        return [math.log(self.xi_min), math.log(self.xi_max)]

    def to_unit(self, t):
        lo, hi = self.domain
        return (2.0 * np.asarray(t, dtype=float) - lo - hi) / (hi - lo)


@dataclass(frozen=True)
class LogCheb:
    """f(xi) = xi^gamma * H(log xi); ``h`` holds H at the grid nodes."""

    grid: LogGrid
    gamma: float
    h: np.ndarray

    @classmethod
    def from_function(cls, grid: LogGrid, gamma: float, f) -> "LogCheb":
        xi = grid.xi
        return cls(grid, gamma, np.asarray(f(xi), dtype=complex) * xi ** (-gamma))

    @classmethod
    def power(cls, grid: LogGrid, gamma: float, coeff: complex = 1.0) -> "LogCheb":
        return cls(grid, gamma, np.full(grid.n, coeff, dtype=complex))

    @classmethod
    def zero(cls, grid: LogGrid, gamma: float = 0.0) -> "LogCheb":
        return cls(grid, gamma, np.zeros(grid.n, dtype=complex))

    # -- algebra ------------------------------------------------------------
    def regauge(self, gamma: float) -> "LogCheb":
        """Same function written with a different power."""
        return LogCheb(self.grid, gamma, self.h * np.exp((self.gamma - gamma) * self.grid.t))

    def __add__(self, other):
        if not isinstance(other, LogCheb):
            return self + LogCheb.power(self.grid, 0.0, other)
        g = max(self.gamma, other.gamma)
        return LogCheb(self.grid, g, self.regauge(g).h + other.regauge(g).h)

    __radd__ = __add__

    def __neg__(self):
        return LogCheb(self.grid, self.gamma, -self.h)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, LogCheb):
            return LogCheb(self.grid, self.gamma + other.gamma, self.h * other.h)
        return LogCheb(self.grid, self.gamma, self.h * complex(other))

    __rmul__ = __mul__

    def times_power(self, p: float) -> "LogCheb":
        return LogCheb(self.grid, self.gamma + p, self.h)

    def d_xi(self) -> "LogCheb":
        """d/dxi (xi^g H) = xi^(g-1) (g H + H_t)."""
        return LogCheb(self.grid, self.gamma - 1.0, self.gamma * self.h + self.grid.D @ self.h)

    def is_zero(self) -> bool:
        return not np.any(self.h)

    # -- evaluation ---------------------------------------------------------
    def coeffs(self) -> np.ndarray:
        return values_to_coeffs(self.h)

    def values(self) -> np.ndarray:
        return self.grid.xi**self.gamma * self.h

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        H = C.chebval(self.grid.to_unit(np.log(xi)), self.coeffs())
        return xi**self.gamma * H

    def tail_size(self) -> float:
        """Largest of the trailing Chebyshev coefficients of H."""
        return float(np.abs(self.coeffs())[-8:].max())

    def resolution(self) -> float:
        """Size of the trailing Chebyshev coefficients relative to the largest."""
        c = np.abs(self.coeffs())
        top = c.max()
        return 0.0 if top == 0 else float(c[-8:].max() / top)

    # -- integration --------------------------------------------------------
    def tail_integral(self, terms: int = 3) -> "LogCheb":
        """W(xi) = int_xi^inf f(eta) d eta, assuming gamma + 1 < 0.

        W = xi^(gamma+1) Q(t) with Q_t + (gamma+1) Q = -H, solved by
        Chebyshev collocation.  The condition at the right end is the
        asymptotic series Q = -H/lam + H_t/lam^2 - ... (lam = gamma + 1),
        i.e. the branch that vanishes at infinity; errors in it are damped
        like (xi / xi_max)^|lam| towards smaller xi.
        """
        lam = self.gamma + 1.0
        if not lam < 0:
            raise ValueError(f"integral from infinity diverges for order {self.gamma}")
        if self.is_zero():
            return LogCheb.zero(self.grid, lam)
        n = self.grid.n
        D = self.grid.D
        M = D + lam * np.eye(n)
        rhs = -self.h.astype(complex)
        # boundary condition at t_max (node 0)
        q_end = 0.0
        deriv = self.h.astype(complex)
        for j in range(terms):
            q_end += -((-1.0) ** j) * deriv[0] / lam ** (j + 1)
            deriv = D @ deriv
        M[0, :] = 0.0
        M[0, 0] = 1.0
        rhs[0] = q_end
        Q = np.linalg.solve(M, rhs)
        return LogCheb(self.grid, lam, Q)

    def integral_t(self, t_ref: float):
        """Antiderivative in t of the full values, normalized to 0 at t_ref; returns a callable of xi."""
        c = values_to_coeffs(self.values())
        lo, hi = self.grid.domain
        ci = C.chebint(c, lbnd=float(self.grid.to_unit(t_ref))) * (hi - lo) / 2.0
        g = self.grid
        return lambda xi: C.chebval(g.to_unit(np.log(np.asarray(xi, dtype=float))), ci)
