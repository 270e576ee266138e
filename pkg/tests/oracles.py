"""Independent reference computations (quadrature, dense algebra, mpmath series).

Nothing here imports the package's numerical kernels, so agreement with them
is a genuine cross-check.
"""

import math

import mpmath
import numpy as np
from scipy import integrate


def caputo_quad(deriv, alpha, t, m):
    """Caputo derivative of order alpha at t, from the m-th derivative ``deriv`` (m = ceil(alpha))."""
    a = m - alpha
    val, _ = integrate.quad(lambda s: deriv(s), 0.0, t, weight="alg", wvar=(0.0, a - 1.0))
    # weight (t - s)^(a-1), integrated exactly by QUADPACK
    return val / math.gamma(a)


def rl_quad(f, alpha, t):
    val, _ = integrate.quad(f, 0.0, t, weight="alg", wvar=(0.0, alpha - 1.0))
    return val / math.gamma(alpha)


def weighted_quad(fn, b):
    """``int_0^b x fn(x) dx`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda x: x * fn(x), 0.0, b, epsabs=1e-13, epsrel=1e-13)
    return val


def ml_mpmath(beta, alpha, x, dps=40):
    """Mittag-Leffler series in extended precision."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        total = mpmath.mpf(0)
        n = 0
        while True:
            term = x**n / mpmath.gamma(beta * n + alpha)
            total += term
            if n > 5 and abs(term) < mpmath.mpf(10) ** (-dps + 5) * abs(total):
                return float(total)
            n += 1


def d_star_direct(b, z1, z2):
    return 2.0 * max(3.0, b**6 / 8 + 1.5, (z1**2 + z2**2) * b**4 / 8 + 2.5)


def bordered_dense_solve(matrix, rhs):
    return np.linalg.solve(matrix, rhs)


def fractional_relaxation(C, beta, t):
    """``E_beta(C t^beta)`` via mpmath series: solution of ``D^beta P = C P``, ``P(0) = 1``."""
    return ml_mpmath(beta, 1.0, C * t**beta)
