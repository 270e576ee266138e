"""Solver and verification tools for a coupled time-fractional pseudo-hyperbolic system.

The system, for Caputo orders ``beta, gamma`` in (1, 2) on ``0 < x < b``::

    C-D^beta  u - B u - d_t(B u) + z1 v + u_t = f
    C-D^gamma v - B v - d_t(B v) + z2 u + v_t = g,     B w = (1/x)(x w_x)_x

with ``u_x(b, t) = 0`` and ``int_0^b x u dx = 0`` (likewise for ``v``).
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    ConfigError,
    DivergenceError,
    NumericalError,
    OrderError,
    PseudoHypError,
    SeriesError,
    SolveError,
)

__all__ = [
    "__version__",
    "PseudoHypError",
    "OrderError",
    "ConfigError",
    "NumericalError",
    "SolveError",
    "BlowUpError",
    "SeriesError",
    "DivergenceError",
]
