"""Discrete fractional calculus on uniform time grids.

Left Caputo derivatives use the L1 scheme (piecewise-linear interpolation of
the sampled function); orders in (1, 2) are reduced to an order in (0, 1)
acting on the backward-difference rate sequence. Riemann-Liouville integrals
use a product-rectangle rule. Mittag-Leffler functions are summed directly
from their power series.

Every sample array is indexed by time along axis 0, so the same routines act
on scalar sequences of shape ``(nt + 1,)`` and on field histories of shape
``(nt + 1, nx)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import mpmath
import numpy as np
from scipy.linalg import toeplitz

from .errors import OrderError, SeriesError

__all__ = [
    "TimeGrid",
    "classify_order",
    "l1_coefficients",
    "caputo_low",
    "caputo_low_series",
    "rate_sequence",
    "caputo_high",
    "caputo_high_series",
    "rl_integral",
    "rl_integral_series",
    "mittag_leffler",
    "ml_series_guard",
    "log_mittag_leffler",
    "ML_TERM_CAP",
]

ML_TERM_CAP = 10_000
# Direct summation is trusted while the dominant term exp(|x|**(1/beta)) fits a double.
_ML_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_n = n * dt`` on ``[0, T]`` with ``nt`` steps."""

    T: float
    nt: int

    def __post_init__(self):
        if not isinstance(self.nt, (int, np.integer)) or self.nt < 1:
            raise ValueError(f"nt must be a positive integer, got {self.nt!r}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be positive and finite, got {self.T!r}")

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @cached_property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.nt + 1, dtype=float) * self.dt
        t[-1] = self.T
        return t

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.T, self.nt * factor)


def classify_order(alpha: float) -> str:
    """Return ``"low"`` for alpha in (0, 1), ``"high"`` for (1, 2).

    Integer orders and anything outside (0, 2) raise :class:`OrderError`.
    """
    if not math.isfinite(alpha):
        raise OrderError(f"order must be finite, got {alpha!r}")
    if 0.0 < alpha < 1.0:
        return "low"
    if 1.0 < alpha < 2.0:
        return "high"
    raise OrderError(f"Caputo order {alpha!r} is not in (0,1) or (1,2)")


def _check_band(alpha, band):
    if classify_order(alpha) != band:
        span = "(0,1)" if band == "low" else "(1,2)"
        raise OrderError(f"order {alpha!r} out of {span}")


def _check_samples(v, grid):
    v = np.asarray(v, dtype=float)
    if v.shape[0] != grid.nt + 1:
        raise ValueError(f"sample length {v.shape[0]} does not match nt+1 = {grid.nt + 1}")
    if not np.all(np.isfinite(v)):
        raise ValueError("samples must be finite")
    return v


def _check_node(n, grid, allow_zero=False):
    lo = 0 if allow_zero else 1
    if not (lo <= n <= grid.nt):
        if n == 0 and not allow_zero:
            raise ValueError("Caputo derivative is undefined at the left endpoint n=0")
        raise IndexError(f"node {n} outside [{lo}, {grid.nt}]")


def l1_coefficients(alpha: float, count: int) -> np.ndarray:
    """``b_j = (j+1)**(1-alpha) - j**(1-alpha)`` for ``j = 0..count-1``."""
    j = np.arange(count + 1, dtype=float)
    p = j ** (1.0 - alpha)
    return np.diff(p)


def caputo_low(v, alpha: float, grid: TimeGrid, n: int):
    """L1 approximation of the left Caputo derivative of order alpha in (0,1) at ``t_n``.

    Computes ``sum_k w_k (v_{k+1} - v_k) / dt`` with
    ``w_k = [(t_n - t_k)**(1-alpha) - (t_n - t_{k+1})**(1-alpha)] / Gamma(2-alpha)``.
    """
    _check_band(alpha, "low")
    v = _check_samples(v, grid)
    _check_node(n, grid)
    b = l1_coefficients(alpha, n)
    jumps = np.diff(v[: n + 1], axis=0)[::-1]  # v_n - v_{n-1}, ..., v_1 - v_0
    scale = grid.dt ** (-alpha) / math.gamma(2.0 - alpha)
    return scale * np.tensordot(b, jumps, axes=(0, 0))


def caputo_low_series(v, alpha: float, grid: TimeGrid) -> np.ndarray:
    """L1 Caputo derivative at every node ``t_1..t_nt`` (row ``i`` is node ``i+1``)."""
    _check_band(alpha, "low")
    v = _check_samples(v, grid)
    nt = grid.nt
    b = l1_coefficients(alpha, nt)
    weights = toeplitz(b, np.zeros(nt))
    jumps = np.diff(v, axis=0)
    scale = grid.dt ** (-alpha) / math.gamma(2.0 - alpha)
    flat = jumps.reshape(nt, -1)
    return (scale * (weights @ flat)).reshape(jumps.shape)


def rate_sequence(u, grid: TimeGrid, initial_rate=None) -> np.ndarray:
    """Backward-difference rates ``d_k = (u_k - u_{k-1})/dt`` with ``d_0`` seeded.

    ``d_0`` is ``initial_rate`` when given (the datum ``u_t(0)``), otherwise the
    first difference is repeated.
    """
    u = _check_samples(u, grid)
    d = np.empty_like(u)
    d[1:] = np.diff(u, axis=0) / grid.dt
    if initial_rate is None:
        d[0] = d[1]
    else:
        d[0] = initial_rate
    return d


def caputo_high(u, beta: float, grid: TimeGrid, n: int, initial_rate=None):
    """Caputo derivative of order beta in (1,2) at ``t_n``.

    Uses the identity ``C-D^beta u = C-D^(beta-1) u_t``: the rate sequence from
    :func:`rate_sequence` is fed to :func:`caputo_low` with order ``beta - 1``.
    """
    _check_band(beta, "high")
    d = rate_sequence(u, grid, initial_rate)
    return caputo_low(d, beta - 1.0, grid, n)


def caputo_high_series(u, beta: float, grid: TimeGrid, initial_rate=None) -> np.ndarray:
    _check_band(beta, "high")
    d = rate_sequence(u, grid, initial_rate)
    return caputo_low_series(d, beta - 1.0, grid)


def _rl_weights(alpha, count, dt):
    j = np.arange(count + 1, dtype=float)
    return np.diff(j**alpha) * dt**alpha / math.gamma(alpha + 1.0)


def rl_integral(v, alpha: float, grid: TimeGrid, n: int):
    """Left Riemann-Liouville integral ``D^{-alpha} v`` over ``[0, t_n]``.

    Product-rectangle rule: on each interval ``v`` is replaced by the mean of its
    endpoint samples and the kernel ``(t-s)**(alpha-1)/Gamma(alpha)`` is
    integrated exactly. Returns 0 at ``n = 0``.
    """
    if not (alpha > 0 and math.isfinite(alpha)):
        raise OrderError(f"integral order must be positive, got {alpha!r}")
    v = _check_samples(v, grid)
    _check_node(n, grid, allow_zero=True)
    if n == 0:
        return np.zeros_like(v[0])
    w = _rl_weights(alpha, n, grid.dt)
    mids = 0.5 * (v[1 : n + 1] + v[:n])[::-1]
    return np.tensordot(w, mids, axes=(0, 0))


def rl_integral_series(v, alpha: float, grid: TimeGrid) -> np.ndarray:
    """RL integral at every node ``t_0..t_nt`` (row 0 is zero)."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise OrderError(f"integral order must be positive, got {alpha!r}")
    v = _check_samples(v, grid)
    nt = grid.nt
    w = _rl_weights(alpha, nt, grid.dt)
    mids = 0.5 * (v[1:] + v[:-1])
    out = np.zeros_like(v)
    flat = mids.reshape(nt, -1)
    out[1:] = (toeplitz(w, np.zeros(nt)) @ flat).reshape(mids.shape)
    return out


def ml_series_guard(beta: float) -> float:
    """Largest ``|x|`` accepted by :func:`mittag_leffler`.

    The series peak grows like ``exp(|x|**(1/beta))``; the guard keeps that
    exponent below 700.
    """
    return _ML_EXP_LIMIT**beta


def _ml_term(n, beta, alpha, x):
    arg = beta * n + alpha
    if x == 0.0:
        return 1.0 / math.gamma(arg) if n == 0 else 0.0
    log_pow = n * math.log(abs(x))
    if arg < 170.0 and log_pow < 700.0:
        return x**n / math.gamma(arg)
    try:
        mag = math.exp(log_pow - math.lgamma(arg))
    except OverflowError as exc:
        raise SeriesError(f"Mittag-Leffler term {n} overflows at x={x}") from exc
    return -mag if (x < 0 and n % 2) else mag


def mittag_leffler(beta: float, alpha: float, x: float) -> float:
    """Two-parameter Mittag-Leffler function ``E_{beta,alpha}(x)`` by direct series.

    ``E_beta(x)`` is the ``alpha = 1`` case. Summation stops once a term is
    below ``1e-16`` of the partial sum (after the terms have started to
    shrink). Arguments beyond :func:`ml_series_guard` and series that do not
    settle within :data:`ML_TERM_CAP` terms raise :class:`SeriesError`.
    Negative arguments are accepted but lose accuracy through cancellation as
    ``|x|`` grows.
    """
    if not (beta > 0 and alpha > 0):
        raise ValueError(f"Mittag-Leffler parameters must be positive, got beta={beta}, alpha={alpha}")
    x = float(x)
    if abs(x) > ml_series_guard(beta):
        raise SeriesError(f"|x|={abs(x):.6g} exceeds the series range {ml_series_guard(beta):.6g} for beta={beta}")
    total = 0.0
    prev = math.inf
    for n in range(ML_TERM_CAP):
        term = _ml_term(n, beta, alpha, x)
        total += term
        mag = abs(term)
        if mag < 1e-16 * abs(total) and mag <= prev:
            return total
        if mag == 0.0 and n > 0:
            return total
        prev = mag
    raise SeriesError(f"Mittag-Leffler series did not converge within {ML_TERM_CAP} terms (x={x})")


def log_mittag_leffler(beta: float, alpha: float, x) -> mpmath.mpf:
    """Natural log of ``E_{beta,alpha}(x)`` for ``x >= 0`` and ``0 < beta < 2``.

    Inside the series range this is ``log`` of :func:`mittag_leffler`. Beyond
    it the leading exponential term of the large-argument expansion,
    ``(1/beta) x**((1-alpha)/beta) exp(x**(1/beta))``, is used in log form; the
    neglected algebraic tail is smaller by a factor ``exp(-700)`` there. ``x``
    may be an :class:`mpmath.mpf` far larger than any double.
    """
    x = mpmath.mpf(x)
    if x < 0:
        raise ValueError("log_mittag_leffler requires x >= 0")
    if not (0 < beta < 2):
        raise ValueError("log_mittag_leffler requires 0 < beta < 2")
    if x <= ml_series_guard(beta):
        return mpmath.log(mittag_leffler(beta, alpha, float(x)))
    return -mpmath.log(beta) + (1 - mpmath.mpf(alpha)) / beta * mpmath.log(x) + x ** (mpmath.mpf(1) / beta)
