"""Discrete cylindrical operator and the per-step bordered block system.

``B u = (1/x)(x u_x)_x`` is discretized in flux form on the cell-centered
grid. The axis face carries zero flux because its weight ``x_{-1/2}`` is 0;
the outer face carries zero flux by the Neumann condition. Constants span the
kernel, so each implicit step is closed by one constraint row
``sum_i q_i u_i = 0`` per field with a Lagrange multiplier acting along the
constant direction.

One implicit step for the pair ``(u, v)`` reads, per field::

    (c + 1/dt) u - (1 + 1/dt) B u + z1 v + lam_u 1 = r_u
    sum_i q_i u_i = c_u

where ``c`` is the L1 coefficient on the newest backward difference. The
banded part is factorized once with LAPACK ``gbtrf``; the two multiplier
columns are eliminated by a 2x2 Schur complement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import OrderError, SolveError
from .weighted import Grid

__all__ = [
    "BandedOperator",
    "bessel_operator",
    "StepSystem",
    "l1_head_weight",
    "assemble_step_system",
    "solve_bordered",
    "step_matvec",
    "dense_step_matrix",
]


@dataclass(frozen=True)
class BandedOperator:
    """Tridiagonal flux-form operator ``(B u)_i = lower_i u_{i-1} + diag_i u_i + upper_i u_{i+1}``.

    ``constraint`` is the quadrature row ``q``; ``multiplier`` the constant
    column the Lagrange multiplier acts along.
    """

    grid: Grid
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    face_weights: np.ndarray
    constraint: np.ndarray
    multiplier: np.ndarray

    def apply(self, u) -> np.ndarray:
        """Flux-form application; exact zero on constant fields."""
        g = self.grid
        u = np.asarray(u, dtype=float)
        flux = np.zeros(u.shape[:-1] + (g.nx + 1,))
        flux[..., 1:-1] = self.face_weights[1:-1] * np.diff(u, axis=-1) / g.h
        return np.diff(flux, axis=-1) / (g.x * g.h)

    def to_dense(self) -> np.ndarray:
        n = self.grid.nx
        a = np.diag(self.diag)
        a[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        a[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return a


def bessel_operator(g: Grid) -> BandedOperator:
    """Flux-form ``(1/x)(x u_x)_x`` with zero flux at the axis and at ``x = b``."""
    if g.nx < 3:
        raise ValueError(f"bessel_operator needs nx >= 3, got {g.nx}")
    wts = g.faces.copy()  # wts[0] = x_{-1/2} = 0 at the axis
    wts[-1] = 0.0  # Neumann face
    denom = g.x * g.h * g.h
    lower = wts[:-1] / denom
    upper = wts[1:] / denom
    diag = -(lower + upper)
    return BandedOperator(
        grid=g,
        lower=lower,
        diag=diag,
        upper=upper,
        face_weights=wts,
        constraint=g.q.copy(),
        multiplier=np.ones(g.nx),
    )


def l1_head_weight(order: float, dt: float) -> float:
    """Coefficient of ``u^{n+1}`` in the L1 Caputo approximation of order in (1,2)."""
    return dt ** (-order) / math.gamma(3.0 - order)


@dataclass
class StepSystem:
    """Factorized implicit step for ``(u, v, lam_u, lam_v)``; size ``2 nx + 2``."""

    grid: Grid
    dt: float
    beta: float
    gamma: float
    z1: float
    z2: float
    head_u: float
    head_v: float
    op: BandedOperator
    table_u: np.ndarray  # rows: lower, diag, upper of the u-block
    table_v: np.ndarray
    coupled: bool
    _factors: list = field(repr=False)
    _border: np.ndarray = field(repr=False)  # A^{-1} E, shape (2, 2 nx)
    _schur: np.ndarray = field(repr=False)  # Q^T A^{-1} E, 2x2


def _block_table(op, head, dt):
    a = head + 1.0 / dt
    s = 1.0 + 1.0 / dt
    return np.vstack([-s * op.lower, a - s * op.diag, -s * op.upper])


def _band_storage(n, kl, ku, entries):
    ab = np.zeros((2 * kl + ku + 1, n))
    for i, j, val in entries:
        ab[kl + ku + i - j, j] = val
    return ab


def _tridiag_entries(table, index):
    lower, diag, upper = table
    n = diag.size
    out = []
    for i in range(n):
        out.append((index(i), index(i), diag[i]))
        if i > 0:
            out.append((index(i), index(i - 1), lower[i]))
        if i < n - 1:
            out.append((index(i), index(i + 1), upper[i]))
    return out


def _factor(ab, kl, ku):
    lu, piv, info = lapack.dgbtrf(ab, kl, ku)
    if info != 0:
        raise SolveError(f"banded factorization broke down (gbtrf info={info})")
    return lu, piv, kl, ku


def _band_solve(factor, rhs):
    lu, piv, kl, ku = factor
    x, info = lapack.dgbtrs(lu, kl, ku, rhs, piv)
    if info != 0:
        raise SolveError(f"banded solve failed (gbtrs info={info})")
    return x


def assemble_step_system(
    g: Grid,
    dt: float,
    beta: float,
    gamma: float,
    z1: float = 0.0,
    z2: float = 0.0,
    caputo_head_weight=None,
) -> StepSystem:
    """Assemble and factorize the implicit step system.

    ``caputo_head_weight`` may be a float (used for both fields) or a pair;
    by default each field gets :func:`l1_head_weight` for its own order. With
    ``z1 = z2 = 0`` the two fields are factorized as independent tridiagonal
    blocks; otherwise unknowns are interleaved into one pentadiagonal band.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError(f"degenerate time step dt={dt!r}")
    for name, val in (("beta", beta), ("gamma", gamma)):
        if not 1.0 < val < 2.0:
            raise OrderError(f"{name}={val!r} order out of (1,2)")
    if caputo_head_weight is None:
        head_u, head_v = l1_head_weight(beta, dt), l1_head_weight(gamma, dt)
    elif np.ndim(caputo_head_weight) == 0:
        head_u = head_v = float(caputo_head_weight)
    else:
        head_u, head_v = map(float, caputo_head_weight)

    op = bessel_operator(g)
    tu = _block_table(op, head_u, dt)
    tv = _block_table(op, head_v, dt)
    n = g.nx
    coupled = not (z1 == 0.0 and z2 == 0.0)
    if coupled:
        entries = _tridiag_entries(tu, lambda i: 2 * i) + _tridiag_entries(tv, lambda i: 2 * i + 1)
        entries += [(2 * i, 2 * i + 1, z1) for i in range(n)]
        entries += [(2 * i + 1, 2 * i, z2) for i in range(n)]
        factors = [_factor(_band_storage(2 * n, 2, 2, entries), 2, 2)]
    else:
        factors = [
            _factor(_band_storage(n, 1, 1, _tridiag_entries(tu, lambda i: i)), 1, 1),
            _factor(_band_storage(n, 1, 1, _tridiag_entries(tv, lambda i: i)), 1, 1),
        ]
    sys = StepSystem(g, dt, beta, gamma, z1, z2, head_u, head_v, op, tu, tv, coupled, factors, None, None)

    ones = op.multiplier
    zeros = np.zeros(n)
    cols = [_raw_solve(sys, ones, zeros), _raw_solve(sys, zeros, ones)]
    sys._border = np.array([np.concatenate(c) for c in cols])
    q = op.constraint
    schur = np.array([[q @ cols[j][i] for j in range(2)] for i in range(2)])
    if not coupled:
        schur[0, 1] = schur[1, 0] = 0.0
    if not np.all(np.isfinite(schur)) or abs(np.linalg.det(schur)) == 0.0:
        raise SolveError("bordered Schur complement is singular")
    sys._schur = schur
    return sys


def _raw_solve(sys, ru, rv):
    """Solve the banded part only (no constraint rows)."""
    n = sys.grid.nx
    if sys.coupled:
        r = np.empty(2 * n)
        r[0::2] = ru
        r[1::2] = rv
        x = _band_solve(sys._factors[0], r)
        return x[0::2].copy(), x[1::2].copy()
    return _band_solve(sys._factors[0], ru), _band_solve(sys._factors[1], rv)


def solve_bordered(sys: StepSystem, rhs):
    """Solve the full bordered system.

    ``rhs`` has length ``2 nx + 2``: the u-rows, the v-rows, then the two
    constraint values. Returns ``(u, v, lam_u, lam_v)``.
    """
    n = sys.grid.nx
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (2 * n + 2,):
        raise ValueError(f"rhs must have length {2 * n + 2}, got {rhs.shape}")
    yu, yv = _raw_solve(sys, rhs[:n], rhs[n : 2 * n])
    q = sys.op.constraint
    resid = np.array([q @ yu - rhs[2 * n], q @ yv - rhs[2 * n + 1]])
    if sys.coupled:
        lam = np.linalg.solve(sys._schur, resid)
    else:
        lam = resid / np.diag(sys._schur)
    bu, bv = sys._border[:, :n], sys._border[:, n:]
    if sys.coupled:
        u = yu - lam[0] * bu[0] - lam[1] * bu[1]
        v = yv - lam[0] * bv[0] - lam[1] * bv[1]
    else:
        u = yu - lam[0] * bu[0]
        v = yv - lam[1] * bv[1]
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise SolveError("bordered solve produced nonfinite values")
    return u, v, float(lam[0]), float(lam[1])


def step_matvec(sys: StepSystem, u, v, lam_u, lam_v) -> np.ndarray:
    """Apply the bordered step operator; the inverse of :func:`solve_bordered`."""
    op = sys.op
    s = 1.0 + 1.0 / sys.dt
    ru = (sys.head_u + 1.0 / sys.dt) * u - s * op.apply(u) + sys.z1 * v + lam_u
    rv = (sys.head_v + 1.0 / sys.dt) * v - s * op.apply(v) + sys.z2 * u + lam_v
    q = op.constraint
    return np.concatenate([ru, rv, [q @ u, q @ v]])


def dense_step_matrix(sys: StepSystem) -> np.ndarray:
    """Dense ``(2 nx + 2)``-square matrix of the step system, block ordered."""
    n = sys.grid.nx
    b = sys.op.to_dense()
    s = 1.0 + 1.0 / sys.dt
    eye = np.eye(n)
    m = np.zeros((2 * n + 2, 2 * n + 2))
    m[:n, :n] = (sys.head_u + 1.0 / sys.dt) * eye - s * b
    m[n : 2 * n, n : 2 * n] = (sys.head_v + 1.0 / sys.dt) * eye - s * b
    m[:n, n : 2 * n] = sys.z1 * eye
    m[n : 2 * n, :n] = sys.z2 * eye
    m[:n, 2 * n] = 1.0
    m[n : 2 * n, 2 * n + 1] = 1.0
    m[2 * n, :n] = sys.op.constraint
    m[2 * n + 1, n : 2 * n] = sys.op.constraint
    return m
