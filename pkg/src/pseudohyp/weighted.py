"""Cell-centered grid on (0, b) with the cylindrical weight ``rho(x) = x``.

Weighted products, H^1_rho norms, the running integrals ``J_x(xi u)`` and
``J_x^2(xi u)``, the projection onto the nonlocal constraint
``int_0^b x u dx = 0``, and ensemble audits of the Poincare-type and
fractional-integral inequalities the energy estimate relies on.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import fracops
from .fracops import TimeGrid

__all__ = [
    "Grid",
    "inner_rho",
    "norm_rho",
    "gradient",
    "h1_norm",
    "jx",
    "l2_norm",
    "weighted_mean_project",
    "constraint_value",
    "InequalityCheck",
    "random_admissible_fields",
    "random_time_draws",
    "audit_inequalities",
    "write_audit_csv",
]

MIN_ENSEMBLE = 100


@dataclass(frozen=True)
class Grid:
    """``nx`` cells of width ``h = b/nx``; centers ``x_i = (i + 1/2) h``.

    Neither ``x = 0`` nor ``x = b`` is a node. Quadrature weights are
    ``q_i = x_i h``.
    """

    b: float
    nx: int

    def __post_init__(self):
        if not isinstance(self.nx, (int, np.integer)) or self.nx < 1:
            raise ValueError(f"nx must be a positive integer, got {self.nx!r}")
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f"b must be positive and finite, got {self.b!r}")

    @property
    def h(self) -> float:
        return self.b / self.nx

    @cached_property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.h

    @cached_property
    def faces(self) -> np.ndarray:
        """Face positions ``x_{i-1/2}`` for ``i = 0..nx`` (first is 0, last is b)."""
        f = np.arange(self.nx + 1) * self.h
        f[-1] = self.b
        return f

    @cached_property
    def q(self) -> np.ndarray:
        return self.x * self.h

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.b, self.nx * factor)


def _check(u, g):
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != g.nx:
        raise ValueError(f"field length {u.shape[-1]} does not match grid nx={g.nx}")
    return u


def inner_rho(u, w, g: Grid):
    """``sum_i q_i u_i w_i``, the midpoint rule for ``int_0^b x u w dx``.

    Broadcasts over leading axes, so histories of shape ``(nt+1, nx)`` give one
    value per time node.
    """
    u = _check(u, g)
    w = _check(w, g)
    return np.sum(g.q * u * w, axis=-1)


def norm_rho(u, g: Grid):
    return np.sqrt(inner_rho(u, u, g))


def l2_norm(u, g: Grid):
    """Unweighted ``L^2(0,b)`` norm."""
    u = _check(u, g)
    return np.sqrt(g.h * np.sum(u * u, axis=-1))


def gradient(u, g: Grid) -> np.ndarray:
    """Centered differences in the interior, one-sided in the two boundary cells."""
    u = _check(u, g)
    if g.nx < 2:
        return np.zeros_like(u)
    return np.gradient(u, g.h, axis=-1)


def h1_norm(u, g: Grid, squared: bool = False):
    """``||u||^2_rho + ||u_x||^2_rho`` (square root unless ``squared``)."""
    ux = gradient(u, g)
    val = inner_rho(u, u, g) + inner_rho(ux, ux, g)
    return val if squared else np.sqrt(val)


def jx(u, g: Grid, depth: int = 1) -> np.ndarray:
    """Running integrals ``J_x(xi u)`` (depth 1) or ``J_x^2(xi u)`` (depth 2) at cell centers.

    Depth 1 is the midpoint-rule cumulative integral of ``x u`` up to each
    center (full cells to the left plus half the current cell); depth 2 applies
    the same running integral to the depth-1 field.
    """
    if depth not in (1, 2):
        raise ValueError(f"depth must be 1 or 2, got {depth!r}")
    u = _check(u, g)
    out = _running(g.x * u, g)
    if depth == 2:
        out = _running(out, g)
    return out


def _running(w, g):
    c = np.cumsum(w, axis=-1) * g.h
    return c - 0.5 * g.h * w


def constraint_value(u, g: Grid):
    """Discrete ``int_0^b x u dx``."""
    return inner_rho(u, np.ones(g.nx), g)


def weighted_mean_project(u, g: Grid) -> np.ndarray:
    """Subtract the weighted mean: ``u - c`` with ``c = (u, 1)_rho / (1, 1)_rho``."""
    u = _check(u, g)
    c = constraint_value(u, g) / np.sum(g.q)
    out = u - np.asarray(c)[..., None]
    # second pass removes the rounding residue of the first
    c2 = constraint_value(out, g) / np.sum(g.q)
    return out - np.asarray(c2)[..., None]


@dataclass
class InequalityCheck:
    name: str
    draws: int
    violations: int
    worst_margin: float
    tolerance: str

    @property
    def passed(self) -> bool:
        return self.violations == 0


def random_admissible_fields(rng: np.random.Generator, g: Grid, count: int, modes: int = 8) -> np.ndarray:
    """``count`` fields ``sum_{k<=modes} a_k cos(k pi x / b)``, ``a_k ~ U[-1, 1]``.

    Every draw has zero slope at ``x = b`` (and at the axis).
    """
    a = rng.uniform(-1.0, 1.0, size=(count, modes + 1))
    k = np.arange(modes + 1)
    basis = np.cos(np.outer(k, np.pi * g.x / g.b))
    return a @ basis


def random_time_draws(rng: np.random.Generator, tg: TimeGrid, count: int, kind: str):
    """Random smooth time samples with random orders.

    ``kind="lemma"``: ``c1 t^2 + c2 sin t + c3 e^t`` with orders in (0, 1).
    ``kind="integral"``: nonnegative ``(p(t))^2`` for a random cubic ``p``, orders in (1, 2).
    Returns ``(samples, orders)`` with samples of shape ``(count, nt+1)``.
    """
    t = tg.nodes
    if kind == "lemma":
        c = rng.uniform(-1.0, 1.0, size=(count, 3))
        basis = np.stack([t**2, np.sin(t), np.exp(t)])
        return c @ basis, rng.uniform(0.05, 0.95, size=count)
    if kind == "integral":
        c = rng.uniform(-1.0, 1.0, size=(count, 4))
        basis = np.stack([np.ones_like(t), t, t**2, t**3])
        return (c @ basis) ** 2, rng.uniform(1.05, 1.95, size=count)
    raise ValueError(f"unknown draw kind {kind!r}")


def _margins(lhs, rhs):
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), np.finfo(float).tiny)
    return (rhs - lhs) / scale


def _summarize(name, margins, tol, tol_text):
    margins = np.asarray(margins, dtype=float)
    worst = float(margins.min()) if margins.size else 0.0
    return InequalityCheck(name, int(margins.size), int(np.sum(margins < -tol)), worst, tol_text)


def audit_inequalities(
    fields,
    g: Grid,
    *,
    lemma_draws=None,
    integral_draws=None,
    time_grid: TimeGrid | None = None,
    rel_tol: float = 1e-8,
) -> list[InequalityCheck]:
    """Check the pointwise/integral inequalities on an ensemble.

    Spatial checks on every field ``u``:

    * ``J1``: ``||J_x(xi u)||^2 <= (b^3/2) ||u||_rho^2``
    * ``J2``: ``||J_x^2(xi u)||^2 <= (b^2/2) ||J_x(xi u)||^2``
    * ``poincare``: ``||w||_rho^2 <= (b^2/4) ||w_x||_rho^2`` for ``w`` the
      constraint projection of ``u``

    (the J norms are unweighted). Optional time checks, each a pair
    ``(samples, orders)`` from :func:`random_time_draws`:

    * ``lemma_draws``: ``v C-D^a v - 1/2 C-D^a v^2 >= -10 dt`` at every node
    * ``integral_draws``: ``D^{-a} f <= t^(a-1)/Gamma(a) int_0^t f`` for
      ``a`` in (1, 2)

    Spatial and integral margins are relative; a draw violates when its margin
    is below ``-rel_tol``.
    """
    fields = np.atleast_2d(np.asarray(fields, dtype=float))
    if fields.shape[0] < MIN_ENSEMBLE:
        raise ValueError(f"ensemble too small: {fields.shape[0]} < {MIN_ENSEMBLE}")
    b = g.b
    j1 = jx(fields, g, 1)
    j2 = jx(fields, g, 2)
    nu = inner_rho(fields, fields, g)
    nj1 = l2_norm(j1, g) ** 2
    nj2 = l2_norm(j2, g) ** 2
    tol_text = f"relative {rel_tol:g}"
    checks = [
        _summarize("J1", _margins(nj1, b**3 / 2 * nu), rel_tol, tol_text),
        _summarize("J2", _margins(nj2, b**2 / 2 * nj1), rel_tol, tol_text),
    ]
    w = weighted_mean_project(fields, g)
    wx = gradient(w, g)
    lhs = inner_rho(w, w, g)
    rhs = b**2 / 4 * inner_rho(wx, wx, g)
    checks.append(_summarize("poincare", _margins(lhs, rhs), rel_tol, tol_text))

    if lemma_draws is not None or integral_draws is not None:
        if time_grid is None:
            raise ValueError("time checks need a time_grid")
    if lemma_draws is not None:
        samples, orders = lemma_draws
        if len(samples) < MIN_ENSEMBLE:
            raise ValueError(f"ensemble too small: {len(samples)} < {MIN_ENSEMBLE}")
        worst = []
        for v, a in zip(samples, orders):
            gap = v[1:] * fracops.caputo_low_series(v, a, time_grid) - 0.5 * fracops.caputo_low_series(v**2, a, time_grid)
            worst.append(gap.min())
        dt = time_grid.dt
        checks.append(_summarize("lemma_caputo_product", worst, 10 * dt, f"absolute 10*dt={10 * dt:g}"))
    if integral_draws is not None:
        samples, orders = integral_draws
        if len(samples) < MIN_ENSEMBLE:
            raise ValueError(f"ensemble too small: {len(samples)} < {MIN_ENSEMBLE}")
        t = time_grid.nodes
        worst = []
        for f, a in zip(samples, orders):
            lhs = fracops.rl_integral_series(f, a, time_grid)
            running = fracops.rl_integral_series(f, 1.0, time_grid)
            rhs = t ** (a - 1.0) / math.gamma(a) * running
            worst.append(_margins(lhs[1:], rhs[1:]).min())
        checks.append(_summarize("fractional_integral", worst, rel_tol, tol_text))
    return checks


def write_audit_csv(checks, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["inequality", "draws", "violations", "worst_margin"])
        for c in checks:
            w.writerow([c.name, c.draws, c.violations, f"{c.worst_margin:.17g}"])
