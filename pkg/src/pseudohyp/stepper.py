"""Implicit time marching of the coupled linear system.

Each step solves (per field, shown for ``u``)::

    C-D^beta u + u_t - B u - d_t(B u) + z1 v + lam_u = f      at t_{n+1}
    sum_i q_i u_i = 0

with the Caputo term from the L1 scheme applied to the backward-difference
rate history, and every first-order time derivative taken as a backward
difference at ``t_{n+1}``. The rate history is seeded with ``u_t(0) = phi2``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fracops
from .assembly import StepSystem, assemble_step_system, bessel_operator, solve_bordered
from .catalog import Manufactured, Profile, Source
from .errors import BlowUpError, OrderError
from .fracops import TimeGrid
from .weighted import Grid, constraint_value, h1_norm, norm_rho, weighted_mean_project

__all__ = [
    "ProblemSpec",
    "Trajectory",
    "ingest",
    "march",
    "solve_linear",
    "residual",
    "write_trajectory_csv",
    "write_norms_csv",
    "BLOWUP_FACTOR",
]

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e12


@dataclass(frozen=True)
class ProblemSpec:
    """One problem instance: geometry, orders, couplings, data, discretization, tolerances.

    When ``manufactured`` is set, initial data and sources come from it and
    the profile/source fields are ignored.
    """

    b: float = 1.0
    T: float = 1.0
    beta: float = 1.5
    gamma: float = 1.5
    z1: float = 0.0
    z2: float = 0.0
    phi1: Profile = field(default_factory=Profile)
    phi2: Profile = field(default_factory=Profile)
    psi1: Profile = field(default_factory=Profile)
    psi2: Profile = field(default_factory=Profile)
    f: Source = field(default_factory=Source)
    g: Source = field(default_factory=Source)
    nx: int = 64
    nt: int = 256
    tol: float = 1e-10
    max_iter: int = 20
    manufactured: Manufactured | None = None

    def __post_init__(self):
        for name in ("beta", "gamma"):
            val = getattr(self, name)
            if not 1.0 < val < 2.0:
                raise OrderError(f"{name}={val!r}: order out of (1,2)")
        for name in ("z1", "z2"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)!r}")
        if not (isinstance(self.nx, (int, np.integer)) and self.nx >= 3):
            raise ValueError(f"nx must be an integer >= 3, got {self.nx!r}")
        if not (isinstance(self.nt, (int, np.integer)) and self.nt >= 1):
            raise ValueError(f"nt must be a positive integer, got {self.nt!r}")
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f"b must be positive, got {self.b!r}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not self.tol >= 0.0:
            raise ValueError(f"tol must be nonnegative, got {self.tol!r}")
        if not (isinstance(self.max_iter, (int, np.integer)) and self.max_iter >= 1):
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")

    @property
    def grid(self) -> Grid:
        return Grid(self.b, self.nx)

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.nt)

    def swapped(self) -> "ProblemSpec":
        """Exchange the roles of the two components."""
        mf = self.manufactured
        if mf is not None:
            mf = replace(mf, u_time=mf.v_time, v_time=mf.u_time)
        return replace(
            self,
            beta=self.gamma,
            gamma=self.beta,
            z1=self.z2,
            z2=self.z1,
            phi1=self.psi1,
            phi2=self.psi2,
            psi1=self.phi1,
            psi2=self.phi2,
            f=self.g,
            g=self.f,
            manufactured=mf,
        )

    def refined(self, factor: int = 2) -> "ProblemSpec":
        return replace(self, nx=self.nx * factor, nt=self.nt * factor)


@dataclass
class Trajectory:
    """Marched fields on every time node, shape ``(nt+1, nx)``.

    ``du``/``dv`` hold the rate history: row 0 is the seeded initial rate and
    row ``k >= 1`` is the backward difference ``(u^k - u^{k-1})/dt``.
    ``lam_u``/``lam_v`` are the constraint multipliers (0 at ``n = 0``).
    """

    grid: Grid
    tgrid: TimeGrid
    beta: float
    gamma: float
    u: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    f: np.ndarray
    g: np.ndarray
    lam_u: np.ndarray
    lam_v: np.ndarray
    projected: dict = field(default_factory=dict)

    @property
    def nt(self) -> int:
        return self.tgrid.nt

    @property
    def initial(self):
        """``(phi1, phi2, psi1, psi2)`` as used by the march."""
        return self.u[0], self.du[0], self.v[0], self.dv[0]

    def caputo_u(self) -> np.ndarray:
        """Discrete Caputo derivative of ``u`` on every node (row 0 set to 0)."""
        return _caputo_rows(self.du, self.beta, self.tgrid)

    def caputo_v(self) -> np.ndarray:
        return _caputo_rows(self.dv, self.gamma, self.tgrid)


def _caputo_rows(rates, order, tg):
    out = np.zeros_like(rates)
    out[1:] = fracops.caputo_low_series(rates, order - 1.0, tg)
    return out


def _project(name, arr, g, flags):
    arr = np.asarray(arr, dtype=float)
    scale = max(float(norm_rho(arr, g)), 1.0)
    if abs(float(constraint_value(arr, g))) > 1e-14 * scale:
        log.info("projected %s onto the integral constraint", name)
        flags[name] = True
        return weighted_mean_project(arr, g)
    flags[name] = False
    return arr


def ingest(spec: ProblemSpec):
    """Sample and project the data of ``spec``.

    Returns ``(grid, tgrid, (phi1, phi2, psi1, psi2), (f, g), flags)``;
    ``flags`` records which initial profiles had to be projected.
    """
    g, tg = spec.grid, spec.time_grid
    mf = spec.manufactured
    if mf is not None:
        raw = mf.initial_data(g)
        f, gg = mf.sources(g, tg, spec.beta, spec.gamma, spec.z1, spec.z2)
    else:
        raw = (spec.phi1.evaluate(g), spec.phi2.evaluate(g), spec.psi1.evaluate(g), spec.psi2.evaluate(g))
        f, gg = spec.f.history(g, tg), spec.g.history(g, tg)
    flags = {}
    data = tuple(_project(n, a, g, flags) for n, a in zip(("phi1", "phi2", "psi1", "psi2"), raw))
    return g, tg, data, (f, gg), flags


def data_scale(g: Grid, data, sources) -> float:
    """Largest weighted norm among the initial profiles and source snapshots."""
    vals = [float(norm_rho(a, g)) for a in data]
    vals += [float(np.max(norm_rho(s, g))) for s in sources]
    return max(vals)


def march(
    g: Grid,
    tg: TimeGrid,
    beta: float,
    gamma: float,
    z1: float,
    z2: float,
    data,
    sources,
    system: StepSystem | None = None,
    projected=None,
) -> Trajectory:
    """March from prescribed arrays.

    ``data`` is ``(phi1, phi2, psi1, psi2)`` on the grid, ``sources`` a pair
    of ``(nt+1, nx)`` histories. A pre-factorized ``system`` is reused when
    given (it must match ``g``, ``tg.dt`` and the orders/couplings).
    """
    phi1, phi2, psi1, psi2 = (np.asarray(a, dtype=float) for a in data)
    f, gg = (np.asarray(s, dtype=float) for s in sources)
    nt, nx, dt = tg.nt, g.nx, tg.dt
    if f.shape != (nt + 1, nx) or gg.shape != (nt + 1, nx):
        raise ValueError(f"source histories must have shape {(nt + 1, nx)}")
    if system is None:
        system = assemble_step_system(g, dt, beta, gamma, z1, z2)
    op = system.op
    limit = BLOWUP_FACTOR * (1.0 + data_scale(g, (phi1, phi2, psi1, psi2), (f, gg)))

    u = np.zeros((nt + 1, nx))
    v = np.zeros((nt + 1, nx))
    du = np.zeros((nt + 1, nx))
    dv = np.zeros((nt + 1, nx))
    ju = np.zeros((nt + 1, nx))  # ju[k] = du[k] - du[k-1]
    jv = np.zeros((nt + 1, nx))
    lam_u = np.zeros(nt + 1)
    lam_v = np.zeros(nt + 1)
    u[0], du[0], v[0], dv[0] = phi1, phi2, psi1, psi2

    bu = fracops.l1_coefficients(beta - 1.0, nt)
    bv = fracops.l1_coefficients(gamma - 1.0, nt)
    cu = dt ** (1.0 - beta) / math.gamma(3.0 - beta)
    cv = dt ** (1.0 - gamma) / math.gamma(3.0 - gamma)
    au = system.head_u + 1.0 / dt
    av = system.head_v + 1.0 / dt
    rhs = np.empty(2 * nx + 2)
    rhs[2 * nx :] = 0.0

    for n in range(nt):
        hist_u = -du[n]
        hist_v = -dv[n]
        if n >= 1:
            hist_u = hist_u + bu[1 : n + 1] @ ju[n:0:-1]
            hist_v = hist_v + bv[1 : n + 1] @ jv[n:0:-1]
        rhs[:nx] = f[n + 1] + au * u[n] - cu * hist_u - op.apply(u[n]) / dt
        rhs[nx : 2 * nx] = gg[n + 1] + av * v[n] - cv * hist_v - op.apply(v[n]) / dt
        un, vn, lu, lv = solve_bordered(system, rhs)
        if not (np.all(np.isfinite(un)) and np.all(np.isfinite(vn))):
            raise BlowUpError(f"nonfinite field at step {n + 1} (t={tg.nodes[n + 1]:.6g})")
        nu, nv = float(norm_rho(un, g)), float(norm_rho(vn, g))
        if nu > limit or nv > limit:
            raise BlowUpError(f"field norm {max(nu, nv):.3e} exceeds guard {limit:.3e} at step {n + 1} (t={tg.nodes[n + 1]:.6g})")
        u[n + 1], v[n + 1] = un, vn
        du[n + 1] = (un - u[n]) / dt
        dv[n + 1] = (vn - v[n]) / dt
        ju[n + 1] = du[n + 1] - du[n]
        jv[n + 1] = dv[n + 1] - dv[n]
        lam_u[n + 1], lam_v[n + 1] = lu, lv

    return Trajectory(g, tg, beta, gamma, u, v, du, dv, f, gg, lam_u, lam_v, dict(projected or {}))


def solve_linear(spec: ProblemSpec, system: StepSystem | None = None) -> Trajectory:
    """March the linear problem described by ``spec`` over ``[0, T]``."""
    g, tg, data, sources, flags = ingest(spec)
    return march(g, tg, spec.beta, spec.gamma, spec.z1, spec.z2, data, sources, system=system, projected=flags)


def residual(traj: Trajectory, spec: ProblemSpec, n: int, f=None, g=None) -> float:
    """Weighted norm of the discrete equation residual at step ``n``.

    Recomputed from the stored fields with the reference Caputo operators of
    :mod:`fracops`; ``f``/``g`` override the stored source histories.
    """
    tg = traj.tgrid
    if not 1 <= n <= tg.nt:
        raise IndexError(f"step {n} outside [1, {tg.nt}]")
    grid, dt = traj.grid, tg.dt
    f = traj.f if f is None else f
    g = traj.g if g is None else g
    op = bessel_operator(grid)
    cap_u = fracops.caputo_high(traj.u, spec.beta, tg, n, initial_rate=traj.du[0])
    cap_v = fracops.caputo_high(traj.v, spec.gamma, tg, n, initial_rate=traj.dv[0])
    rate_u = (traj.u[n] - traj.u[n - 1]) / dt
    rate_v = (traj.v[n] - traj.v[n - 1]) / dt
    bu_new, bu_old = op.apply(traj.u[n]), op.apply(traj.u[n - 1])
    bv_new, bv_old = op.apply(traj.v[n]), op.apply(traj.v[n - 1])
    ru = cap_u + rate_u - bu_new - (bu_new - bu_old) / dt + spec.z1 * traj.v[n] + traj.lam_u[n] - f[n]
    rv = cap_v + rate_v - bv_new - (bv_new - bv_old) / dt + spec.z2 * traj.u[n] + traj.lam_v[n] - g[n]
    return float(np.sqrt(norm_rho(ru, grid) ** 2 + norm_rho(rv, grid) ** 2))


def _fmt(x) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Long-format CSV: one row per (step, cell)."""
    t = traj.tgrid.nodes
    x = traj.grid.x
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "x", "u", "v"])
        for n in range(traj.nt + 1):
            tn = _fmt(t[n])
            for i in range(traj.grid.nx):
                w.writerow([n, tn, _fmt(x[i]), _fmt(traj.u[n, i]), _fmt(traj.v[n, i])])


def norm_table(traj: Trajectory) -> np.ndarray:
    """Per-step ``H^1_rho`` norms of ``u``, ``v`` and of their Caputo derivatives."""
    g = traj.grid
    return np.column_stack(
        [
            h1_norm(traj.u, g),
            h1_norm(traj.v, g),
            h1_norm(traj.caputo_u(), g),
            h1_norm(traj.caputo_v(), g),
        ]
    )


def write_norms_csv(traj: Trajectory, path) -> None:
    t = traj.tgrid.nodes
    table = norm_table(traj)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "norm_u_h1rho", "norm_v_h1rho", "caputo_u", "caputo_v"])
        for n in range(traj.nt + 1):
            w.writerow([n, _fmt(t[n])] + [_fmt(val) for val in table[n]])
