"""Picard iteration for the nonlinear system.

The solution is split as ``(u, v) = (U + psi, V + phi)`` where ``(psi, phi)``
solves the homogeneous problem (original initial data, zero sources) and
``(U, V)`` solves the linear problem with zero initial data and sources
frozen at the previous iterate::

    L (U_n, V_n) = (F, G)(x, t, U_{n-1} + psi, V_{n-1} + phi, their x-derivatives)

Increments are measured in ``L^2(0,T; H^1_rho)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .assembly import assemble_step_system
from .energy import _trapezoid, constants
from .errors import DivergenceError
from .stepper import ProblemSpec, Trajectory, ingest, march, residual
from .weighted import gradient, h1_norm

__all__ = [
    "NonlinearSource",
    "PicardReport",
    "solve_homogeneous",
    "picard_iterate",
    "contraction_constant",
    "compose_solution",
    "nonlinear_residual",
    "uniqueness_check",
    "space_time_norm",
    "write_picard_report",
    "DIVERGENCE_RUN",
]

DIVERGENCE_RUN = 3
_KINDS = ("zero", "sat_mix", "lin_mix")


@dataclass(frozen=True)
class NonlinearSource:
    """Catalog nonlinearity with declared Lipschitz constants.

    ``sat_mix``: ``F = (delta1/4)(tanh U + tanh V + tanh U_x + tanh V_x)``
    ``lin_mix``: ``F = (delta1/4)(U + V + U_x + V_x)``

    and the same for ``G`` with ``delta2``. Both satisfy
    ``|F(a) - F(b)| <= delta1 * sum_j |a_j - b_j|`` since ``tanh`` is
    1-Lipschitz. ``zero`` returns zeros.
    """

    kind: str = "zero"
    delta1: float = 0.0
    delta2: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown nonlinear source {self.kind!r}; expected one of {_KINDS}")
        if not (self.delta1 >= 0 and self.delta2 >= 0):
            raise ValueError("Lipschitz constants must be nonnegative")

    def evaluate(self, u, v, ux, vx):
        if self.kind == "zero":
            z = np.zeros_like(np.asarray(u, dtype=float))
            return z, z.copy()
        s = np.tanh if self.kind == "sat_mix" else (lambda a: a)
        total = s(u) + s(v) + s(ux) + s(vx)
        return 0.25 * self.delta1 * total, 0.25 * self.delta2 * total


def space_time_norm(w, traj_like) -> float:
    """``||w||_{L^2(0,T;H^1_rho)}`` by the trapezoid rule."""
    g, tg = traj_like
    return math.sqrt(max(_trapezoid(h1_norm(w, g, squared=True), tg.dt), 0.0))


@dataclass
class PicardReport:
    increments: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    K_star: float = 0.0
    log_K_star: object = None
    hypothesis: bool = False
    empirical_contraction: bool = False
    iterations: int = 0
    converged: bool = False
    scale: float = 1.0
    tol: float = 0.0

    @property
    def verdict(self) -> str:
        if not self.converged:
            return "not converged"
        if self.hypothesis:
            return "converged (contraction proved: K* < 1/4)"
        return "converged (empirical, outside the K* < 1/4 hypothesis)"


def solve_homogeneous(spec: ProblemSpec) -> Trajectory:
    """Linear solve with the original initial data and zero sources."""
    g, tg, data, _, flags = ingest(spec)
    zero = np.zeros((tg.nt + 1, g.nx))
    return _march_spec(spec, data, (zero, zero), flags=flags)


def _march_spec(spec, data, sources, system=None, flags=None):
    return march(
        spec.grid, spec.time_grid, spec.beta, spec.gamma, spec.z1, spec.z2, data, sources, system=system, projected=flags
    )


def contraction_constant(spec: ProblemSpec, delta1: float, delta2: float):
    """``(K*, log K*, K* < 1/4)``; ``K*`` is ``inf`` when it exceeds the double range."""
    c = constants(spec, delta1, delta2)
    lk = c.log("K_star")
    return c["K_star"], lk, bool(lk < mpmath.log(mpmath.mpf(1) / 4))


def _frozen_sources(src, forcing, g, U, V, hom):
    u = U + hom.u
    v = V + hom.v
    F, G = src.evaluate(u, v, gradient(u, g), gradient(v, g))
    return forcing[0] + F, forcing[1] + G


def picard_iterate(
    spec: ProblemSpec,
    src: NonlinearSource,
    tol: float | None = None,
    max_iter: int | None = None,
    seed=None,
    homogeneous: Trajectory | None = None,
):
    """Run the Picard iteration from ``seed`` (default ``(0, 0)``).

    Stops when ``e_n <= tol * (1 + ||U|| + ||V||)`` or after ``max_iter``
    iterations. Three consecutive increases of ``e_n`` above the rounding
    floor raise :class:`DivergenceError` carrying the report.

    Returns ``(UV, report)`` where ``UV`` is the last iterate as a
    trajectory with zero initial data.
    """
    tol = spec.tol if tol is None else tol
    max_iter = spec.max_iter if max_iter is None else max_iter
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    hom = solve_homogeneous(spec) if homogeneous is None else homogeneous
    g, tg, _, forcing, _ = ingest(spec)
    shape = (tg.nt + 1, g.nx)
    if seed is None:
        U, V = np.zeros(shape), np.zeros(shape)
    else:
        U, V = (np.array(s, dtype=float) for s in seed)
        if U.shape != shape or V.shape != shape:
            raise ValueError(f"seed fields must have shape {shape}")
    K, logK, hyp = contraction_constant(spec, src.delta1, src.delta2)
    report = PicardReport(K_star=K, log_K_star=logK, hypothesis=hyp, tol=tol)
    system = assemble_step_system(g, tg.dt, spec.beta, spec.gamma, spec.z1, spec.z2)
    zero = np.zeros(g.nx)
    gt = (g, tg)
    ups = 0
    it = None
    for n in range(1, max_iter + 1):
        sources = _frozen_sources(src, forcing, g, U, V, hom)
        it = _march_spec(spec, (zero, zero, zero, zero), sources, system=system)
        e = space_time_norm(it.u - U, gt) + space_time_norm(it.v - V, gt)
        U, V = it.u, it.v
        prev = report.increments[-1] if report.increments else None
        report.increments.append(e)
        report.ratios.append(e / prev if prev else math.nan)
        report.iterations = n
        scale = 1.0 + space_time_norm(U, gt) + space_time_norm(V, gt)
        report.scale = scale
        if e <= tol * scale:
            report.converged = True
            break
        floor = 100 * np.finfo(float).eps * scale
        ups = ups + 1 if (prev is not None and e > prev and e > floor) else 0
        if ups >= DIVERGENCE_RUN:
            _finish(report)
            raise DivergenceError(f"Picard increments grew {DIVERGENCE_RUN} times in a row (e_{n}={e:.3e})", report)
    _finish(report)
    return it, report


def _finish(report):
    tail = [r for r in report.ratios[1:] if not math.isnan(r)]
    report.empirical_contraction = bool(tail) and all(r < 1.0 for r in tail)


def compose_solution(UV: Trajectory, hom: Trajectory, sources=None) -> Trajectory:
    """``(u, v) = (U + psi, V + phi)``; ``sources`` replaces the stored source histories."""
    if UV.u.shape != hom.u.shape or UV.grid != hom.grid or UV.tgrid != hom.tgrid:
        raise ValueError("trajectories live on different grids")
    f, g = (UV.f + hom.f, UV.g + hom.g) if sources is None else sources
    return Trajectory(
        UV.grid,
        UV.tgrid,
        UV.beta,
        UV.gamma,
        UV.u + hom.u,
        UV.v + hom.v,
        UV.du + hom.du,
        UV.dv + hom.dv,
        np.asarray(f),
        np.asarray(g),
        UV.lam_u + hom.lam_u,
        UV.lam_v + hom.lam_v,
        dict(hom.projected),
    )


def nonlinear_residual(traj: Trajectory, spec: ProblemSpec, src: NonlinearSource) -> np.ndarray:
    """Per-step residual of the composed solution against the nonlinear system.

    The sources are re-evaluated at the composed fields themselves, so the
    residual measures the remaining Picard lag plus rounding. Entry ``n - 1``
    is step ``n``.
    """
    g = traj.grid
    _, _, _, forcing, _ = ingest(spec)
    F, G = src.evaluate(traj.u, traj.v, gradient(traj.u, g), gradient(traj.v, g))
    f, gg = forcing[0] + F, forcing[1] + G
    return np.array([residual(traj, spec, n, f=f, g=gg) for n in range(1, traj.nt + 1)])


def uniqueness_check(spec: ProblemSpec, src: NonlinearSource, seeds=None, tol=None, max_iter=None):
    """Distance between the fixed points reached from two seeds.

    ``seeds`` defaults to ``(0, 0)`` and the homogeneous fields ``(psi, phi)``.
    Returns ``(distance, reports)``; both runs must converge.
    """
    tol = spec.tol if tol is None else tol
    hom = solve_homogeneous(spec)
    if seeds is None:
        seeds = (None, (hom.u, hom.v))
    out, reports = [], []
    for s in seeds:
        it, rep = picard_iterate(spec, src, tol, max_iter, seed=s, homogeneous=hom)
        if not rep.converged:
            raise DivergenceError("a uniqueness run did not converge", rep)
        out.append(it)
        reports.append(rep)
    gt = (out[0].grid, out[0].tgrid)
    d = math.hypot(space_time_norm(out[0].u - out[1].u, gt), space_time_norm(out[0].v - out[1].v, gt))
    return d, reports


def write_picard_report(report: PicardReport, csv_path, txt_path=None) -> None:
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "increment_norm", "ratio"])
        for n, (e, r) in enumerate(zip(report.increments, report.ratios), start=1):
            w.writerow([n, f"{e:.17g}", "" if math.isnan(r) else f"{r:.17g}"])
    if txt_path is not None:
        lk = report.log_K_star
        lines = [
            "Picard iteration report",
            f"iterations            = {report.iterations}",
            f"converged             = {report.converged}",
            f"final increment       = {report.increments[-1]:.17g}" if report.increments else "final increment       = n/a",
            f"tolerance             = {report.tol:g} * {report.scale:.17g}",
            f"K*                    = {report.K_star:.17g}",
            f"log K*                = {'-inf' if lk == mpmath.ninf else mpmath.nstr(lk, 17)}",
            f"hypothesis K* < 1/4   = {report.hypothesis}",
            f"empirical contraction = {report.empirical_contraction}",
            f"verdict               = {report.verdict}",
        ]
        with open(txt_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
