"""Scenario runner, canned scenarios and manufactured-solution convergence studies.

Exit-code contract: 0 success, 1 numerical failure (blow-up, divergence,
non-convergence, failed audit or non-decreasing convergence errors),
2 configuration error (nothing written).
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .catalog import Manufactured, Profile, Source
from .config import ScenarioConfig
from .energy import audit_energy, constants, write_constants_csv, write_energy_report
from .errors import ConfigError, DivergenceError, NumericalError
from .fracops import TimeGrid
from .picard import (
    NonlinearSource,
    compose_solution,
    picard_iterate,
    solve_homogeneous,
    write_picard_report,
)
from .stepper import ProblemSpec, solve_linear, write_norms_csv, write_trajectory_csv
from .weighted import (
    audit_inequalities,
    norm_rho,
    random_admissible_fields,
    random_time_draws,
    write_audit_csv,
)

__all__ = [
    "EXIT_OK",
    "EXIT_NUMERICAL",
    "EXIT_CONFIG",
    "RunResult",
    "run_scenario",
    "run_audit",
    "oldroyd_scenario",
    "small_delta_scenario",
    "manufactured_scenario",
    "zero_scenario",
    "SCENARIOS",
    "ConvergenceTable",
    "convergence_study",
    "write_convergence_csv",
]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2


@dataclass
class RunResult:
    code: int
    written: list
    message: str = ""
    trajectory: object = None
    energy: object = None
    picard: object = None


def _outdir(cfg, output):
    out = Path(output if output is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_scenario(cfg: ScenarioConfig, output=None) -> RunResult:
    """Solve ``cfg`` and write its artifacts.

    Linear and manufactured modes write ``trajectory.csv``, ``norms.csv``,
    ``constants.csv``, ``energy.csv`` and ``energy.txt``; nonlinear mode adds
    ``picard.csv`` and ``picard.txt`` and audits the composed solution.
    """
    spec = cfg.spec
    written = []
    try:
        if cfg.mode == "nonlinear":
            src = cfg.nonlinear
            hom = solve_homogeneous(spec)
            try:
                uv, rep = picard_iterate(spec, src, homogeneous=hom)
            except DivergenceError as exc:
                out = _outdir(cfg, output)
                if exc.report is not None:
                    write_picard_report(exc.report, out / "picard.csv", out / "picard.txt")
                    written += [out / "picard.csv", out / "picard.txt"]
                return RunResult(EXIT_NUMERICAL, written, str(exc), picard=exc.report)
            traj = compose_solution(uv, hom)
            consts = constants(spec, src.delta1, src.delta2)
        else:
            traj = solve_linear(spec)
            rep = None
            consts = constants(spec)
    except NumericalError as exc:
        return RunResult(EXIT_NUMERICAL, written, str(exc))

    energy = audit_energy(traj, spec, consts)
    out = _outdir(cfg, output)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_norms_csv(traj, out / "norms.csv")
    write_constants_csv(consts, out / "constants.csv")
    write_energy_report(energy, out / "energy.csv", out / "energy.txt")
    written += [out / n for n in ("trajectory.csv", "norms.csv", "constants.csv", "energy.csv", "energy.txt")]
    code, msg = EXIT_OK, "ok"
    if rep is not None:
        write_picard_report(rep, out / "picard.csv", out / "picard.txt")
        written += [out / "picard.csv", out / "picard.txt"]
        if not rep.converged:
            code, msg = EXIT_NUMERICAL, f"Picard iteration did not converge in {rep.iterations} iterations"
        else:
            msg = rep.verdict
    return RunResult(code, written, msg, traj, energy, rep)


def run_audit(cfg: ScenarioConfig, output=None, draws: int = 1000, seed: int = 20240607) -> RunResult:
    """Energy audit of the scenario plus the inequality ensemble on its grid."""
    res = run_scenario(cfg, output)
    if res.code != EXIT_OK:
        return res
    spec = cfg.spec
    rng = np.random.default_rng(seed)
    g = spec.grid
    tg = TimeGrid(spec.T, max(spec.nt, 512))
    checks = audit_inequalities(
        random_admissible_fields(rng, g, draws),
        g,
        lemma_draws=random_time_draws(rng, tg, draws, "lemma"),
        integral_draws=random_time_draws(rng, tg, draws, "integral"),
        time_grid=tg,
    )
    out = _outdir(cfg, output)
    write_audit_csv(checks, out / "inequalities.csv")
    res.written.append(out / "inequalities.csv")
    failed = [c.name for c in checks if not c.passed]
    if not res.energy.passed:
        failed.append("energy_bound")
    if failed:
        res.code, res.message = EXIT_NUMERICAL, "failed checks: " + ", ".join(failed)
    else:
        res.message = "all audits passed"
    return res


# canned scenarios


def oldroyd_scenario(nx: int = 64, nt: int = 256, T: float = 1.0) -> ScenarioConfig:
    """Two decoupled fractional equations: no coupling, no sources, nonzero initial profiles."""
    spec = ProblemSpec(
        b=1.0,
        T=T,
        beta=1.6,
        gamma=1.4,
        z1=0.0,
        z2=0.0,
        phi1=Profile("admissible_mode", {"amplitude": 1.0, "k": 1}),
        phi2=Profile("zero"),
        psi1=Profile("admissible_mode", {"amplitude": 0.5, "k": 2}),
        psi2=Profile("modes", {"coeffs": [0.1, 0.05]}),
        nx=nx,
        nt=nt,
    )
    return ScenarioConfig(spec=spec, mode="linear", output="oldroyd")


def small_delta_scenario(delta: float = 1e-6, nx: int = 64, nt: int = 256, T: float = 0.5) -> ScenarioConfig:
    """Weakly nonlinear ``sat_mix`` problem with smooth coupled data."""
    spec = ProblemSpec(
        b=1.0,
        T=T,
        beta=1.5,
        gamma=1.5,
        z1=0.5,
        z2=0.25,
        phi1=Profile("admissible_mode", {"amplitude": 1.0, "k": 1}),
        phi2=Profile("modes", {"coeffs": [0.2, 0.1]}),
        psi1=Profile("admissible_mode", {"amplitude": 0.5, "k": 2}),
        psi2=Profile("zero"),
        f=Source("mode", {"amplitude": 0.1, "k": 1, "c0": 1.0, "c1": 0.0, "c2": 0.0}),
        nx=nx,
        nt=nt,
        tol=1e-10,
        max_iter=20,
    )
    return ScenarioConfig(spec=spec, mode="nonlinear", nonlinear=NonlinearSource("sat_mix", delta, delta), output="small_delta")


def manufactured_scenario(nx: int = 32, nt: int = 128, discrete_time: bool = False) -> ScenarioConfig:
    """``u* = (1 + t^2)(4/pi^2 + cos(pi x / b))``, ``v* = 0`` on ``[0, 1]``."""
    spec = ProblemSpec(
        b=1.0,
        T=1.0,
        beta=1.5,
        gamma=1.5,
        nx=nx,
        nt=nt,
        manufactured=Manufactured(u_time=(1.0, 0.0, 1.0), v_time=(0.0, 0.0, 0.0), discrete_time=discrete_time),
    )
    return ScenarioConfig(spec=spec, mode="manufactured", output="manufactured")


def zero_scenario(nx: int = 16, nt: int = 32) -> ScenarioConfig:
    return ScenarioConfig(spec=ProblemSpec(T=0.5, nx=nx, nt=nt), mode="linear", output="zero")


SCENARIOS = {
    "oldroyd": oldroyd_scenario,
    "small_delta": small_delta_scenario,
    "manufactured": manufactured_scenario,
    "zero": zero_scenario,
}


# convergence study


@dataclass
class ConvergenceTable:
    rows: list
    decreasing: bool
    floor: float

    def column(self, name):
        return [r[name] for r in self.rows]


def _space_time_error(err, g, tg):
    sq = norm_rho(err, g) ** 2
    return math.sqrt(tg.dt * (sq.sum() - 0.5 * (sq[0] + sq[-1])))


def _level(spec: ProblemSpec, level: int) -> dict:
    s = replace(spec, nx=spec.nx * 2**level, nt=spec.nt * 2**level)
    traj = solve_linear(s)
    ue, ve = s.manufactured.exact(s.grid, s.time_grid)
    g, tg = s.grid, s.time_grid
    eu, ev = traj.u - ue, traj.v - ve
    err_l2 = math.hypot(_space_time_error(eu, g, tg), _space_time_error(ev, g, tg))
    err_max = float(np.max(np.sqrt(norm_rho(eu, g) ** 2 + norm_rho(ev, g) ** 2)))
    scale = float(np.max(np.sqrt(norm_rho(ue, g) ** 2 + norm_rho(ve, g) ** 2)))
    return {"level": level, "nx": s.nx, "nt": s.nt, "h": g.h, "dt": tg.dt, "err_l2": err_l2, "err_max": err_max, "scale": scale}


def convergence_study(base: ScenarioConfig, levels: int, workers: int = 1) -> ConvergenceTable:
    """Run the base grid and ``levels`` simultaneous ``(h, dt)`` halvings.

    Observed orders are ``log2(e_k / e_{k+1})`` on the space-time error.
    ``decreasing`` requires strictly decreasing errors, except that errors
    already below ``1e-12 * scale`` (the exactness case) count as converged.
    """
    if base.spec.manufactured is None:
        raise ConfigError("convergence study needs a manufactured scenario", key="source.mode")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    idx = list(range(levels + 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_level, [base.spec] * len(idx), idx))
    else:
        rows = [_level(base.spec, k) for k in idx]
    floor = 1e-12 * max(r["scale"] for r in rows)
    decreasing = True
    for prev, row in zip(rows, rows[1:]):
        row["order"] = math.log2(prev["err_l2"] / row["err_l2"]) if row["err_l2"] > 0 and prev["err_l2"] > 0 else math.nan
        if not (row["err_l2"] < prev["err_l2"] or max(row["err_l2"], prev["err_l2"]) <= floor):
            decreasing = False
    rows[0]["order"] = math.nan
    return ConvergenceTable(rows, decreasing, floor)


def write_convergence_csv(table: ConvergenceTable, path) -> None:
    cols = ["level", "nx", "nt", "h", "dt", "err_l2", "err_max", "order"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in table.rows:
            w.writerow([r[c] if isinstance(r[c], int) else ("" if math.isnan(r[c]) else f"{r[c]:.17g}") for c in cols])
