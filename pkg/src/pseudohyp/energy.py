"""Stability constants, discrete energy norms and Gronwall-type audits.

The constants of the a priori bound grow through nested exponentials and
Mittag-Leffler factors, so they are carried as natural logarithms in
:mod:`mpmath` precision; ``M = Y** exp(T Y**)`` is usually far outside the
double range and is never materialized as a float.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import fracops
from .fracops import TimeGrid
from .stepper import ProblemSpec, Trajectory
from .weighted import h1_norm, inner_rho

__all__ = [
    "Constants",
    "CONSTANT_NAMES",
    "constants",
    "wbeta_norm",
    "EnergyReport",
    "audit_energy",
    "GronwallReport",
    "audit_frac_gronwall",
    "audit_classical_gronwall",
    "write_constants_csv",
    "write_energy_report",
    "FALLBACK_FACTOR",
]

CONSTANT_NAMES = (
    "D_star",
    "D_star_star",
    "chi",
    "chi_star",
    "Y",
    "Y_star",
    "Y_star_star",
    "M",
    "K_star",
    "D_star_summary",
    "chi_star_summary",
)

FALLBACK_FACTOR = 1e6
_mp = mpmath.mpf


def _to_float(logval) -> float:
    if logval == mpmath.ninf or logval < -746:
        return 0.0
    if logval > 710:
        return math.inf
    try:
        val = float(mpmath.exp(logval))
    except OverflowError:
        return math.inf
    return val


@dataclass(frozen=True)
class Constants:
    """Named constants stored by natural logarithm.

    ``self["M"]`` gives a float (``inf`` when out of range) and
    ``self.log("M")`` the exact mpmath logarithm. ``values`` holds constants
    evaluated directly in double arithmetic, which take precedence over the
    exponentiated logs. ``asymptotic`` records whether any Mittag-Leffler
    factor was evaluated past the series range.
    """

    logs: dict
    delta1: float = 0.0
    delta2: float = 0.0
    asymptotic: bool = False
    values: dict = field(default_factory=dict)

    def log(self, name: str):
        return self.logs[name]

    def __getitem__(self, name: str) -> float:
        if name in self.values:
            return self.values[name]
        return _to_float(self.logs[name])

    @property
    def overflow(self) -> bool:
        return math.isinf(self["M"])

    def items(self):
        return [(n, self[n], self.logs[n]) for n in CONSTANT_NAMES]


def _lgamma(x):
    return mpmath.log(mpmath.gamma(_mp(x)))


def _log_chi_star_term(order, chi_log, T, asym):
    """``log[Gamma(l-1) E_{l-1,l-1}(chi T^(l-1)) max(1, T^(l-1)/((l-1)Gamma(l-1)))]``."""
    a = _mp(order) - 1
    arg = mpmath.exp(chi_log + a * mpmath.log(T))
    if arg > fracops.ml_series_guard(float(a)):
        asym.append(True)
    log_e = fracops.log_mittag_leffler(float(a), float(a), arg)
    log_tail = max(_mp(0), a * mpmath.log(T) - mpmath.log(a) - _lgamma(a))
    return _lgamma(a) + log_e + log_tail


def constants(spec: ProblemSpec, delta1: float = 0.0, delta2: float = 0.0) -> Constants:
    """Evaluate the bound's constant chain for ``spec`` and Lipschitz constants ``delta``.

    ``D_star_summary`` and ``chi_star_summary`` hold the shorter variants of
    ``D*`` and ``chi*`` (no coupling factor, single Mittag-Leffler band) for
    comparison; the chain itself uses the full forms.
    """
    if delta1 < 0 or delta2 < 0:
        raise ValueError("Lipschitz constants must be nonnegative")
    b, T = _mp(spec.b), _mp(spec.T)
    beta, gamma = _mp(spec.beta), _mp(spec.gamma)
    z1, z2 = _mp(spec.z1), _mp(spec.z2)
    asym: list = []

    d_star = 2 * max(_mp(3), b**6 / 8 + _mp(3) / 2, (z1**2 + z2**2) * b**4 / 8 + _mp(5) / 2)
    d_star_summary = 2 * max(_mp(3), b**6 / 8 + _mp(1) / 2, b**4 / 8 + _mp(5) / 2)

    def memory(order):
        return T ** (2 - order) / ((2 - order) * mpmath.gamma(2 - order))

    d2 = d_star * max(_mp(1), b**4 / 2, memory(beta), memory(gamma))
    log_chi = mpmath.log(d2) + mpmath.log(1 + d2 * mpmath.exp(d2 * T))

    tb = _log_chi_star_term(beta, log_chi, T, asym)
    tg = _log_chi_star_term(gamma, log_chi, T, asym)
    hi = max(tb, tg)
    log_chi_star = hi + mpmath.log(mpmath.exp(tb - hi) + mpmath.exp(tg - hi))

    growth = max(
        (beta - 1) * mpmath.log(T) - _lgamma(beta),
        (gamma - 1) * mpmath.log(T) - _lgamma(gamma),
    )
    log_y = log_chi_star + log_chi + growth
    log_ys = log_y - mpmath.log(min(_mp(1), b**2 / 4))
    log_yss = max(_mp(0), log_ys)
    log_m = log_yss + T * mpmath.exp(log_yss)

    dsq = _mp(delta1) ** 2 + _mp(delta2) ** 2
    log_k = mpmath.log(4) + log_m + mpmath.log(T) + mpmath.log(dsq) if dsq > 0 else mpmath.ninf

    logs = {
        "D_star": mpmath.log(d_star),
        "D_star_star": mpmath.log(d2),
        "chi": log_chi,
        "chi_star": log_chi_star,
        "Y": log_y,
        "Y_star": log_ys,
        "Y_star_star": log_yss,
        "M": log_m,
        "K_star": log_k,
        "D_star_summary": mpmath.log(d_star_summary),
        "chi_star_summary": tb,
    }
    values = {}
    m = _to_float(log_m)
    if math.isfinite(m):
        # plain product so that K* is exactly quadratic in delta
        values["K_star"] = (4.0 * m * float(spec.T)) * (float(delta1) ** 2 + float(delta2) ** 2)
    return Constants(logs, float(delta1), float(delta2), bool(asym), values)


def _trapezoid(vals, dt):
    vals = np.asarray(vals, dtype=float)
    return float(dt * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


def wbeta_norm(traj: Trajectory, component: str = "u", order: float | None = None) -> float:
    """Squared ``W^order`` norm of one component.

    ``int_0^T ||w||^2_{H^1_rho} + ||C-D^order w||^2_{H^1_rho} dt`` by the
    trapezoid rule over the time nodes, with the Caputo sample at ``t = 0``
    taken as 0. ``order`` defaults to the order the trajectory was marched with.
    """
    if component == "u":
        w, rates, own = traj.u, traj.du, traj.beta
    elif component == "v":
        w, rates, own = traj.v, traj.dv, traj.gamma
    else:
        raise ValueError(f"component must be 'u' or 'v', got {component!r}")
    if w.shape[0] != traj.nt + 1 or not np.all(np.isfinite(w)):
        raise ValueError("trajectory is incomplete")
    order = own if order is None else order
    cap = np.zeros_like(w)
    cap[1:] = fracops.caputo_low_series(rates, order - 1.0, traj.tgrid)
    g, dt = traj.grid, traj.tgrid.dt
    return _trapezoid(h1_norm(w, g, squared=True), dt) + _trapezoid(h1_norm(cap, g, squared=True), dt)


@dataclass
class EnergyReport:
    """Discrete check of ``lhs <= M * rhs_data``.

    ``passed`` is decided in log form with relative slack ``1e-9``.
    ``fallback_pass`` (``lhs <= 1e6 * rhs_data``) is filled in only when ``M``
    is outside the double range; ``ratio`` then usually underflows to 0.
    """

    lhs: float
    rhs_data: float
    log_M: object
    log_ratio: object
    ratio: float
    passed: bool
    m_overflow: bool
    fallback_pass: bool | None
    terms: dict = field(default_factory=dict)


def audit_energy(traj: Trajectory, spec: ProblemSpec, consts: Constants | None = None) -> EnergyReport:
    """Evaluate both sides of the a priori bound on a marched trajectory."""
    c = constants(spec) if consts is None else consts
    g, dt = traj.grid, traj.tgrid.dt
    phi1, phi2, psi1, psi2 = traj.initial
    terms = {
        "W_u": wbeta_norm(traj, "u", spec.beta),
        "W_v": wbeta_norm(traj, "v", spec.gamma),
        "sup_u": float(np.max(h1_norm(traj.u, g, squared=True))),
        "sup_v": float(np.max(h1_norm(traj.v, g, squared=True))),
        "f": _trapezoid(inner_rho(traj.f, traj.f, g), dt),
        "g": _trapezoid(inner_rho(traj.g, traj.g, g), dt),
        "phi1": float(h1_norm(phi1, g, squared=True)),
        "psi1": float(h1_norm(psi1, g, squared=True)),
        "phi2": float(h1_norm(phi2, g, squared=True)),
        "psi2": float(h1_norm(psi2, g, squared=True)),
    }
    lhs = terms["W_u"] + terms["W_v"] + terms["sup_u"] + terms["sup_v"]
    rhs = sum(terms[k] for k in ("f", "g", "phi1", "psi1", "phi2", "psi2"))
    log_m = c.log("M")
    if lhs == 0.0:
        log_ratio = mpmath.ninf
        passed = True
    elif rhs == 0.0:
        log_ratio = mpmath.inf
        passed = False
    else:
        log_ratio = mpmath.log(lhs) - log_m - mpmath.log(rhs)
        passed = bool(log_ratio <= mpmath.log1p(1e-9))
    ratio = _to_float(log_ratio) if log_ratio != mpmath.inf else math.inf
    fallback = bool(lhs <= FALLBACK_FACTOR * rhs) if c.overflow else None
    return EnergyReport(lhs, rhs, log_m, log_ratio, ratio, passed, c.overflow, fallback, terms)


@dataclass
class GronwallReport:
    hypothesis_holds: bool
    hypothesis_violations: list
    conclusion_holds: bool
    worst_margin: float
    tolerance: float

    @property
    def passed(self) -> bool:
        """The lemma is refuted only when the hypothesis holds and the conclusion fails."""
        return (not self.hypothesis_holds) or self.conclusion_holds


def audit_frac_gronwall(P, C: float, k, beta: float, tg: TimeGrid) -> GronwallReport:
    """Discrete check of the fractional Gronwall lemma for order ``beta`` in (0, 1).

    Hypothesis at every node ``n >= 1``: ``C-D^beta P <= C P + k`` (L1
    derivative; roundoff slack only). Conclusion at every node:
    ``P(t) <= P(0) E_beta(C t^beta) + Gamma(beta) E_{beta,beta}(C t^beta) D^{-beta} k``
    within ``10 dt * scale``.
    """
    P = np.asarray(P, dtype=float)
    k = np.asarray(k, dtype=float)
    if C < 0:
        raise ValueError("C must be nonnegative")
    if np.any(k < 0):
        raise ValueError("k must be nonnegative")
    t = tg.nodes
    cap = fracops.caputo_low_series(P, beta, tg)
    scale = max(1.0, float(np.max(np.abs(P))), float(np.max(np.abs(C * P + k))))
    slack = 1e-12 * scale * tg.dt ** (-beta)
    bad = [int(n) for n in np.nonzero(cap > C * P[1:] + k[1:] + slack)[0] + 1]

    e1 = np.array([fracops.mittag_leffler(beta, 1.0, C * tn**beta) for tn in t])
    e2 = np.array([fracops.mittag_leffler(beta, beta, C * tn**beta) for tn in t])
    bound = P[0] * e1 + math.gamma(beta) * e2 * fracops.rl_integral_series(k, beta, tg)
    scale = max(scale, float(np.max(np.abs(bound))))
    tol = 10.0 * tg.dt * scale
    margin = bound - P
    return GronwallReport(not bad, bad, bool(np.all(margin >= -tol)), float(margin.min()), tol)


def audit_classical_gronwall(R, J, I, tg: TimeGrid) -> GronwallReport:
    """Discrete check of the integer-order Gronwall-Bellman lemma.

    Hypothesis: ``(R_n - R_{n-1})/dt <= J_n R_n + I_n``. Conclusion:
    ``R_n <= exp(int_0^t J)(R_0 + int_0^t I)`` within ``10 dt * scale``.
    """
    R, J, I = (np.asarray(a, dtype=float) for a in (R, J, I))
    if np.any(J < 0) or np.any(I < 0):
        raise ValueError("J and I must be nonnegative")
    dt = tg.dt
    scale = max(1.0, float(np.max(np.abs(R))))
    rate = np.diff(R) / dt
    bad = [int(n) for n in np.nonzero(rate > J[1:] * R[1:] + I[1:] + 1e-12 * scale / dt)[0] + 1]
    bound = np.exp(fracops.rl_integral_series(J, 1.0, tg)) * (R[0] + fracops.rl_integral_series(I, 1.0, tg))
    scale = max(scale, float(np.max(np.abs(bound))))
    tol = 10.0 * dt * scale
    margin = bound - R
    return GronwallReport(not bad, bad, bool(np.all(margin >= -tol)), float(margin.min()), tol)


def _mpstr(x) -> str:
    if x == mpmath.ninf:
        return "-inf"
    return mpmath.nstr(x, 17)


def write_constants_csv(consts: Constants, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "value", "log_value"])
        for name, val, lg in consts.items():
            w.writerow([name, f"{val:.17g}", _mpstr(lg)])


def energy_text(rep: EnergyReport) -> str:
    lines = [
        "a priori energy bound audit",
        f"lhs          = {rep.lhs:.17g}",
        f"rhs_data     = {rep.rhs_data:.17g}",
        f"log M        = {_mpstr(rep.log_M)}",
        f"log ratio    = {_mpstr(rep.log_ratio)}",
        f"M overflows  = {rep.m_overflow}",
        f"verdict      = {'PASS' if rep.passed else 'FAIL'} (log-space comparison)",
    ]
    if rep.fallback_pass is not None:
        lines.append(f"fallback     = {'PASS' if rep.fallback_pass else 'FAIL'} (lhs <= {FALLBACK_FACTOR:g} * rhs_data)")
    return "\n".join(lines) + "\n"


def write_energy_report(rep: EnergyReport, csv_path, txt_path=None) -> None:
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "value"])
        for k, v in rep.terms.items():
            w.writerow([k, f"{v:.17g}"])
        w.writerow(["lhs", f"{rep.lhs:.17g}"])
        w.writerow(["rhs_data", f"{rep.rhs_data:.17g}"])
        w.writerow(["log_M", _mpstr(rep.log_M)])
        w.writerow(["log_ratio", _mpstr(rep.log_ratio)])
        w.writerow(["passed", int(rep.passed)])
        w.writerow(["m_overflow", int(rep.m_overflow)])
        w.writerow(["fallback_pass", "" if rep.fallback_pass is None else int(rep.fallback_pass)])
    if txt_path is not None:
        with open(txt_path, "w") as fh:
            fh.write(energy_text(rep))
