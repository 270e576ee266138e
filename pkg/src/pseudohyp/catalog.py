"""Catalog of initial profiles, linear sources and manufactured solutions.

Every profile has zero slope at the axis and at ``x = b``, so the Neumann
condition holds analytically; the discrete integral constraint is enforced
at ingestion by projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fracops
from .assembly import bessel_operator
from .fracops import TimeGrid
from .weighted import Grid, weighted_mean_project

__all__ = [
    "Profile",
    "Source",
    "Manufactured",
    "PROFILE_PARAMS",
    "SOURCE_PARAMS",
    "mode_offset",
    "admissible_mode",
    "admissible_mode_operator",
]


def mode_offset(k: int) -> float:
    """Constant ``c_k`` with ``int_0^b x (c_k + cos(k pi x / b)) dx = 0``."""
    if k < 1:
        raise ValueError(f"mode index must be >= 1, got {k}")
    return 2.0 * (1.0 - math.cos(k * math.pi)) / (k * math.pi) ** 2


def admissible_mode(x, b: float, k: int = 1) -> np.ndarray:
    """``c_k + cos(k pi x / b)``; ``k = 1`` gives ``4/pi^2 + cos(pi x / b)``."""
    return mode_offset(k) + np.cos(k * np.pi * np.asarray(x) / b)


def admissible_mode_operator(x, b: float, k: int = 1) -> np.ndarray:
    """Exact ``(1/x)(x p')'`` of :func:`admissible_mode`."""
    x = np.asarray(x, dtype=float)
    w = k * np.pi / b
    return -(w**2) * np.cos(w * x) - w * np.sin(w * x) / x


# allowed parameter names and their types, per catalog kind
PROFILE_PARAMS = {
    "zero": {},
    "admissible_mode": {"amplitude": float, "k": int},
    "modes": {"coeffs": list},
    "poly_projected": {"amplitude": float},
}

SOURCE_PARAMS = {
    "zero": {},
    "mode": {"amplitude": float, "k": int, "c0": float, "c1": float, "c2": float},
    "modes": {"coeffs": list},
}


def _check_params(kind, params, table, what):
    if kind not in table:
        raise ValueError(f"unknown {what} kind {kind!r}; expected one of {sorted(table)}")
    extra = set(params) - set(table[kind])
    if extra:
        raise ValueError(f"unknown parameter(s) {sorted(extra)} for {what} {kind!r}")


@dataclass(frozen=True)
class Profile:
    """Initial profile ``phi(x)``: a catalog kind plus parameters."""

    kind: str = "zero"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_params(self.kind, self.params, PROFILE_PARAMS, "profile")

    def __hash__(self):
        return hash((self.kind, tuple(sorted((k, str(v)) for k, v in self.params.items()))))

    def evaluate(self, g: Grid) -> np.ndarray:
        x, b = g.x, g.b
        p = self.params
        if self.kind == "zero":
            return np.zeros(g.nx)
        if self.kind == "admissible_mode":
            return float(p.get("amplitude", 1.0)) * admissible_mode(x, b, int(p.get("k", 1)))
        if self.kind == "modes":
            coeffs = [float(c) for c in p.get("coeffs", [])]
            out = np.zeros(g.nx)
            for k, a in enumerate(coeffs, start=1):
                out += a * admissible_mode(x, b, k)
            return out
        if self.kind == "poly_projected":
            raw = float(p.get("amplitude", 1.0)) * (x**2 / 2 - x**3 / (3 * b))
            return weighted_mean_project(raw, g)
        raise AssertionError(self.kind)


@dataclass(frozen=True)
class Source:
    """Linear source ``f(x, t)`` from the catalog.

    ``mode``: ``amplitude * (c_k + cos(k pi x/b)) * (c0 + c1 t + c2 t^2)``.
    ``modes``: ``coeffs`` holds ``3 K`` numbers ``a_{k,j}`` (row-major in
    ``k = 1..K``, ``j = 0..2``) for ``sum a_{k,j} (c_k + cos(k pi x/b)) t^j``.
    """

    kind: str = "zero"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_params(self.kind, self.params, SOURCE_PARAMS, "source")
        if self.kind == "modes" and len(self.params.get("coeffs", [])) % 3:
            raise ValueError("modes source needs 3 coefficients per spatial mode")

    def __hash__(self):
        return hash((self.kind, tuple(sorted((k, str(v)) for k, v in self.params.items()))))

    def history(self, g: Grid, tg: TimeGrid) -> np.ndarray:
        """Samples on every time node, shape ``(nt+1, nx)``."""
        t = tg.nodes
        x, b = g.x, g.b
        p = self.params
        if self.kind == "zero":
            return np.zeros((tg.nt + 1, g.nx))
        if self.kind == "mode":
            shape = float(p.get("amplitude", 1.0)) * admissible_mode(x, b, int(p.get("k", 1)))
            tpoly = float(p.get("c0", 1.0)) + float(p.get("c1", 0.0)) * t + float(p.get("c2", 0.0)) * t**2
            return np.outer(tpoly, shape)
        if self.kind == "modes":
            a = np.asarray([float(c) for c in p.get("coeffs", [])]).reshape(-1, 3)
            powers = np.stack([np.ones_like(t), t, t**2])
            shapes = np.stack([admissible_mode(x, b, k) for k in range(1, a.shape[0] + 1)]) if a.size else np.zeros((0, g.nx))
            return powers.T @ a.T @ shapes if a.size else np.zeros((tg.nt + 1, g.nx))
        raise AssertionError(self.kind)


def _poly(coeffs, t):
    c = list(coeffs) + [0.0] * (3 - len(coeffs))
    return c[0] + c[1] * t + c[2] * t**2


def _poly_rate(coeffs, t):
    c = list(coeffs) + [0.0] * (3 - len(coeffs))
    return c[1] + 2 * c[2] * t


def _poly_caputo(coeffs, order, t):
    # only the t^2 term survives an order in (1,2)
    c = list(coeffs) + [0.0] * (3 - len(coeffs))
    return c[2] * 2.0 * np.asarray(t) ** (2.0 - order) / math.gamma(3.0 - order)


@dataclass(frozen=True)
class Manufactured:
    """Exact pair ``u* = P_u(t) p(x)``, ``v* = P_v(t) p(x)`` with ``p`` an admissible mode.

    ``P_u``, ``P_v`` are polynomials of degree <= 2 given by coefficient
    triples. The matching sources use the exact operators by default;
    ``discrete_time`` replaces the time operators by the stepper's own (L1
    Caputo, backward differences) and ``discrete_space`` replaces ``p`` and
    its cylindrical operator by the projected samples and the flux-form
    operator. With both set and affine ``P`` the scheme reproduces ``u*``
    up to rounding.
    """

    u_time: tuple = (1.0, 0.0, 1.0)
    v_time: tuple = (0.0, 0.0, 0.0)
    k: int = 1
    discrete_time: bool = False
    discrete_space: bool = False

    def __post_init__(self):
        for name in ("u_time", "v_time"):
            c = getattr(self, name)
            if len(c) > 3:
                raise ValueError(f"{name} must have at most 3 coefficients")
            object.__setattr__(self, name, tuple(float(v) for v in c) + (0.0,) * (3 - len(c)))
        if self.k < 1:
            raise ValueError("mode index k must be >= 1")

    def shape(self, g: Grid) -> np.ndarray:
        """Projected samples of ``p``; the discrete representative of the exact shape."""
        return weighted_mean_project(admissible_mode(g.x, g.b, self.k), g)

    def initial_data(self, g: Grid):
        p = admissible_mode(g.x, g.b, self.k)
        return (
            self.u_time[0] * p,
            self.u_time[1] * p,
            self.v_time[0] * p,
            self.v_time[1] * p,
        )

    def exact(self, g: Grid, tg: TimeGrid):
        t = tg.nodes
        p = self.shape(g)
        return np.outer(_poly(self.u_time, t), p), np.outer(_poly(self.v_time, t), p)

    def _time_terms(self, coeffs, order, tg):
        t = tg.nodes
        vals = _poly(coeffs, t)
        if not self.discrete_time:
            return vals, _poly_rate(coeffs, t), _poly_caputo(coeffs, order, t)
        rate = np.empty_like(vals)
        rate[0] = coeffs[1]
        rate[1:] = np.diff(vals) / tg.dt
        cap = np.zeros_like(vals)
        cap[1:] = fracops.caputo_low_series(rate, order - 1.0, tg)
        return vals, rate, cap

    def sources(self, g: Grid, tg: TimeGrid, beta: float, gamma: float, z1: float, z2: float):
        """Source histories ``(f, g)`` of shape ``(nt+1, nx)``."""
        if self.discrete_space:
            p = self.shape(g)
            bp = bessel_operator(g).apply(p)
        else:
            p = admissible_mode(g.x, g.b, self.k)
            bp = admissible_mode_operator(g.x, g.b, self.k)
        pu, ru, cu = self._time_terms(self.u_time, beta, tg)
        pv, rv, cv = self._time_terms(self.v_time, gamma, tg)
        f = np.outer(cu + ru, p) - np.outer(pu + ru, bp) + z1 * np.outer(pv, p)
        gg = np.outer(cv + rv, p) - np.outer(pv + rv, bp) + z2 * np.outer(pu, p)
        return f, gg
