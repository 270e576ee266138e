"""Scenario configuration: a sectioned key-value document.

Example::

    [problem]
    b = 1.0
    T = 0.5
    beta = 1.5
    gamma = 1.5
    z1 = 0.0
    z2 = 0.0

    [data]
    phi1 = admissible_mode
    phi1.amplitude = 1.0
    phi2 = zero
    psi1 = modes
    psi1.coeffs = 0.5, 0.25
    psi2 = zero

    [source]
    mode = nonlinear            # linear | nonlinear | manufactured
    catalog = sat_mix           # nonlinear only: zero | sat_mix | lin_mix
    delta1 = 1e-6
    delta2 = 1e-6
    f = zero                    # linear forcing, optional
    g = zero

    [discretization]
    nx = 64
    nt = 256

    [run]
    tol = 1e-10
    max_iter = 20
    output = out

In ``manufactured`` mode ``[data]`` must be absent and ``[source]`` takes
``u_time``, ``v_time`` (up to three polynomial coefficients), ``k``,
``discrete_time`` and ``discrete_space``. Unknown sections or keys, missing
keys and invalid values raise :class:`~pseudohyp.errors.ConfigError` naming
the key and its line.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, fields
from pathlib import Path

from .catalog import PROFILE_PARAMS, SOURCE_PARAMS, Manufactured, Profile, Source
from .errors import ConfigError
from .picard import NonlinearSource
from .stepper import ProblemSpec

__all__ = ["ScenarioConfig", "parse_config", "from_text", "to_text", "MODES"]

MODES = ("linear", "nonlinear", "manufactured")
_PROBLEM_KEYS = ("b", "T", "beta", "gamma", "z1", "z2")
_DATA_KEYS = ("phi1", "phi2", "psi1", "psi2")
_RUN_DEFAULTS = {"tol": 1e-10, "max_iter": 20, "output": "output"}


@dataclass(frozen=True)
class ScenarioConfig:
    spec: ProblemSpec
    mode: str = "linear"
    nonlinear: NonlinearSource | None = None
    output: str = "output"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if (self.mode == "manufactured") != (self.spec.manufactured is not None):
            raise ValueError("manufactured mode and a manufactured spec go together")
        if self.mode == "nonlinear" and self.nonlinear is None:
            raise ValueError("nonlinear mode needs a NonlinearSource")


def _line_index(text):
    """Map ``(section, key) -> line number`` and ``section -> header line``."""
    where, heads = {}, {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            heads.setdefault(section, no)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), no)
    return where, heads


class _Reader:
    def __init__(self, text):
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        self.cp.optionxform = str
        try:
            self.cp.read_string(text)
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"duplicate key in [{exc.section}]", key=exc.option, line=exc.lineno) from None
        except configparser.DuplicateSectionError as exc:
            raise ConfigError("duplicate section", key=f"[{exc.section}]", line=exc.lineno) from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        self.lines, self.heads = _line_index(text)
        self.used = set()

    def fail(self, section, key, msg):
        raise ConfigError(msg, key=f"{section}.{key}", line=self.lines.get((section, key), self.heads.get(section)))

    def has(self, section, key=None):
        if key is None:
            return self.cp.has_section(section)
        return self.cp.has_option(section, key)

    def raw(self, section, key, default=None, required=True):
        if not self.cp.has_section(section):
            if required and default is None:
                raise ConfigError(f"missing section [{section}]", key=f"[{section}]")
            return default
        if not self.cp.has_option(section, key):
            if required and default is None:
                self.fail(section, key, "missing required key")
            return default
        self.used.add((section, key))
        return self.cp.get(section, key).strip()

    def typed(self, section, key, kind, default=None, required=True):
        val = self.raw(section, key, default, required)
        if val is None or not isinstance(val, str):
            return val
        try:
            return _convert(val, kind)
        except ValueError:
            self.fail(section, key, f"expected {kind.__name__}, got {val!r}")

    def check_unknown(self, allowed_sections):
        for sec in self.cp.sections():
            if sec not in allowed_sections:
                raise ConfigError("unknown section", key=f"[{sec}]", line=self.heads.get(sec))
            for key in self.cp.options(sec):
                if (sec, key) not in self.used:
                    self.fail(sec, key, "unknown key")


def _convert(val, kind):
    if kind is bool:
        low = val.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(val)
    if kind is list:
        return [float(p) for p in val.split(",") if p.strip()]
    if kind is int:
        f = float(val)
        if not f.is_integer():
            raise ValueError(val)
        return int(f)
    return kind(val)


def _catalog_entry(rd, section, name, table, cls):
    kind = rd.raw(section, name)
    if kind not in table:
        rd.fail(section, name, f"unknown catalog id {kind!r}; expected one of {sorted(table)}")
    params = {}
    for key in rd.cp.options(section):
        if key.startswith(name + "."):
            pname = key[len(name) + 1 :]
            if pname not in table[kind]:
                rd.fail(section, key, f"unknown parameter for {kind!r}")
            params[pname] = rd.typed(section, key, table[kind][pname])
    try:
        return cls(kind, params)
    except ValueError as exc:
        rd.fail(section, name, str(exc))


def from_text(text: str) -> ScenarioConfig:
    """Parse and validate a configuration document."""
    rd = _Reader(text)
    prob = {k: rd.typed("problem", k, float) for k in _PROBLEM_KEYS}
    nx = rd.typed("discretization", "nx", int)
    nt = rd.typed("discretization", "nt", int)
    tol = rd.typed("run", "tol", float, _RUN_DEFAULTS["tol"])
    max_iter = rd.typed("run", "max_iter", int, _RUN_DEFAULTS["max_iter"])
    output = rd.raw("run", "output", _RUN_DEFAULTS["output"])
    mode = rd.raw("source", "mode")
    if mode not in MODES:
        rd.fail("source", "mode", f"mode must be one of {MODES}")

    kw = {}
    nonlinear = None
    if mode == "manufactured":
        if rd.has("data"):
            raise ConfigError("[data] is not allowed in manufactured mode", key="[data]", line=rd.heads.get("data"))
        try:
            kw["manufactured"] = Manufactured(
                u_time=tuple(rd.typed("source", "u_time", list, [1.0, 0.0, 1.0])),
                v_time=tuple(rd.typed("source", "v_time", list, [0.0, 0.0, 0.0])),
                k=rd.typed("source", "k", int, 1),
                discrete_time=rd.typed("source", "discrete_time", bool, False),
                discrete_space=rd.typed("source", "discrete_space", bool, False),
            )
        except ValueError as exc:
            rd.fail("source", "u_time", str(exc))
    else:
        for name in _DATA_KEYS:
            kw[name] = _catalog_entry(rd, "data", name, PROFILE_PARAMS, Profile)
        for name in ("f", "g"):
            if rd.has("source", name):
                kw[name] = _catalog_entry(rd, "source", name, SOURCE_PARAMS, Source)
        if mode == "nonlinear":
            cat = rd.raw("source", "catalog")
            d1 = rd.typed("source", "delta1", float)
            d2 = rd.typed("source", "delta2", float)
            try:
                nonlinear = NonlinearSource(cat, d1, d2)
            except ValueError as exc:
                rd.fail("source", "catalog", str(exc))

    rd.check_unknown({"problem", "data", "source", "discretization", "run"})
    try:
        spec = ProblemSpec(nx=nx, nt=nt, tol=tol, max_iter=max_iter, **prob, **kw)
    except ValueError as exc:
        key = _blame(str(exc))
        section = "problem" if key in _PROBLEM_KEYS else "discretization" if key in ("nx", "nt") else "run"
        rd.fail(section, key or "?", str(exc))
    return ScenarioConfig(spec=spec, mode=mode, nonlinear=nonlinear, output=output)


def _blame(message):
    for f in fields(ProblemSpec):
        if message.startswith(f.name + "=") or message.startswith(f.name + " "):
            return f.name
    return None


def parse_config(path) -> ScenarioConfig:
    """Read and validate the document at ``path``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return from_text(text)


def _num(x) -> str:
    return repr(float(x))


def _entry_lines(name, obj):
    out = [f"{name} = {obj.kind}"]
    for k, v in obj.params.items():
        if isinstance(v, (list, tuple)):
            out.append(f"{name}.{k} = " + ", ".join(_num(c) for c in v))
        elif isinstance(v, int):
            out.append(f"{name}.{k} = {v}")
        else:
            out.append(f"{name}.{k} = {_num(v)}")
    return out


def to_text(cfg: ScenarioConfig) -> str:
    """Emit ``cfg`` as a document that :func:`from_text` parses back to an equal value."""
    s = cfg.spec
    lines = ["[problem]"] + [f"{k} = {_num(getattr(s, k))}" for k in _PROBLEM_KEYS]
    if cfg.mode != "manufactured":
        lines += ["", "[data]"]
        for name in _DATA_KEYS:
            lines += _entry_lines(name, getattr(s, name))
    lines += ["", "[source]", f"mode = {cfg.mode}"]
    if cfg.mode == "manufactured":
        m = s.manufactured
        lines += [
            "u_time = " + ", ".join(_num(c) for c in m.u_time),
            "v_time = " + ", ".join(_num(c) for c in m.v_time),
            f"k = {m.k}",
            f"discrete_time = {str(m.discrete_time).lower()}",
            f"discrete_space = {str(m.discrete_space).lower()}",
        ]
    else:
        lines += _entry_lines("f", s.f) + _entry_lines("g", s.g)
        if cfg.mode == "nonlinear":
            n = cfg.nonlinear
            lines += [f"catalog = {n.kind}", f"delta1 = {_num(n.delta1)}", f"delta2 = {_num(n.delta2)}"]
    lines += ["", "[discretization]", f"nx = {s.nx}", f"nt = {s.nt}"]
    lines += ["", "[run]", f"tol = {_num(s.tol)}", f"max_iter = {s.max_iter}", f"output = {cfg.output}"]
    return "\n".join(lines) + "\n"
