"""INI scenario files.

Sections and keys (all optional unless noted)::

    [scenario]        name
    [grid]            nx, ny (required), lx = 1, ly = 1
    [params]          eps, tau, rho, mu            (default 1)
    [time]            dt = 1e-3, t_end = 1, max_steps, record_every = 1,
                      snapshot_every = 0, psi_stop = 0
    [tolerances]      potential, transport, velocity, projection, steady
    [xi]              value (all walls), bottom, top, left, right;
                      a number or an expression in the arc length ``s``
    [velocity]        kind = zero|uniform|shear|vortex, amp
    [output]          compute_steady = true
    [species.NAME]    z (required), D (required), initial = constant|cosine|gaussian,
                      value, amp, kx, ky, x0, y0, width, mass

``--set section.key=value`` overrides use the same names, e.g.
``time.dt=5e-4`` or ``species.cation.D=2``.
"""
from __future__ import annotations

import ast
import configparser
import math
import re

import numpy as np

from .dynamics import InitialCondition, ScenarioConfig, Tolerances, VelocityInit
from .mesh import EDGES, BoundaryTrace, build_grid
from .potential import PhysParams, Species


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending key."""


_SCHEMA = {
    "scenario": {"name": str},
    "grid": {"nx": int, "ny": int, "lx": float, "ly": float},
    "params": {"eps": float, "tau": float, "rho": float, "mu": float},
    "time": {"dt": float, "t_end": float, "max_steps": int, "record_every": int,
             "snapshot_every": int, "psi_stop": float},
    "tolerances": {"potential": float, "transport": float, "velocity": float,
                   "projection": float, "steady": float},
    "xi": {"value": str, "bottom": str, "top": str, "left": str, "right": str},
    "velocity": {"kind": str, "amp": float},
    "output": {"compute_steady": bool},
}
_SPECIES_KEYS = {"z": float, "D": float, "initial": str, "value": float, "amp": float,
                 "kx": float, "ky": float, "x0": float, "y0": float, "width": float,
                 "mass": float}

_EXPR_NAMES = {"pi": math.pi, "e": math.e, "sin": np.sin, "cos": np.cos, "tan": np.tan,
               "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "tanh": np.tanh, "abs": np.abs}
_EXPR_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
               ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def _schema_for(section: str):
    if section.startswith("species."):
        return _SPECIES_KEYS
    return _SCHEMA.get(section)


def _line_numbers(text: str) -> dict:
    """``(section, key) -> line`` for error messages."""
    lines, section = {}, None
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), n)
        elif section and s and s[0] not in "#;" and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            lines[(section, key)] = n
    return lines


def _where(lines, section, key=None):
    n = lines.get((section, key))
    name = f"{section}.{key}" if key else f"[{section}]"
    return f"{name} (line {n})" if n else name


def _convert(value: str, typ, where: str):
    try:
        if typ is bool:
            v = value.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if typ is int:
            return int(value)
        if typ is float:
            x = float(value)
            if not math.isfinite(x):
                raise ValueError
            return x
        return value.strip()
    except ValueError:
        raise ConfigError(f"{where}: expected {typ.__name__}, got {value!r}") from None


def edge_function(expr: str, where: str = "xi"):
    """Compile a wall-data expression in ``s`` (numbers, + - * / **, elementary functions)."""
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError:
        raise ConfigError(f"{where}: cannot parse expression {expr!r}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _EXPR_NODES):
            raise ConfigError(f"{where}: disallowed syntax in {expr!r}")
        if isinstance(node, ast.Name) and node.id != "s" and node.id not in _EXPR_NAMES:
            raise ConfigError(f"{where}: unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.Call) and not isinstance(node.func, ast.Name):
            raise ConfigError(f"{where}: disallowed call in {expr!r}")
    code = compile(tree, where, "eval")

    def fn(s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(eval(code, {"__builtins__": {}}, dict(_EXPR_NAMES, s=s)), s.shape).astype(float)

    return fn


def _apply_overrides(cp: configparser.ConfigParser, overrides):
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        lhs, value = item.split("=", 1)
        lhs = lhs.strip()
        if "." not in lhs:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        section, key = lhs.rsplit(".", 1)
        schema = _schema_for(section)
        if schema is None or key not in schema:
            raise ConfigError(f"override {item!r}: unknown key {lhs}")
        if section.startswith("species.") and not cp.has_section(section):
            raise ConfigError(f"override {item!r}: no species section [{section}]")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value.strip())


def parse_config(text: str, overrides=None, threads: int = 1) -> ScenarioConfig:
    """Parse and validate a scenario; errors name the key and line."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    lines = _line_numbers(text)
    _apply_overrides(cp, overrides)

    vals = {}
    for section in cp.sections():
        schema = _schema_for(section)
        if schema is None:
            raise ConfigError(f"{_where(lines, section)}: unknown section")
        for key, raw in cp.items(section):
            if key not in schema:
                raise ConfigError(f"{_where(lines, section, key)}: unknown key")
            vals[(section, key)] = _convert(raw, schema[key], _where(lines, section, key))

    def get(section, key, default=None):
        return vals.get((section, key), default)

    def require(section, key):
        if (section, key) not in vals:
            raise ConfigError(f"missing required key {section}.{key}")
        return vals[(section, key)]

    try:
        grid = build_grid(require("grid", "nx"), require("grid", "ny"),
                          get("grid", "lx", 1.0), get("grid", "ly", 1.0))
    except ValueError as exc:
        raise ConfigError(f"{_where(lines, 'grid')}: {exc}") from None

    pkw = {k: get("params", k) for k in ("eps", "tau", "rho", "mu") if get("params", k) is not None}
    try:
        params = PhysParams(**pkw)
    except ValueError as exc:
        bad = next((k for k in pkw if str(exc).startswith(k)), None)
        raise ConfigError(f"{_where(lines, 'params', bad)}: {exc}") from None

    names = [s for s in cp.sections() if s.startswith("species.")]
    if not names:
        raise ConfigError("configuration defines no [species.NAME] section")
    z, D, labels, initial = [], [], [], []
    for sec in names:
        label = sec.split(".", 1)[1]
        zi, Di = require(sec, "z"), require(sec, "D")
        if not Di > 0:
            raise ConfigError(f"species {label}: {_where(lines, sec, 'D')}: diffusivity must be positive, got {Di}")
        kind = get(sec, "initial", "constant")
        kw = {k: get(sec, k) for k in ("value", "amp", "kx", "ky", "x0", "y0", "width", "mass")
              if get(sec, k) is not None}
        try:
            ic = InitialCondition(kind, **kw)
            ic.build(grid, label)
        except ValueError as exc:
            key = "mass" if "mass" in str(exc) else "initial"
            raise ConfigError(f"{_where(lines, sec, key)}: {exc}") from None
        z.append(zi)
        D.append(Di)
        labels.append(label)
        initial.append(ic)
    species = Species(tuple(z), tuple(D), tuple(labels))

    edges = {}
    default = get("xi", "value", "0")
    for e in EDGES:
        raw = get("xi", e, default)
        where = _where(lines, "xi", e if ("xi", e) in vals else "value")
        try:
            edges[e] = float(raw)
        except ValueError:
            edges[e] = edge_function(raw, where)
    try:
        xi = BoundaryTrace.from_edges(grid, **edges)
    except (ValueError, FloatingPointError) as exc:
        raise ConfigError(f"[xi]: {exc}") from None

    try:
        velocity = VelocityInit(get("velocity", "kind", "zero"), get("velocity", "amp", 0.0))
    except ValueError as exc:
        raise ConfigError(f"{_where(lines, 'velocity', 'kind')}: {exc}") from None

    tkw = {k: get("tolerances", k) for k in ("potential", "transport", "velocity", "projection", "steady")
           if get("tolerances", k) is not None}
    for k, v in tkw.items():
        if not v > 0:
            raise ConfigError(f"{_where(lines, 'tolerances', k)}: tolerance must be positive")

    try:
        return ScenarioConfig(
            name=get("scenario", "name", "scenario"), grid=grid, species=species,
            initial=tuple(initial), xi=xi, params=params, velocity=velocity,
            dt=get("time", "dt", 1e-3), t_end=get("time", "t_end", 1.0),
            max_steps=get("time", "max_steps"), record_every=get("time", "record_every", 1),
            snapshot_every=get("time", "snapshot_every", 0), psi_stop=get("time", "psi_stop", 0.0),
            compute_steady=get("output", "compute_steady", True),
            tolerances=Tolerances(**tkw), threads=threads)
    except ValueError as exc:
        raise ConfigError(f"[time]: {exc}") from None
