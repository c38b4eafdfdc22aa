"""TOML run configuration: schema, validation and construction of the problem.

Layout (``schema_version = 1``)::

    schema_version = 1

    [problem]
    family = "power_product"   # gaussian | power_product | product | custom
    d = 2
    a = 1.5                    # power_product
    c = 0.1                    # power_product, product (interaction coupling)
    tau = 0.01                 # power_product, product (interaction smoothing)
    components = ["y^2/2 + y^4/4"]   # product: one expression in y per coordinate, or one for all
    expression = "x1^2/2 + x2^4/4"   # custom: expression in x1..xd

    [weight]
    family = "exp_eps_U"       # identity | exp_eps_U | optimize
    eps = [0.25, 0.25]         # exp_eps_U: a number or one value per coordinate
    objective = "gamma"        # optimize: gamma | lambda1_bound

    [grid]
    n = 161                    # oracle nodes per axis
    radius = 7.0               # oracle half-width
    box = 8.0                  # half-width of the box used for curvature infima
    inf_n = 201                # nodes per axis for the infimum scan

    [commands]
    run = ["bound", "eigs", "verify", "report"]
    bounds = ["first_order", "second_order", "cordero", "prop41"]
    k = 4                      # number of eigenvalues (at least d + 2 are computed)

    [output]
    dir = "gapbounds-out"
    csv = true
    figures = true

    [run]
    seed = 0
    threads = 0                # 0 keeps the library default
    dump_matrices = false

Every section except ``problem`` is optional. Unknown keys are rejected
with their dotted path.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from . import expr
from .errors import ConfigError, GapBoundsError
from .model import (Potential, custom_component, make_custom, make_gaussian, make_power_product,
                    make_product, InteractionTerm)

SCHEMA_VERSION = 1
COMMANDS = ("bound", "eigs", "verify", "report")
BOUNDS = ("first_order", "second_order", "cordero", "prop41")
FAMILIES = ("gaussian", "power_product", "product", "custom")
WEIGHTS = ("identity", "exp_eps_U", "optimize")
ENV_PREFIX = "GAPBOUNDS_"

_NUM = (int, float)

SCHEMA = {
    "problem": {"family": str, "d": int, "a": _NUM, "c": _NUM, "tau": _NUM,
                "components": list, "expression": str},
    "weight": {"family": str, "eps": (int, float, list), "objective": str},
    "grid": {"n": int, "radius": _NUM, "box": _NUM, "inf_n": int},
    "commands": {"run": list, "bounds": list, "k": int},
    "output": {"dir": str, "csv": bool, "figures": bool},
    "run": {"seed": int, "threads": int, "dump_matrices": bool},
}


@dataclass
class RunConfig:
    family: str
    d: int
    params: dict = field(default_factory=dict)
    weight: str = "identity"
    eps: Optional[list] = None
    objective: str = "gamma"
    grid_n: Optional[int] = None
    radius: Optional[float] = None
    box: float = 8.0
    inf_n: Optional[int] = None
    commands: tuple = ("bound", "eigs")
    bounds: tuple = BOUNDS
    k: Optional[int] = None
    out: str = "gapbounds-out"
    csv: bool = True
    figures: bool = True
    seed: int = 0
    threads: int = 0
    dump_matrices: bool = False

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["commands"] = list(self.commands)
        out["bounds"] = list(self.bounds)
        return out

    def build_potential(self) -> Potential:
        try:
            return _build_potential(self)
        except ConfigError:
            raise
        except (GapBoundsError, ValueError) as exc:
            raise ConfigError(f"problem: {exc}") from exc


def _type_ok(value, types):
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        return False
    return isinstance(value, types)


def _validate(doc: dict):
    for key in doc:
        if key == "schema_version":
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown key '{key}'")
        if not isinstance(doc[key], dict):
            raise ConfigError(f"'{key}' must be a table")
        for sub, value in doc[key].items():
            if sub not in SCHEMA[key]:
                raise ConfigError(f"unknown key '{key}.{sub}'")
            if not _type_ok(value, SCHEMA[key][sub]):
                raise ConfigError(f"'{key}.{sub}' has the wrong type ({type(value).__name__})")
    version = doc.get("schema_version")
    if version is None:
        raise ConfigError("missing 'schema_version'")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"'schema_version' {version!r} is not supported (expected {SCHEMA_VERSION})")
    if "problem" not in doc:
        raise ConfigError("missing table 'problem'")


def _choice(value, allowed, where):
    if value not in allowed:
        raise ConfigError(f"'{where}' must be one of {', '.join(allowed)}, got {value!r}")
    return value


def from_dict(doc: dict) -> RunConfig:
    _validate(doc)
    p = doc["problem"]
    family = _choice(p.get("family"), FAMILIES, "problem.family")
    if "d" not in p:
        raise ConfigError("missing key 'problem.d'")
    d = p["d"]
    if d < 1:
        raise ConfigError("'problem.d' must be at least 1")
    needed = {"power_product": ("a", "c", "tau"), "product": ("components",), "custom": ("expression",)}
    for key in needed.get(family, ()):
        if key not in p:
            raise ConfigError(f"missing key 'problem.{key}' for family {family}")
    params = {k: v for k, v in p.items() if k not in ("family", "d")}

    w = doc.get("weight", {})
    weight = _choice(w.get("family", "identity"), WEIGHTS, "weight.family")
    eps = w.get("eps")
    if weight == "exp_eps_U" and eps is None:
        raise ConfigError("missing key 'weight.eps' for family exp_eps_U")
    if eps is not None:
        eps = [float(e) for e in (eps if isinstance(eps, list) else [eps] * d)]
        if len(eps) != d:
            raise ConfigError(f"'weight.eps' needs {d} values, got {len(eps)}")
    objective = _choice(w.get("objective", "gamma"), ("gamma", "lambda1_bound"), "weight.objective")

    g = doc.get("grid", {})
    c = doc.get("commands", {})
    commands = tuple(c.get("run", ["bound", "eigs"]))
    for k, name in enumerate(commands):
        _choice(name, COMMANDS, f"commands.run[{k}]")
    bounds = tuple(c.get("bounds", BOUNDS))
    for k, name in enumerate(bounds):
        _choice(name, BOUNDS, f"commands.bounds[{k}]")
    o = doc.get("output", {})
    r = doc.get("run", {})
    cfg = RunConfig(
        family=family, d=d, params=params, weight=weight, eps=eps, objective=objective,
        grid_n=g.get("n"), radius=None if "radius" not in g else float(g["radius"]),
        box=float(g.get("box", 8.0)), inf_n=g.get("inf_n"),
        commands=commands, bounds=bounds, k=c.get("k"),
        out=o.get("dir", "gapbounds-out"), csv=o.get("csv", True), figures=o.get("figures", True),
        seed=r.get("seed", 0), threads=r.get("threads", 0), dump_matrices=r.get("dump_matrices", False),
    )
    if cfg.seed < 0:
        raise ConfigError("'run.seed' must be non-negative")
    if cfg.box <= 0 or (cfg.radius is not None and cfg.radius <= 0):
        raise ConfigError("'grid.box' and 'grid.radius' must be positive")
    if cfg.grid_n is not None and cfg.grid_n < 16:
        raise ConfigError("'grid.n' must be at least 16")
    return cfg


def loads(text: str) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax: {exc}") from None
    return from_dict(doc)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def env_overrides(environ=None) -> dict:
    """Values from GAPBOUNDS_CONFIG, _OUT, _SEED, _THREADS and _DUMP_MATRICES."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, conv in (("CONFIG", str), ("OUT", str), ("SEED", int), ("THREADS", int),
                       ("DUMP_MATRICES", lambda s: s.strip().lower() in ("1", "true", "yes", "on"))):
        raw = environ.get(ENV_PREFIX + name)
        if raw is None or raw == "":
            continue
        try:
            out[name.lower()] = conv(raw)
        except ValueError:
            raise ConfigError(f"environment variable {ENV_PREFIX + name}={raw!r} is not valid") from None
    return out


# ---------------------------------------------------------------------------


def _expression_component(text, index):
    try:
        e = expr.parse_component(text)
    except ConfigError as exc:
        raise ConfigError(f"problem.components[{index}]: {exc}") from None
    return custom_component(lambda y: np.broadcast_to(e(np.asarray(y, dtype=float)), np.shape(y)) * 1.0,
                            label=text)


def _build_potential(cfg: RunConfig) -> Potential:
    p = cfg.params
    if cfg.family == "gaussian":
        return make_gaussian(cfg.d)
    if cfg.family == "power_product":
        return make_power_product(cfg.d, float(p["a"]), float(p["c"]), float(p["tau"]))
    if cfg.family == "product":
        comps = p["components"]
        if len(comps) not in (1, cfg.d) or not all(isinstance(s, str) for s in comps):
            raise ConfigError(f"'problem.components' needs 1 or {cfg.d} expression strings")
        if len(comps) == 1:
            comps = comps * cfg.d
        parts = [_expression_component(s, k) for k, s in enumerate(comps)]
        inter = None
        if p.get("c", 0) > 0:
            inter = InteractionTerm(tau=float(p.get("tau", 0.01)), coupling=float(p["c"]))
        return make_product(parts, inter, params={k: v for k, v in p.items() if k != "components"})
    try:
        e = expr.parse_potential(p["expression"], cfg.d)
    except ConfigError as exc:
        raise ConfigError(f"problem.expression: {exc}") from None

    def value(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(e.at_points(x), x.shape[:-1]) * 1.0

    return make_custom(cfg.d, value, params={"expression": p["expression"]})
