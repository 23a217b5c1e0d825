"""Run configuration files.

Configs are TOML documents with nested tables.  Numeric entries may be
written as plain numbers or as short arithmetic strings in ``pi``
(``"3*pi/4"``), which are evaluated by a restricted AST walker.  Unknown
keys are rejected at every level so typos surface before any solve.

A minimal solve config::

    name = "sphere"
    method = "pde"

    [manifold]
    name = "sphere"
    parameters = { R = 1.0 }

    [endpoints]
    p = ["pi/8", "pi/8"]
    q = ["3*pi/4", "2*pi/3"]

    [pde]
    D = 7
    alpha = 4.0
"""

from __future__ import annotations

import ast
import math
import operator
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .manifold import MetricField, from_description

METHODS = ("pde", "gd", "both")
INIT_KINDS = ("straight", "waypoints", "sine")
SWEEP_PARAMETERS = ("alpha", "R")
ENDPOINT_UNITS = ("chart", "arc")

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "e": math.e}


def eval_number(value, where: str = "value") -> float:
    """Number from a TOML scalar; strings may use + - * / ** and ``pi``."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a number, got {type(value).__name__}")
    try:
        tree = ast.parse(value.strip(), mode="eval")
        return float(_eval_node(tree.body))
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError, OverflowError) as exc:
        raise ConfigError(f"{where}: cannot evaluate {value!r} ({exc})") from None


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval_node(node.operand))
    raise ValueError("only numbers, pi, e and + - * / ** are allowed")


def _point(value, where) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where}: expected a non-empty list of coordinates")
    return tuple(eval_number(v, f"{where}[{i}]") for i, v in enumerate(value))


def _numbers(value, where) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{where}: expected a list")
    return tuple(eval_number(v, f"{where}[{i}]") for i, v in enumerate(value))


def _take(table: dict, where: str, allowed: dict) -> dict:
    """Check ``table`` against ``allowed`` (key -> default) and fill defaults."""
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    out = dict(allowed)
    out.update(table)
    return out


def _int(value, where, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: must be at least {minimum}, got {value}")
    return value


def _positive(value, where) -> float:
    x = eval_number(value, where)
    if not (x > 0 and math.isfinite(x)):
        raise ConfigError(f"{where}: must be positive and finite, got {value!r}")
    return x


def _optional_positive(value, where) -> Optional[float]:
    return None if value is None else _positive(value, where)


@dataclass(frozen=True)
class PdeSettings:
    D: int = 16
    alpha: float = 4.0
    tol_converge: float = 1e-6
    integrator: str = "rk45"
    atol: float = 1e-8
    dtau: Optional[float] = None
    max_tau: Optional[float] = None
    max_wall_time: Optional[float] = None


@dataclass(frozen=True)
class GdSettings:
    D: int = 7
    N: Optional[int] = None
    tol_grad: float = 1e-6
    max_iters: int = 200_000


@dataclass(frozen=True)
class InitSpec:
    """Initial curve: straight chart line, waypoints, or a Dirichlet sine bump.

    ``sine`` adds ``amplitude * sin(mode * pi * s)`` to every coordinate of
    the straight line.
    """

    kind: str = "straight"
    waypoints: Tuple[Tuple[float, ...], ...] = ()
    amplitude: float = 1.0
    mode: int = 1


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: Tuple[float, ...]
    endpoint_units: str = "chart"


@dataclass(frozen=True)
class ScheduleSpec:
    """Start points walked toward a fixed target, one solve per epoch.

    Either list ``starts`` explicitly or give ``start``, ``epochs`` and
    ``shrink``: epoch ``k`` starts at ``target + (start - target) * shrink**k``.
    ``random`` appends that many starts drawn uniformly from a box of
    half-width ``spread`` around the target, using the run seed.
    """

    starts: Tuple[Tuple[float, ...], ...] = ()
    warm_start: bool = True
    random: int = 0
    spread: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    name: str
    manifold: dict
    p: Tuple[float, ...]
    q: Tuple[float, ...]
    method: str = "pde"
    pde: PdeSettings = field(default_factory=PdeSettings)
    gd: GdSettings = field(default_factory=GdSettings)
    init: InitSpec = field(default_factory=InitSpec)
    sweep: Optional[SweepSpec] = None
    schedule: Optional[ScheduleSpec] = None
    surfaces: Tuple["RunConfig", ...] = ()
    output: Optional[str] = None
    seed: int = 0
    opt_in: bool = False

    def build_manifold(self, **overrides) -> MetricField:
        desc = dict(self.manifold)
        params = dict(desc.get("parameters", {}) or {})
        params.update(overrides)
        desc["parameters"] = params
        try:
            return from_description(desc)
        except ValueError as exc:
            raise ConfigError(f"{self.name}: {exc}") from None

    def with_method(self, method: str) -> "RunConfig":
        if method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
        return replace(self, method=method,
                       surfaces=tuple(s.with_method(method) for s in self.surfaces))

    def with_fixed_step(self, dtau: float) -> "RunConfig":
        pde = replace(self.pde, integrator="rk4", dtau=_positive(dtau, "--fixed-step"))
        return replace(self, pde=pde,
                       surfaces=tuple(s.with_fixed_step(dtau) for s in self.surfaces))


_TOP_KEYS = {
    "name": None, "manifold": None, "endpoints": None, "method": "pde", "pde": None,
    "gd": None, "init": None, "sweep": None, "schedule": None, "surfaces": None,
    "output": None, "seed": 0, "opt_in": False,
}


def parse_config(doc: dict, where: str = "config") -> RunConfig:
    """Validate a parsed TOML document and build a :class:`RunConfig`."""
    top = _take(doc, where, _TOP_KEYS)
    surfaces = top["surfaces"]
    if surfaces is not None:
        if not isinstance(surfaces, list):
            raise ConfigError(f"{where}.surfaces: expected an array of tables")
        parsed = tuple(parse_config(s, f"{where}.surfaces[{i}]") for i, s in enumerate(surfaces))
        if top["manifold"] is None:
            # a pure benchmark list carries no run of its own
            return RunConfig(name=str(top["name"] or "bench"), manifold={}, p=(), q=(),
                             method=_method(top["method"], where), surfaces=parsed,
                             output=top["output"], seed=_int(top["seed"], f"{where}.seed"))
    else:
        parsed = ()

    if top["manifold"] is None:
        raise ConfigError(f"{where}: missing [manifold] table")
    manifold = _take(top["manifold"], f"{where}.manifold",
                     {"name": None, "dim": None, "parameters": {}})
    if not isinstance(manifold["name"], str):
        raise ConfigError(f"{where}.manifold.name: expected a string")
    params = manifold["parameters"]
    if not isinstance(params, dict):
        raise ConfigError(f"{where}.manifold.parameters: expected a table")
    manifold["parameters"] = {k: eval_number(v, f"{where}.manifold.parameters.{k}")
                              for k, v in params.items()}
    if manifold["dim"] is None:
        del manifold["dim"]
    else:
        manifold["dim"] = _int(manifold["dim"], f"{where}.manifold.dim", 1)

    if top["endpoints"] is None:
        raise ConfigError(f"{where}: missing [endpoints] table")
    ends = _take(top["endpoints"], f"{where}.endpoints", {"p": None, "q": None})
    p = _point(ends["p"], f"{where}.endpoints.p")
    q = _point(ends["q"], f"{where}.endpoints.q")
    if len(p) != len(q):
        raise ConfigError(f"{where}.endpoints: p and q differ in dimension")

    cfg = RunConfig(
        name=str(top["name"] or manifold["name"]),
        manifold=manifold,
        p=p,
        q=q,
        method=_method(top["method"], where),
        pde=_pde(top["pde"] or {}, f"{where}.pde"),
        gd=_gd(top["gd"] or {}, f"{where}.gd"),
        init=_init(top["init"] or {}, f"{where}.init"),
        sweep=None if top["sweep"] is None else _sweep(top["sweep"], f"{where}.sweep"),
        schedule=None if top["schedule"] is None else _schedule(top["schedule"], p, q,
                                                                   f"{where}.schedule"),
        surfaces=parsed,
        output=top["output"],
        seed=_int(top["seed"], f"{where}.seed"),
        opt_in=bool(top["opt_in"]),
    )
    field_ = cfg.build_manifold()
    if len(p) != field_.dim:
        raise ConfigError(f"{where}.endpoints: {field_.name} needs {field_.dim} coordinates")
    if cfg.gd.N is not None and cfg.gd.N < cfg.gd.D + 1:
        raise ConfigError(f"{where}.gd.N: must be at least D+1 = {cfg.gd.D + 1}")
    for w in cfg.init.waypoints:
        if len(w) != field_.dim:
            raise ConfigError(f"{where}.init.waypoints: each waypoint needs {field_.dim} coordinates")
    if cfg.sweep is not None and cfg.sweep.endpoint_units == "arc" and manifold["name"] != "sphere":
        raise ConfigError(f"{where}.sweep.endpoint_units: 'arc' is only defined for the sphere")
    return cfg


def _method(value, where) -> str:
    if value not in METHODS:
        raise ConfigError(f"{where}.method: must be one of {METHODS}, got {value!r}")
    return value


def _pde(table, where) -> PdeSettings:
    t = _take(table, where, {"D": 16, "alpha": 4.0, "tol_converge": 1e-6, "integrator": "rk45",
                             "atol": 1e-8, "dtau": None, "max_tau": None,
                             "max_wall_time": None})
    if t["integrator"] not in ("rk45", "rk4"):
        raise ConfigError(f"{where}.integrator: must be 'rk45' or 'rk4', got {t['integrator']!r}")
    return PdeSettings(
        D=_int(t["D"], f"{where}.D", 1),
        alpha=_positive(t["alpha"], f"{where}.alpha"),
        tol_converge=_positive(t["tol_converge"], f"{where}.tol_converge"),
        integrator=t["integrator"],
        atol=_positive(t["atol"], f"{where}.atol"),
        dtau=_optional_positive(t["dtau"], f"{where}.dtau"),
        max_tau=_optional_positive(t["max_tau"], f"{where}.max_tau"),
        max_wall_time=_optional_positive(t["max_wall_time"], f"{where}.max_wall_time"),
    )


def _gd(table, where) -> GdSettings:
    t = _take(table, where, {"D": 7, "N": None, "tol_grad": 1e-6, "max_iters": 200_000})
    return GdSettings(
        D=_int(t["D"], f"{where}.D", 1),
        N=None if t["N"] is None else _int(t["N"], f"{where}.N", 2),
        tol_grad=_positive(t["tol_grad"], f"{where}.tol_grad"),
        max_iters=_int(t["max_iters"], f"{where}.max_iters", 1),
    )


def _init(table, where) -> InitSpec:
    t = _take(table, where, {"kind": "straight", "waypoints": [], "amplitude": 1.0, "mode": 1})
    if t["kind"] not in INIT_KINDS:
        raise ConfigError(f"{where}.kind: must be one of {INIT_KINDS}, got {t['kind']!r}")
    if not isinstance(t["waypoints"], list):
        raise ConfigError(f"{where}.waypoints: expected a list of points")
    waypoints = tuple(_point(w, f"{where}.waypoints[{i}]") for i, w in enumerate(t["waypoints"]))
    if t["kind"] == "waypoints" and not waypoints:
        raise ConfigError(f"{where}.waypoints: kind 'waypoints' needs at least one point")
    return InitSpec(kind=t["kind"], waypoints=waypoints,
                    amplitude=eval_number(t["amplitude"], f"{where}.amplitude"),
                    mode=_int(t["mode"], f"{where}.mode", 1))


def _sweep(table, where) -> SweepSpec:
    t = _take(table, where, {"parameter": None, "values": None, "endpoint_units": "chart"})
    if t["parameter"] not in SWEEP_PARAMETERS:
        raise ConfigError(f"{where}.parameter: must be one of {SWEEP_PARAMETERS}")
    if t["endpoint_units"] not in ENDPOINT_UNITS:
        raise ConfigError(f"{where}.endpoint_units: must be one of {ENDPOINT_UNITS}")
    values = _numbers(t["values"], f"{where}.values")
    if any(not v > 0 for v in values):
        raise ConfigError(f"{where}.values: sweep values must be positive")
    return SweepSpec(parameter=t["parameter"], values=values, endpoint_units=t["endpoint_units"])


def _schedule(table, p, q, where) -> ScheduleSpec:
    t = _take(table, where, {"starts": None, "start": None, "epochs": None, "shrink": 0.9,
                             "warm_start": True, "random": 0, "spread": 0.5})
    if t["starts"] is not None:
        if t["start"] is not None or t["epochs"] is not None:
            raise ConfigError(f"{where}: give either 'starts' or 'start'/'epochs', not both")
        if not isinstance(t["starts"], list):
            raise ConfigError(f"{where}.starts: expected a list of points")
        starts = tuple(_point(s, f"{where}.starts[{i}]") for i, s in enumerate(t["starts"]))
    else:
        start = p if t["start"] is None else _point(t["start"], f"{where}.start")
        epochs = _int(t["epochs"] if t["epochs"] is not None else 0, f"{where}.epochs", 0)
        shrink = eval_number(t["shrink"], f"{where}.shrink")
        if not 0 < shrink <= 1:
            raise ConfigError(f"{where}.shrink: must lie in (0, 1]")
        starts = tuple(tuple(qi + (si - qi) * shrink ** k for si, qi in zip(start, q))
                       for k in range(epochs))
    for s in starts:
        if len(s) != len(q):
            raise ConfigError(f"{where}: start points must have {len(q)} coordinates")
    return ScheduleSpec(starts=starts, warm_start=bool(t["warm_start"]),
                        random=_int(t["random"], f"{where}.random", 0),
                        spread=_positive(t["spread"], f"{where}.spread"))


def load_config(path) -> RunConfig:
    """Read and validate a TOML config file; raises ConfigError on any problem."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from None
    return parse_config(doc, where=path.name)


def preset_names() -> List[str]:
    return sorted(p.name[:-5] for p in resources.files("geoflow.presets").iterdir()
                  if p.name.endswith(".toml"))


def load_preset(name: str) -> RunConfig:
    """Load one of the checked-in presets by name (e.g. ``"sphere"``)."""
    res = resources.files("geoflow.presets").joinpath(f"{name}.toml")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    try:
        doc = tomllib.loads(res.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"preset {name}: invalid TOML ({exc})") from None
    return parse_config(doc, where=f"preset:{name}")


def resolve_config(ref: Any) -> RunConfig:
    """Path to a TOML file, or ``preset:NAME``."""
    ref = str(ref)
    if ref.startswith("preset:"):
        return load_preset(ref[len("preset:"):])
    return load_config(ref)
