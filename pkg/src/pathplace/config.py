"""Run configuration: JSON with explicit units, converted to SI on load.

Every dimensioned value is written as ``{"value": ..., "unit": "..."}``;
``value`` may be a number or a list of numbers. A bare number where a unit
is expected is a configuration error. :func:`dump_config` writes the parsed
configuration back in SI units, so ``load(dump(load(x))) == load(x)``.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .frames import Placement
from .manipulator import ActuatorLimits, make_model
from .motor import MotorParams
from .path import CuttingForces, FeedSpec, PolylinePath, RectPath
from .placement import (
    DEFAULT_MASK,
    VARIABLE_NAMES,
    GridAxis,
    GridSpec,
    OptimizerSettings,
    PlacementProblem,
)

# unit -> (dimension, factor to SI)
UNITS = {
    "m": ("length", 1.0),
    "mm": ("length", 1e-3),
    "cm": ("length", 1e-2),
    "m/s": ("speed", 1.0),
    "m/min": ("speed", 1.0 / 60.0),
    "mm/s": ("speed", 1e-3),
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180.0),
    "kg": ("mass", 1.0),
    "g": ("mass", 1e-3),
    "N": ("force", 1.0),
    "N*m": ("torque", 1.0),
    "Nm": ("torque", 1.0),
    "N*m/A": ("torque_constant", 1.0),
    "Nm/A": ("torque_constant", 1.0),
    "V*s/rad": ("emf_constant", 1.0),
    "ohm": ("resistance", 1.0),
    "H": ("inductance", 1.0),
    "mH": ("inductance", 1e-3),
    "rad/m": ("transmission", 1.0),
    "rad/mm": ("transmission", 1e3),
}
SI_UNIT = {
    "length": "m", "speed": "m/s", "time": "s", "angle": "rad", "mass": "kg",
    "force": "N", "torque": "N*m", "torque_constant": "N*m/A", "emf_constant": "V*s/rad",
    "resistance": "ohm", "inductance": "H", "transmission": "rad/m",
}
VARIABLE_DIM = dict(zip(VARIABLE_NAMES, ("length",) * 3 + ("angle",) * 3))

SECTIONS = ("manipulator", "motor", "path", "forces", "placement", "output")


class ConfigError(ValueError):
    def __init__(self, message, path=(), line=None):
        self.path = tuple(path)
        self.line = line
        super().__init__(message)

    def __str__(self):
        where = ".".join(str(p) for p in self.path) or "<root>"
        prefix = f"line {self.line}: " if self.line else ""
        return f"{prefix}{where}: {self.args[0]}"


def locate_line(text: str, path) -> int | None:
    """Best-effort line number of a key path inside JSON text."""
    pos = 0
    found = None
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if not m:
            break
        pos = m.start()
        found = pos
    if found is None:
        return None
    return text.count("\n", 0, found) + 1


# --- quantity helpers ------------------------------------------------------

def _get(node, key, path, required=True, default=None):
    if not isinstance(node, dict):
        raise ConfigError("expected an object", path)
    if key not in node:
        if required:
            raise ConfigError(f"missing required key {key!r}", path)
        return default
    return node[key]


def quantity(node, dim, path):
    """Convert a ``{"value", "unit"}`` object to SI (float or tuple)."""
    if not isinstance(node, dict) or "value" not in node or "unit" not in node:
        raise ConfigError(f"expected {{\"value\": ..., \"unit\": ...}} with a {dim} unit", path)
    unit = node["unit"]
    if unit not in UNITS:
        raise ConfigError(f"unknown unit {unit!r}", path)
    udim, factor = UNITS[unit]
    if udim != dim:
        raise ConfigError(f"unit {unit!r} is a {udim}, expected a {dim}", path)
    v = node["value"]
    if isinstance(v, list):
        if not all(_is_number(x) for x in v):
            raise ConfigError("value list must contain numbers", path)
        return tuple(float(x) * factor for x in v)
    if not _is_number(v):
        raise ConfigError("value must be a number", path)
    return float(v) * factor


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _q(node, key, dim, path, required=True, default=None):
    sub = _get(node, key, path, required)
    if sub is None:
        return default
    return quantity(sub, dim, path + (key,))


def _si(value, dim):
    if isinstance(value, (tuple, list)):
        value = list(value)
    return {"value": value, "unit": SI_UNIT[dim]}


def _number(node, key, path, required=True, default=None):
    v = _get(node, key, path, required)
    if v is None:
        return default
    if not _is_number(v):
        raise ConfigError(f"{key!r} must be a plain number", path + (key,))
    return float(v)


# --- sections --------------------------------------------------------------

MANIPULATOR_FIELDS = {
    "gantry": {"slider_mass": "mass", "platform_mass": "mass"},
    "orthoglide": {
        "leg_length": "length", "foot_offset": "length", "slider_mass": "mass",
        "platform_mass": "mass", "leg_mass": "mass", "center": "length",
        "q_plus": "length", "q_minus": "length", "origin": "length",
        "workspace_size": "length",
    },
}
LIMIT_FIELDS = {"q_min": "length", "q_max": "length", "v_max": "speed", "tau_max": "torque"}
MOTOR_FIELDS = {
    "k_t": "torque_constant", "k_e": "emf_constant", "resistance": "resistance",
    "inductance": "inductance", "transmission_ratio": "transmission",
}


@dataclass(frozen=True)
class ManipulatorSection:
    model: str
    params: dict
    limits: dict


@dataclass(frozen=True)
class PathSection:
    kind: str
    speed: float
    sample_dt: float
    length: float | None = None
    width: float | None = None
    waypoints: tuple | None = None


@dataclass(frozen=True)
class ForcesSection:
    feed: float = 0.0
    axial: float = 0.0
    radial: float = 0.0
    signs: tuple = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class PlacementSection:
    free: tuple
    fixed: dict
    lower: dict
    upper: dict
    starts: tuple = ()
    grid: dict | None = None
    trace: dict = field(default_factory=dict)
    penalty_weight: float = 1e6
    optimizer: dict = field(default_factory=dict)
    jitter: float = 0.02


@dataclass(frozen=True)
class CompareSection:
    widths: tuple = ()
    aspect: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    manipulator: ManipulatorSection
    motor: tuple  # three dicts of SI motor parameters
    path: PathSection
    forces: ForcesSection
    placement: PlacementSection
    output: dict
    compare: CompareSection | None = None

    # --- builders of domain objects ---

    def build_model(self):
        params = dict(self.manipulator.params)
        return make_model(self.manipulator.model, **params)

    def build_limits(self) -> ActuatorLimits:
        return ActuatorLimits(**self.manipulator.limits)

    def build_motors(self) -> tuple:
        return tuple(MotorParams(**m) for m in self.motor)

    def build_path(self, length=None, width=None):
        p = self.path
        if p.kind == "rectangle":
            return RectPath(length if length is not None else p.length, width if width is not None else p.width)
        return PolylinePath(p.waypoints)

    def build_feed(self) -> FeedSpec:
        return FeedSpec(self.path.speed, self.path.sample_dt)

    def build_forces(self) -> CuttingForces:
        f = self.forces
        return CuttingForces(f.feed, f.axial, f.radial, *f.signs)

    def build_problem(self, length=None, width=None) -> PlacementProblem:
        pl = self.placement
        mask = tuple(n in pl.free for n in VARIABLE_NAMES)
        lower = tuple(pl.lower.get(n, pl.fixed.get(n, 0.0)) for n in VARIABLE_NAMES)
        upper = tuple(pl.upper.get(n, pl.fixed.get(n, 0.0)) for n in VARIABLE_NAMES)
        fixed = Placement(**{n: pl.fixed.get(n, 0.0) for n in VARIABLE_NAMES})
        return PlacementProblem(
            model=self.build_model(),
            limits=self.build_limits(),
            motors=self.build_motors(),
            path=self.build_path(length, width),
            feed=self.build_feed(),
            forces=self.build_forces(),
            mask=mask,
            lower=lower,
            upper=upper,
            fixed=fixed,
            penalty_weight=pl.penalty_weight,
        )

    def build_starts(self) -> list[Placement]:
        return [self._placement(s) for s in self.placement.starts]

    def build_trace_placement(self) -> Placement:
        return self._placement(self.placement.trace)

    def _placement(self, values: dict) -> Placement:
        merged = {n: self.placement.fixed.get(n, 0.0) for n in VARIABLE_NAMES}
        merged.update(values)
        return Placement(**merged)

    def build_grid(self) -> GridSpec:
        if not self.placement.grid:
            raise ConfigError("placement.grid is required for a sweep", ("placement", "grid"))
        axes = []
        for n in (v for v in VARIABLE_NAMES if v in self.placement.free):
            if n not in self.placement.grid:
                raise ConfigError(f"grid axis for free variable {n!r} missing", ("placement", "grid"))
            axes.append(GridAxis(*self.placement.grid[n]))
        return GridSpec(tuple(axes))

    def build_settings(self) -> OptimizerSettings:
        return OptimizerSettings(**self.placement.optimizer)


def _parse_manipulator(node, path):
    model = _get(node, "model", path)
    if model not in MANIPULATOR_FIELDS:
        raise ConfigError(f"unknown model {model!r} (expected gantry or orthoglide)", path + ("model",))
    params = {}
    for key, dim in MANIPULATOR_FIELDS[model].items():
        if key in node:
            params[key] = _q(node, key, dim, path)
    if model == "orthoglide" and "gravity" in node:
        if not isinstance(node["gravity"], bool):
            raise ConfigError("gravity must be true or false", path + ("gravity",))
        params["gravity"] = node["gravity"]
    if model == "gantry":
        if "slider_mass" in params and not isinstance(params["slider_mass"], tuple):
            params["slider_mass"] = (params["slider_mass"],) * 3
        if "gravity_axis" in node:
            g = node["gravity_axis"]
            if g not in (None, "x", "y", "z"):
                raise ConfigError("gravity_axis must be x, y, z or null", path + ("gravity_axis",))
            params["gravity_axis"] = None if g is None else "xyz".index(g)
    limits_node = _get(node, "limits", path)
    limits = {k: _q(limits_node, k, dim, path + ("limits",)) for k, dim in LIMIT_FIELDS.items()}
    try:
        make_model(model, **params)
        ActuatorLimits(**limits)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), path)
    return ManipulatorSection(model, params, limits)


def _parse_motor_one(node, path):
    params = {k: _q(node, k, dim, path) for k, dim in MOTOR_FIELDS.items()}
    phases = _get(node, "phases", path, required=False, default=3)
    if not isinstance(phases, int) or isinstance(phases, bool):
        raise ConfigError("phases must be an integer", path + ("phases",))
    params["phases"] = phases
    try:
        MotorParams(**params)
    except ValueError as e:
        raise ConfigError(str(e), path)
    return params


def _parse_motor(node, path):
    if isinstance(node, list):
        if len(node) != 3:
            raise ConfigError("motor list must have one entry per actuator", path)
        return tuple(_parse_motor_one(n, path + (i,)) for i, n in enumerate(node))
    one = _parse_motor_one(node, path)
    return (one, dict(one), dict(one))


def _parse_path(node, path):
    kind = _get(node, "type", path)
    speed = _q(node, "speed", "speed", path)
    dt = _q(node, "sample_dt", "time", path)
    try:
        FeedSpec(speed, dt)
    except ValueError as e:
        raise ConfigError(str(e), path)
    if kind == "rectangle":
        L = _q(node, "length", "length", path)
        W = _q(node, "width", "length", path)
        try:
            RectPath(L, W)
        except ValueError as e:
            raise ConfigError(str(e), path)
        return PathSection("rectangle", speed, dt, length=L, width=W)
    if kind == "polyline":
        wp_node = _get(node, "waypoints", path)
        flat = quantity(wp_node, "length", path + ("waypoints",))
        if not isinstance(flat, tuple) or len(flat) % 3:
            raise ConfigError("waypoints value must be a flat list of x, y, z triples", path + ("waypoints",))
        wps = tuple(tuple(flat[i:i + 3]) for i in range(0, len(flat), 3))
        try:
            PolylinePath(wps)
        except ValueError as e:
            raise ConfigError(str(e), path)
        return PathSection("polyline", speed, dt, waypoints=wps)
    raise ConfigError(f"unknown path type {kind!r} (expected rectangle or polyline)", path + ("type",))


def _parse_forces(node, path):
    if node is None:
        return ForcesSection()
    vals = {k: _q(node, k, "force", path, required=False, default=0.0) for k in ("feed", "axial", "radial")}
    signs_node = _get(node, "signs", path, required=False, default={})
    signs = []
    for k in ("feed", "axial", "radial"):
        s = signs_node.get(k, 1)
        if s not in (1, -1) or isinstance(s, bool):
            raise ConfigError("sign flags must be 1 or -1", path + ("signs", k))
        signs.append(float(s))
    return ForcesSection(vals["feed"], vals["axial"], vals["radial"], tuple(signs))


def _parse_placement_values(node, path, allowed):
    if not isinstance(node, dict):
        raise ConfigError("expected an object of placement variables", path)
    out = {}
    for k, v in node.items():
        if k not in VARIABLE_NAMES:
            raise ConfigError(f"unknown placement variable {k!r}", path + (k,))
        if k not in allowed:
            raise ConfigError(f"{k!r} is not a free variable here", path + (k,))
        out[k] = quantity(v, VARIABLE_DIM[k], path + (k,))
    return out


def _parse_placement(node, path):
    free = _get(node, "free", path, required=False, default=[VARIABLE_NAMES[i] for i in range(6) if DEFAULT_MASK[i]])
    if not isinstance(free, list) or not free or any(f not in VARIABLE_NAMES for f in free):
        raise ConfigError(f"free must be a non-empty list drawn from {list(VARIABLE_NAMES)}", path + ("free",))
    free = tuple(n for n in VARIABLE_NAMES if n in free)  # canonical order
    fixed_names = [n for n in VARIABLE_NAMES if n not in free]
    fixed = _parse_placement_values(_get(node, "fixed", path, False, {}), path + ("fixed",), fixed_names)

    bounds = _get(node, "bounds", path)
    lower, upper = {}, {}
    for n in free:
        b = _get(bounds, n, path + ("bounds",))
        bp = path + ("bounds", n)
        lo = quantity({"value": _get(b, "min", bp), "unit": _get(b, "unit", bp)}, VARIABLE_DIM[n], bp)
        hi = quantity({"value": _get(b, "max", bp), "unit": _get(b, "unit", bp)}, VARIABLE_DIM[n], bp)
        if lo > hi:
            raise ConfigError("min above max", bp)
        lower[n], upper[n] = lo, hi

    starts_node = _get(node, "starts", path, False, [])
    if not isinstance(starts_node, list):
        raise ConfigError("starts must be a list", path + ("starts",))
    starts = tuple(
        _parse_placement_values(s, path + ("starts", i), free) for i, s in enumerate(starts_node)
    )

    grid = None
    if "grid" in node:
        grid = {}
        for n, g in node["grid"].items():
            gp = path + ("grid", n)
            if n not in free:
                raise ConfigError(f"grid axis {n!r} is not a free variable", gp)
            unit = _get(g, "unit", gp)
            vals = [quantity({"value": _get(g, k, gp), "unit": unit}, VARIABLE_DIM[n], gp)
                    for k in ("min", "max", "step")]
            try:
                GridAxis(*vals)
            except ValueError as e:
                raise ConfigError(str(e), gp)
            grid[n] = tuple(vals)

    trace = _parse_placement_values(_get(node, "trace", path, False, {}), path + ("trace",), free)
    penalty = _number(node, "penalty_weight", path, required=False, default=1e6)
    jitter = _number(node, "jitter", path, required=False, default=0.02)
    opt_node = _get(node, "optimizer", path, False, {})
    optimizer = {}
    for k in ("xatol", "fatol", "initial_step"):
        if k in opt_node:
            optimizer[k] = _number(opt_node, k, path + ("optimizer",))
    if "max_evaluations" in opt_node:
        m = opt_node["max_evaluations"]
        if not isinstance(m, int) or isinstance(m, bool) or m <= 0:
            raise ConfigError("max_evaluations must be a positive integer", path + ("optimizer", "max_evaluations"))
        optimizer["max_evaluations"] = m
    try:
        OptimizerSettings(**optimizer)
    except ValueError as e:
        raise ConfigError(str(e), path + ("optimizer",))
    return PlacementSection(free, fixed, lower, upper, starts, grid, trace, penalty, optimizer, jitter)


def _parse_compare(node, path):
    if node is None:
        return None
    widths = _q(node, "widths", "length", path)
    if not isinstance(widths, tuple):
        widths = (widths,)
    aspect = _number(node, "aspect", path, required=False, default=2.0)
    if aspect <= 0:
        raise ConfigError("aspect must be positive", path + ("aspect",))
    return CompareSection(widths, aspect)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    for s in SECTIONS:
        if s not in data:
            raise ConfigError(f"missing section {s!r}", ())
    out = data["output"]
    if not isinstance(out, dict):
        raise ConfigError("output must be an object", ("output",))
    return RunConfig(
        manipulator=_parse_manipulator(data["manipulator"], ("manipulator",)),
        motor=_parse_motor(data["motor"], ("motor",)),
        path=_parse_path(data["path"], ("path",)),
        forces=_parse_forces(data["forces"], ("forces",)),
        placement=_parse_placement(data["placement"], ("placement",)),
        output=dict(out),
        compare=_parse_compare(data.get("compare"), ("compare",)),
    )


def load_config_text(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", (), e.lineno)
    try:
        return parse_config(data)
    except ConfigError as e:
        if e.line is None:
            e.line = locate_line(text, e.path)
        raise


def load_config(path) -> RunConfig:
    with open(path) as f:
        return load_config_text(f.read())


def dump_config(cfg: RunConfig) -> dict:
    """Serialise a parsed configuration in SI units."""
    m = cfg.manipulator
    fields = MANIPULATOR_FIELDS[m.model]
    man = {"model": m.model}
    for k, v in m.params.items():
        if k == "gravity":
            man[k] = v
        elif k == "gravity_axis":
            man[k] = None if v is None else "xyz"[v]
        else:
            man[k] = _si(v, fields[k])
    man["limits"] = {k: _si(v, LIMIT_FIELDS[k]) for k, v in m.limits.items()}

    motors = []
    for mp in cfg.motor:
        d = {k: _si(mp[k], dim) for k, dim in MOTOR_FIELDS.items()}
        d["phases"] = mp["phases"]
        motors.append(d)

    p = cfg.path
    path = {"type": p.kind, "speed": _si(p.speed, "speed"), "sample_dt": _si(p.sample_dt, "time")}
    if p.kind == "rectangle":
        path["length"] = _si(p.length, "length")
        path["width"] = _si(p.width, "length")
    else:
        path["waypoints"] = _si([c for w in p.waypoints for c in w], "length")

    f = cfg.forces
    forces = {
        "feed": _si(f.feed, "force"), "axial": _si(f.axial, "force"), "radial": _si(f.radial, "force"),
        "signs": dict(zip(("feed", "axial", "radial"), (int(s) for s in f.signs))),
    }

    pl = cfg.placement

    def pvals(d):
        return {k: _si(v, VARIABLE_DIM[k]) for k, v in d.items()}

    placement = {
        "free": list(pl.free),
        "fixed": pvals(pl.fixed),
        "bounds": {
            n: {"min": pl.lower[n], "max": pl.upper[n], "unit": SI_UNIT[VARIABLE_DIM[n]]} for n in pl.free
        },
        "starts": [pvals(s) for s in pl.starts],
        "trace": pvals(pl.trace),
        "penalty_weight": pl.penalty_weight,
        "jitter": pl.jitter,
        "optimizer": dict(pl.optimizer),
    }
    if pl.grid is not None:
        placement["grid"] = {
            n: dict(zip(("min", "max", "step"), g), unit=SI_UNIT[VARIABLE_DIM[n]]) for n, g in pl.grid.items()
        }
    out = {
        "manipulator": man,
        "motor": motors,
        "path": path,
        "forces": forces,
        "placement": placement,
        "output": dict(cfg.output),
    }
    if cfg.compare is not None:
        out["compare"] = {"widths": _si(list(cfg.compare.widths), "length"), "aspect": cfg.compare.aspect}
    return out


def default_config_path(name: str = "orthoglide"):
    from importlib.resources import files

    return files("pathplace").joinpath(f"data/{name}.json")
