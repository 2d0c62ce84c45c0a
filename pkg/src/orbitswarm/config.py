"""YAML scenario files: parsing with line/column diagnostics, overrides and rendering.

A scenario document has the top-level keys ``name``, ``description`` and
the sections ``path``, ``gains``, ``safety``, ``robots`` (a list of robot
groups), ``launch`` (optional) and ``run``.  Every key and its default is
listed in :data:`SCHEMA`; unknown keys are rejected.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

import yaml

from .cbf import NEIGHBOR_INPUTS, OBSTACLE_MODES, SafetyConfig
from .errors import ScenarioError
from .geometry import ClassKFn
from .path import FieldGains, ImplicitPath
from .sim import LAUNCH_ORDERS, SPAWN_MODES, LaunchConfig, RobotGroup, Scenario
from .state import CLOCKWISE, COUNTER_CLOCKWISE

REQUIRED = object()

# section -> key -> (kind, default)
SCHEMA = {
    "path": {
        "kind": ("str", REQUIRED),
        "center": ("vec2", (0.0, 0.0)),
        "radius": ("float", None),
        "a": ("float", None),
        "b": ("float", None),
    },
    "gains": {
        "k_e": ("float", 1.0),
        "k_d": ("float", 2.0),
    },
    "safety": {
        "r": ("float", REQUIRED),
        "d": ("float", 0.5),
        "gamma": ("float", 1.0),
        "kappa": ("str", "cubic"),
        "omega_max": ("float", 2.0),
        "sense_radius": ("float", None),
        "neighbor_input": ("str", "applied"),
        "obstacle_mode": ("str", "moving"),
        "ignore": ("pairs", ()),
        "eps_pre": ("float", 0.2),
        "delta_pre": ("float", 0.5),
    },
    "robots": {
        "count": ("int", REQUIRED),
        "speed": ("range", REQUIRED),
        "swarm": ("int", 0),
        "direction": ("direction", "cw"),
        "spawn": ("str", "level"),
        "level": ("range", (0.0, 0.0)),
        "arc": ("vec2", (0.0, 2.0 * math.pi)),
        "jitter": ("float", 0.0),
        "states": ("rows", ()),
        "speed_order": ("str", "random"),
    },
    "launch": {
        "origin": ("vec2", REQUIRED),
        "carrier_speed": ("float", REQUIRED),
        "spacing_multiple": ("float", 2.5),
        "heading": ("float", math.pi / 2),
        "order": ("str", "fastest_first"),
    },
    "run": {
        "duration": ("float", REQUIRED),
        "dt": ("float", 1e-3),
        "record_every": ("int", 1),
        "halt_on_collision": ("bool", False),
        "fail_on_saturation": ("bool", True),
    },
}
TOP_LEVEL = ("name", "description", "path", "gains", "safety", "robots", "launch", "run")
_DIRECTIONS = {"cw": CLOCKWISE, "ccw": COUNTER_CLOCKWISE}


def _mark_str(mark) -> str:
    return f"line {mark.line + 1}, column {mark.column + 1}"


def _plain(loader, node, loc, marks):
    """Convert a composed YAML node to python values, recording key marks."""
    marks[loc] = node.start_mark
    if isinstance(node, yaml.MappingNode):
        out = {}
        for knode, vnode in node.value:
            key = str(knode.value)
            sub = f"{loc}.{key}" if loc else key
            if key in out:
                raise ScenarioError([(_mark_str(knode.start_mark), f"duplicate key {sub!r}")])
            out[key] = _plain(loader, vnode, sub, marks)
            marks[sub] = knode.start_mark
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(loader, v, f"{loc}[{k}]", marks) for k, v in enumerate(node.value)]
    return loader.construct_object(node, deep=True)


def load_document(text: str):
    """Parse YAML text into ``(data, marks)``; ``marks`` maps dotted keys to source marks."""
    loader = yaml.SafeLoader(text)
    try:
        node = loader.get_single_node()
        if node is None:
            raise ScenarioError([("document", "empty scenario document")])
        marks = {}
        data = _plain(loader, node, "", marks)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = _mark_str(mark) if mark is not None else "document"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioError([(where, f"YAML parse error: {problem}")]) from exc
    finally:
        loader.dispose()
    if not isinstance(data, dict):
        raise ScenarioError([(_mark_str(node.start_mark), "scenario document must be a mapping")])
    return data, marks


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key=value`` overrides (dotted keys, list indices as numbers) in place."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ScenarioError([("--set", f"expected key=value, got {item!r}")])
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ScenarioError([(f"--set {key}", f"cannot parse value {raw!r}")]) from exc
        parts = key.split(".")
        target = data
        for k, part in enumerate(parts[:-1]):
            if isinstance(target, list):
                if not part.isdigit() or int(part) >= len(target):
                    raise ScenarioError([(f"--set {key}", f"no list entry {part!r}")])
                target = target[int(part)]
            else:
                if part not in target:
                    if part in SCHEMA and k == 0:
                        target[part] = {}
                    else:
                        raise ScenarioError([(f"--set {key}", f"unknown section {part!r}")])
                target = target[part]
        last = parts[-1]
        if isinstance(target, list):
            if not last.isdigit() or int(last) >= len(target):
                raise ScenarioError([(f"--set {key}", f"no list entry {last!r}")])
            target[int(last)] = value
        else:
            target[last] = value
    return data


class _Builder:
    def __init__(self, marks):
        self.marks = marks
        self.problems = []

    def where(self, loc):
        # missing keys have no mark of their own; report the enclosing section
        while loc:
            mark = self.marks.get(loc)
            if mark is not None:
                return _mark_str(mark)
            loc = loc.rpartition(".")[0] if "." in loc else loc.rpartition("[")[0]
        return "document"

    def fail(self, loc, msg):
        self.problems.append((self.where(loc), f"{loc} {msg}"))

    def section(self, raw, name, loc):
        spec = SCHEMA[name]
        if not isinstance(raw, dict):
            self.fail(loc, "must be a mapping")
            return None
        for key in raw:
            if key not in spec:
                self.fail(f"{loc}.{key}", f"is not a known key; expected one of {sorted(spec)}")
        out = {}
        for key, (kind, default) in spec.items():
            sub = f"{loc}.{key}"
            if raw.get(key) is None:
                if default is REQUIRED:
                    self.fail(sub, "is required")
                    out[key] = None
                else:
                    out[key] = default
                continue
            out[key] = self.coerce(raw[key], kind, sub)
        return out

    def coerce(self, value, kind, loc):
        if value is None:
            return None
        try:
            if kind == "float":
                return _number(value)
            if kind == "int":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError("an integer")
                return value
            if kind == "bool":
                if not isinstance(value, bool):
                    raise TypeError("true or false")
                return value
            if kind == "str":
                if not isinstance(value, str):
                    raise TypeError("a string")
                return value
            if kind == "direction":
                if value not in _DIRECTIONS:
                    raise TypeError("'cw' or 'ccw'")
                return value
            if kind == "vec2":
                return _pair_of(value, _number)
            if kind == "range":
                if isinstance(value, list):
                    return _pair_of(value, _number)
                v = _number(value)
                return (v, v)
            if kind == "pairs":
                if not isinstance(value, list):
                    raise TypeError("a list of [a, b] pairs")
                return tuple(_pair_of(p, _int) for p in value)
            if kind == "rows":
                if not isinstance(value, list):
                    raise TypeError("a list of [x, y, theta] rows")
                rows = []
                for row in value:
                    if not isinstance(row, list) or len(row) != 3:
                        raise TypeError("a list of [x, y, theta] rows")
                    rows.append(tuple(_number(v) for v in row))
                return tuple(rows)
        except TypeError as exc:
            self.fail(loc, f"must be {exc}, got {value!r}")
            return None
        raise AssertionError(kind)


def _number(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("a number")
    v = float(v)
    if not math.isfinite(v):
        raise TypeError("a finite number")
    return v


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("a list of integer pairs")
    return v


def _pair_of(value, conv):
    if not isinstance(value, list) or len(value) != 2:
        raise TypeError("a two-element list")
    return (conv(value[0]), conv(value[1]))


def build_scenario(data: dict, marks: dict | None = None) -> Scenario:
    """Validated :class:`Scenario` from a plain document; raises :class:`ScenarioError`."""
    b = _Builder(marks or {})
    for key in data:
        if key not in TOP_LEVEL:
            b.fail(key, f"is not a known section; expected one of {list(TOP_LEVEL)}")
    for key in ("path", "safety", "robots", "run"):
        if key not in data:
            b.fail(key, "section is required")
    name = data.get("name", "scenario")
    description = data.get("description", "")
    if not isinstance(name, str):
        b.fail("name", "must be a string")
    if not isinstance(description, str):
        b.fail("description", "must be a string")

    path_raw = b.section(data.get("path", {}), "path", "path")
    gains_raw = b.section(data.get("gains", {}), "gains", "gains")
    safety_raw = b.section(data.get("safety", {}), "safety", "safety")
    run_raw = b.section(data.get("run", {}), "run", "run")
    launch_raw = b.section(data["launch"], "launch", "launch") if data.get("launch") is not None else None
    groups_raw = []
    robots = data.get("robots", [])
    if not isinstance(robots, list):
        b.fail("robots", "must be a list of robot groups")
        robots = []
    for k, g in enumerate(robots):
        groups_raw.append(b.section(g, "robots", f"robots[{k}]"))
    if b.problems:
        raise ScenarioError(b.problems)

    path = _build_path(b, path_raw)
    gains = _checked(b, "gains", lambda: FieldGains(gains_raw["k_e"], gains_raw["k_d"]), {
        "k_e": (gains_raw["k_e"] >= 0, "must be >= 0"),
        "k_d": (gains_raw["k_d"] > 0, "must be > 0"),
    })
    s = safety_raw
    safety = _checked(b, "safety", lambda: SafetyConfig(
        r=s["r"], d_exp=s["d"], kappa=ClassKFn(s["gamma"], s["kappa"]), omega_max=s["omega_max"],
        sense_radius=s["sense_radius"], neighbor_input=s["neighbor_input"],
        obstacle_mode=s["obstacle_mode"], ignore=frozenset(s["ignore"]),
        eps_pre=s["eps_pre"], delta_pre=s["delta_pre"]), {
        "r": (s["r"] > 0, "must be > 0"),
        "d": (0 <= s["d"] < 1, "must be in [0,1)"),
        "gamma": (s["gamma"] > 0, "must be > 0"),
        "kappa": (s["kappa"] in ("cubic", "linear"), "must be 'cubic' or 'linear'"),
        "omega_max": (s["omega_max"] > 0, "must be > 0"),
        "sense_radius": (s["sense_radius"] is None or s["sense_radius"] > 0, "must be > 0"),
        "neighbor_input": (s["neighbor_input"] in NEIGHBOR_INPUTS, f"must be one of {list(NEIGHBOR_INPUTS)}"),
        "obstacle_mode": (s["obstacle_mode"] in OBSTACLE_MODES, f"must be one of {list(OBSTACLE_MODES)}"),
        "eps_pre": (s["eps_pre"] > 0, "must be > 0"),
        "delta_pre": (s["delta_pre"] > 0, "must be > 0"),
    })
    groups = []
    for k, g in enumerate(groups_raw):
        loc = f"robots[{k}]"
        if g["spawn"] not in SPAWN_MODES:
            b.fail(f"{loc}.spawn", f"must be one of {list(SPAWN_MODES)}")
        groups.append(RobotGroup(count=g["count"], speed=g["speed"], swarm=g["swarm"],
                                 direction=_DIRECTIONS[g["direction"]], spawn=g["spawn"], level=g["level"],
                                 arc=g["arc"], jitter=g["jitter"], states=[list(r) for r in g["states"]],
                                 speed_order=g["speed_order"]))
    launch = None
    if launch_raw is not None:
        if launch_raw["order"] not in LAUNCH_ORDERS:
            b.fail("launch.order", f"must be one of {list(LAUNCH_ORDERS)}")
        launch = LaunchConfig(launch_raw["origin"], launch_raw["carrier_speed"], launch_raw["spacing_multiple"],
                              launch_raw["heading"], launch_raw["order"])
    if b.problems:
        raise ScenarioError(b.problems)

    sc = Scenario(path=path, gains=gains, safety=safety, robots=groups, duration=run_raw["duration"],
                  dt=run_raw["dt"], launch=launch, name=name, description=description,
                  record_every=run_raw["record_every"], halt_on_collision=run_raw["halt_on_collision"],
                  fail_on_saturation=run_raw["fail_on_saturation"])
    try:
        sc.validate()
    except ScenarioError as exc:
        for loc, msg in exc.problems:
            b.fail(loc, msg)
        raise ScenarioError(b.problems) from None
    return sc


def _checked(b, section, make, checks):
    ok = True
    for key, (cond, msg) in checks.items():
        if not cond:
            b.fail(f"{section}.{key}", msg)
            ok = False
    if not ok:
        raise ScenarioError(b.problems)
    return make()


def _build_path(b, raw):
    kind = raw["kind"]
    if kind == "circle":
        if raw["radius"] is None:
            b.fail("path.radius", "is required for a circle")
        elif not raw["radius"] > 0:
            b.fail("path.radius", "must be > 0")
        for key in ("a", "b"):
            if raw[key] is not None:
                b.fail(f"path.{key}", "only applies to an ellipse")
        if b.problems:
            raise ScenarioError(b.problems)
        return ImplicitPath.circle(raw["radius"], raw["center"])
    if kind == "ellipse":
        for key in ("a", "b"):
            if raw[key] is None:
                b.fail(f"path.{key}", "is required for an ellipse")
            elif not raw[key] > 0:
                b.fail(f"path.{key}", "must be > 0")
        if raw["radius"] is not None:
            b.fail("path.radius", "only applies to a circle")
        if b.problems:
            raise ScenarioError(b.problems)
        return ImplicitPath.ellipse(raw["a"], raw["b"], raw["center"])
    b.fail("path.kind", "must be 'circle' or 'ellipse'")
    raise ScenarioError(b.problems)


def parse_scenario(text: str, overrides=()) -> Scenario:
    """Parse and validate a scenario document, applying ``key=value`` overrides first."""
    data, marks = load_document(text)
    apply_overrides(data, overrides)
    return build_scenario(data, marks)


def preset_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("orbitswarm.presets").iterdir() if p.name.endswith(".yaml"))


def preset_text(name: str) -> str:
    res = resources.files("orbitswarm.presets") / f"{name}.yaml"
    if not res.is_file():
        raise FileNotFoundError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return res.read_text()


def read_scenario_text(source) -> str:
    """Text of a scenario file, or of a shipped preset when ``source`` names one."""
    p = Path(source)
    if p.is_file():
        return p.read_text()
    if p.suffix == "" and str(source) in preset_names():
        return preset_text(str(source))
    raise FileNotFoundError(f"scenario file not found: {source}")


def load_scenario(source, overrides=()) -> Scenario:
    return parse_scenario(read_scenario_text(source), overrides)


def scenario_to_dict(sc: Scenario) -> dict:
    path = sc.path
    path_d = {"kind": path.kind, "center": list(path.center)}
    if path.kind == "circle":
        path_d["radius"] = path.a
    else:
        path_d["a"] = path.a
        path_d["b"] = path.b
    cfg = sc.safety
    safety = {
        "r": cfg.r, "d": cfg.d_exp, "gamma": cfg.kappa.gamma, "kappa": cfg.kappa.form,
        "omega_max": cfg.omega_max, "sense_radius": cfg.sense_radius,
        "neighbor_input": cfg.neighbor_input, "obstacle_mode": cfg.obstacle_mode,
        "ignore": [list(p) for p in sorted(cfg.ignore)], "eps_pre": cfg.eps_pre, "delta_pre": cfg.delta_pre,
    }
    inverse = {v: k for k, v in _DIRECTIONS.items()}
    robots = []
    for g in sc.robots:
        robots.append({
            "count": g.count, "speed": list(g.speed), "swarm": g.swarm, "direction": inverse[g.direction],
            "spawn": g.spawn, "level": list(g.level), "arc": list(g.arc), "jitter": g.jitter,
            "states": [list(r) for r in g.states], "speed_order": g.speed_order,
        })
    out = {"name": sc.name, "description": sc.description, "path": path_d,
           "gains": {"k_e": sc.gains.k_e, "k_d": sc.gains.k_d}, "safety": safety, "robots": robots}
    if sc.launch is not None:
        out["launch"] = {"origin": list(sc.launch.origin), "carrier_speed": sc.launch.carrier_speed,
                         "spacing_multiple": sc.launch.spacing_multiple, "heading": sc.launch.heading,
                         "order": sc.launch.order}
    out["run"] = {"duration": sc.duration, "dt": sc.dt, "record_every": sc.record_every,
                  "halt_on_collision": sc.halt_on_collision, "fail_on_saturation": sc.fail_on_saturation}
    return out


def render(sc: Scenario) -> str:
    """YAML text that parses back to an equal scenario."""
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)
