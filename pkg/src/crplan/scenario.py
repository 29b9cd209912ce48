"""Scenario files: YAML with strict keys and pi expressions.

Example::

    q_init: [pi/9, 0, pi/9, 0]
    path:
      type: fixed_circle
      center: [0, 0, 101]
      radius: 51
      n_points: 150
    obstacles:
      - {center: [-40, 0, 60], radius: 10}
    gains: {r: 28, r_max: 25, r_min: 22, k: 6}
    planner: avoidance

See README.md for the full schema.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .iik import AvoidanceGains
from .kinematics import ManipulatorParams
from .proximity import SphereObstacle
from .srrt import SearchSpace

PLANNERS = ("avoidance", "no_avoidance", "random_nullspace", "cspace_rrt_star")

DEFAULT_N_POINTS = 150
DEFAULT_SRRT_ITERS = 5000
DEFAULT_N_SAMPLES = 30
# extra workspace clearance [mm] on top of the body radius when planning the end-effector path
DEFAULT_PATH_MARGIN = 4.0
DEFAULT_CSPACE_ITERS = 50000


class ScenarioError(ValueError):
    """Parse or validation failure, with the offending field and line when known."""

    def __init__(self, message: str, field_name: str | None = None, line: int | None = None,
                 source: str | None = None):
        self.message = message
        self.field_name = field_name
        self.line = line
        self.source = source
        where = source or "<scenario>"
        if line is not None:
            where += f":{line}"
        if field_name:
            where += f": {field_name}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class FixedCircle:
    center: np.ndarray
    radius: float
    n_points: int = DEFAULT_N_POINTS
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class SRRTSource:
    start: np.ndarray | None
    goal: np.ndarray
    space: SearchSpace
    max_iters: int = DEFAULT_SRRT_ITERS
    n_samples: int = DEFAULT_N_SAMPLES
    path_margin: float = DEFAULT_PATH_MARGIN


@dataclass(frozen=True)
class BaselineOptions:
    stall_limit: int = 100
    mu_max: float = 0.05
    max_iters: int = DEFAULT_CSPACE_ITERS


@dataclass(frozen=True)
class Scenario:
    manipulator: ManipulatorParams
    q_init: np.ndarray
    path_source: FixedCircle | SRRTSource
    obstacles: tuple[SphereObstacle, ...]
    gains: AvoidanceGains
    planner: str = "avoidance"
    rng_seed: int = 0
    baseline: BaselineOptions = BaselineOptions()
    name: str = ""

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, rng_seed=int(seed))

    def with_planner(self, planner: str) -> "Scenario":
        if planner not in PLANNERS:
            raise ScenarioError(f"unknown planner {planner!r}; expected one of {', '.join(PLANNERS)}", "planner")
        return replace(self, planner=planner)


# --- expressions -------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi}


def eval_expr(text: str) -> float:
    """Evaluate arithmetic over numbers and ``pi`` (e.g. ``"2*pi/5"``)."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression {text!r}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
        value = ev(tree)
    except (SyntaxError, ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"bad expression {text!r}: {exc}") from None
    if not math.isfinite(value):
        raise ValueError(f"expression {text!r} is not finite")
    return value


# --- located YAML --------------------------------------------------------------

_SCALARS = yaml.constructor.SafeConstructor()


class _Node:
    """A YAML value plus the line it came from."""

    __slots__ = ("value", "line")

    def __init__(self, value, line):
        self.value = value
        self.line = line


def _located(node: yaml.Node) -> _Node:
    line = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            if not isinstance(k, yaml.ScalarNode):
                raise ScenarioError("mapping keys must be plain names", line=k.start_mark.line + 1)
            if k.value in out:
                raise ScenarioError("duplicate key", k.value, k.start_mark.line + 1)
            out[k.value] = _located(v)
        return _Node(out, line)
    if isinstance(node, yaml.SequenceNode):
        return _Node([_located(v) for v in node.value], line)
    return _Node(_SCALARS.construct_object(node), line)


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def err(self, msg, name=None, node: _Node | None = None):
        return ScenarioError(msg, name, node.line if node is not None else None, self.source)

    def mapping(self, node: _Node, name: str, required: tuple, optional: tuple) -> dict:
        if not isinstance(node.value, dict):
            raise self.err("expected a mapping", name, node)
        allowed = set(required) | set(optional)
        for key, val in node.value.items():
            if key not in allowed:
                raise self.err(f"unknown key (allowed: {', '.join(sorted(allowed))})", f"{name}.{key}" if name else key, val)
        for key in required:
            if key not in node.value:
                raise self.err("missing required field", f"{name}.{key}" if name else key, node)
        return node.value

    def number(self, node: _Node, name: str) -> float:
        v = node.value
        if isinstance(v, bool):
            raise self.err("expected a number", name, node)
        if isinstance(v, (int, float)):
            v = float(v)
        elif isinstance(v, str):
            try:
                v = eval_expr(v)
            except ValueError as exc:
                raise self.err(str(exc), name, node) from None
        else:
            raise self.err("expected a number", name, node)
        if not math.isfinite(v):
            raise self.err("must be finite", name, node)
        return v

    def integer(self, node: _Node, name: str, minimum: int | None = None) -> int:
        v = node.value
        if isinstance(v, bool) or not isinstance(v, int):
            raise self.err("expected an integer", name, node)
        if minimum is not None and v < minimum:
            raise self.err(f"must be >= {minimum}", name, node)
        return v

    def vector(self, node: _Node, name: str, n: int) -> np.ndarray:
        if not isinstance(node.value, list) or len(node.value) != n:
            raise self.err(f"expected a list of {n} numbers", name, node)
        return np.array([self.number(v, f"{name}[{i}]") for i, v in enumerate(node.value)])

    def string(self, node: _Node, name: str, choices: tuple) -> str:
        if not isinstance(node.value, str) or node.value not in choices:
            raise self.err(f"expected one of {', '.join(choices)}", name, node)
        return node.value

    def boolean(self, node: _Node, name: str) -> bool:
        if not isinstance(node.value, bool):
            raise self.err("expected true or false", name, node)
        return node.value


def _manipulator(r: _Reader, node: _Node | None) -> ManipulatorParams:
    if node is None:
        return ManipulatorParams()
    m = r.mapping(node, "manipulator", (), ("spring_length", "rigid_lengths", "body_radius", "theta_eps",
                                            "joint_limits", "pinv_tol", "analytic_jacobian"))
    kw = {}
    for key in ("spring_length", "body_radius", "theta_eps", "pinv_tol"):
        if key in m:
            kw[key] = r.number(m[key], f"manipulator.{key}")
    if "rigid_lengths" in m:
        kw["rigid_lengths"] = tuple(r.vector(m["rigid_lengths"], "manipulator.rigid_lengths", 2))
    if "joint_limits" in m:
        lim = m["joint_limits"]
        if not isinstance(lim.value, list) or len(lim.value) != 4:
            raise r.err("expected four [lo, hi] pairs", "manipulator.joint_limits", lim)
        kw["joint_limits"] = tuple(tuple(r.vector(v, f"manipulator.joint_limits[{i}]", 2))
                                   for i, v in enumerate(lim.value))
    if "analytic_jacobian" in m:
        kw["analytic_jacobian"] = r.boolean(m["analytic_jacobian"], "manipulator.analytic_jacobian")
    try:
        return ManipulatorParams(**kw)
    except ValueError as exc:
        raise r.err(str(exc), "manipulator", node) from None


def _path(r: _Reader, node: _Node):
    if not isinstance(node.value, dict) or "type" not in node.value:
        raise r.err("expected a mapping with a 'type' field", "path", node)
    kind = r.string(node.value["type"], "path.type", ("fixed_circle", "srrt"))
    if kind == "fixed_circle":
        m = r.mapping(node, "path", ("type", "center", "radius"), ("n_points", "normal"))
        radius = r.number(m["radius"], "path.radius")
        if radius <= 0:
            raise r.err("must be > 0", "path.radius", m["radius"])
        n_points = r.integer(m["n_points"], "path.n_points", 2) if "n_points" in m else DEFAULT_N_POINTS
        normal = r.vector(m["normal"], "path.normal", 3) if "normal" in m else np.array([0.0, 0.0, 1.0])
        if np.linalg.norm(normal) < 1e-12:
            raise r.err("must be nonzero", "path.normal", m["normal"])
        return FixedCircle(r.vector(m["center"], "path.center", 3), radius, n_points, normal / np.linalg.norm(normal))
    m = r.mapping(node, "path", ("type", "goal", "space"),
                  ("start", "max_iters", "n_samples", "path_margin"))
    sp = r.mapping(m["space"], "path.space", ("min", "max"), ())
    try:
        space = SearchSpace(r.vector(sp["min"], "path.space.min", 3), r.vector(sp["max"], "path.space.max", 3))
    except ValueError as exc:
        raise r.err(str(exc), "path.space", m["space"]) from None
    margin = r.number(m["path_margin"], "path.path_margin") if "path_margin" in m else DEFAULT_PATH_MARGIN
    if margin < 0:
        raise r.err("must be >= 0", "path.path_margin", m["path_margin"])
    return SRRTSource(
        r.vector(m["start"], "path.start", 3) if "start" in m else None,
        r.vector(m["goal"], "path.goal", 3),
        space,
        r.integer(m["max_iters"], "path.max_iters", 1) if "max_iters" in m else DEFAULT_SRRT_ITERS,
        r.integer(m["n_samples"], "path.n_samples", 2) if "n_samples" in m else DEFAULT_N_SAMPLES,
        margin,
    )


def _obstacles(r: _Reader, node: _Node | None) -> tuple[SphereObstacle, ...]:
    if node is None or node.value is None:
        return ()
    if not isinstance(node.value, list):
        raise r.err("expected a list of obstacles", "obstacles", node)
    out = []
    for i, item in enumerate(node.value):
        name = f"obstacles[{i}]"
        m = r.mapping(item, name, ("center", "radius"), ())
        radius = r.number(m["radius"], f"{name}.radius")
        if radius <= 0:
            raise r.err("must be > 0", f"{name}.radius", m["radius"])
        out.append(SphereObstacle(tuple(r.vector(m["center"], f"{name}.center", 3)), radius))
    return tuple(out)


def _gains(r: _Reader, node: _Node) -> AvoidanceGains:
    m = r.mapping(node, "gains", ("r", "r_max", "r_min", "k"), ())
    vals = {k: r.number(m[k], f"gains.{k}") for k in ("r", "r_max", "r_min", "k")}
    try:
        return AvoidanceGains(**vals)
    except ValueError as exc:
        raise r.err(str(exc), "gains", node) from None


def _baseline(r: _Reader, node: _Node | None) -> BaselineOptions:
    if node is None:
        return BaselineOptions()
    m = r.mapping(node, "baseline", (), ("stall_limit", "mu_max", "max_iters"))
    d = BaselineOptions()
    mu = r.number(m["mu_max"], "baseline.mu_max") if "mu_max" in m else d.mu_max
    if mu < 0:
        raise r.err("must be >= 0", "baseline.mu_max", m["mu_max"])
    return BaselineOptions(
        r.integer(m["stall_limit"], "baseline.stall_limit", 1) if "stall_limit" in m else d.stall_limit,
        mu,
        r.integer(m["max_iters"], "baseline.max_iters", 1) if "max_iters" in m else d.max_iters,
    )


TOP_REQUIRED = ("q_init", "path", "gains")
TOP_OPTIONAL = ("name", "manipulator", "obstacles", "planner", "rng_seed", "baseline")


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    r = _Reader(source)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"parse error: {getattr(exc, 'problem', None) or exc}", None,
                            mark.line + 1 if mark is not None else None, source) from None
    if root is None:
        raise ScenarioError("empty scenario", source=source)
    try:
        top = _located(root)
    except ScenarioError as exc:
        raise ScenarioError(exc.message, exc.field_name, exc.line, source) from None
    m = r.mapping(top, "", TOP_REQUIRED, TOP_OPTIONAL)
    name = m["name"].value if "name" in m else Path(source).stem
    if not isinstance(name, str):
        raise r.err("expected a string", "name", m["name"])
    return Scenario(
        manipulator=_manipulator(r, m.get("manipulator")),
        q_init=r.vector(m["q_init"], "q_init", 4),
        path_source=_path(r, m["path"]),
        obstacles=_obstacles(r, m.get("obstacles")),
        gains=_gains(r, m["gains"]),
        planner=r.string(m["planner"], "planner", PLANNERS) if "planner" in m else "avoidance",
        rng_seed=r.integer(m["rng_seed"], "rng_seed", 0) if "rng_seed" in m else 0,
        baseline=_baseline(r, m.get("baseline")),
        name=name,
    )


def load_scenario(file_path) -> Scenario:
    path = Path(file_path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read file: {exc.strerror or exc}", source=str(path)) from None
    return parse_scenario(text, str(path))


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (``fixed_circle``, ``env1``, ``env2``)."""
    p = Path(__file__).parent / "scenarios" / f"{name}.scenario"
    if not p.exists():
        raise FileNotFoundError(p)
    return p
