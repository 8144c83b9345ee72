"""Scenario files: a small YAML document describing graph, geometry and integrator settings.

Layout (units are part of the field names; angles are degrees)::

    name: cycle_table1
    graph:
      n: 5
      edges:            # [i, j, w_ij, w_ji]
        - [1, 2, 7, 0.3]
    interceptors:
      - {r0_m: 10000, theta0_deg: 0, gammaM0_deg: 0, V_M_mps: 500}
    target: {V_T_mps: 400, gammaT_deg: 120}
    engagement: {a_max_g: 40, capture_radius_m: 1.0, sync_tol_s: 0.1, dt_s: 0.001, t_max_s: 600}
    analysis:
      overrides: {"w:1:2:ij": -8.51}

``w:i:j:ij`` addresses ``w_ij`` of the pair ``{i, j}`` and ``w:i:j:ji``
addresses ``w_ji``.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import GraphError, ParseError, ValidationError
from .graph import PseudoUndirectedGraph, build_graph

__all__ = [
    "InterceptorSpec",
    "TargetSpec",
    "EngagementSettings",
    "ScenarioConfig",
    "parse_override_key",
    "parse_override",
    "load_scenario",
    "loads_scenario",
    "dump_scenario",
    "dumps_scenario",
    "shipped_scenario",
    "shipped_scenarios",
]

_OVERRIDE_RE = re.compile(r"^w:(\d+):(\d+):(ij|ji)$")
SCENARIO_DIR = Path(__file__).parent / "scenarios"


@dataclass(frozen=True)
class InterceptorSpec:
    r0_m: float
    theta0_deg: float
    gammaM0_deg: float
    V_M_mps: float


@dataclass(frozen=True)
class TargetSpec:
    V_T_mps: float
    gammaT_deg: float


@dataclass(frozen=True)
class EngagementSettings:
    a_max_g: float = 40.0
    capture_radius_m: float = 1.0
    sync_tol_s: float = 0.1
    dt_s: float = 0.001
    t_max_s: float = 600.0
    divergence_window_s: float = 5.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    graph: PseudoUndirectedGraph
    interceptors: tuple[InterceptorSpec, ...]
    target: TargetSpec
    engagement: EngagementSettings = EngagementSettings()
    overrides: tuple[tuple[str, float], ...] = ()
    description: str = ""

    @property
    def n(self) -> int:
        return self.graph.n

    def effective_graph(self) -> PseudoUndirectedGraph:
        """The graph with every analysis override applied."""
        g = self.graph
        for key, value in self.overrides:
            i, j = parse_override_key(key)
            g = g.with_weight(i, j, value)
        return g

    def with_overrides(self, extra: Mapping[str, float]) -> "ScenarioConfig":
        merged = dict(self.overrides)
        merged.update(extra)
        out = replace(self, overrides=tuple(merged.items()))
        _validate(out)
        return out


def parse_override_key(key: str) -> tuple[int, int]:
    """``"w:i:j:ij"`` -> ``(i, j)``; ``"w:i:j:ji"`` -> ``(j, i)`` (tail, head of the weight)."""
    m = _OVERRIDE_RE.match(key.strip())
    if not m:
        raise ValueError(f"override key {key!r} is not of the form w:i:j:ij or w:i:j:ji")
    i, j = int(m.group(1)), int(m.group(2))
    return (i, j) if m.group(3) == "ij" else (j, i)


def parse_override(text: str) -> tuple[str, float]:
    """Split a ``key=value`` command-line override."""
    if "=" not in text:
        raise ValueError(f"override {text!r} must look like key=value")
    key, value = text.split("=", 1)
    parse_override_key(key)
    try:
        return key.strip(), float(value)
    except ValueError:
        raise ValueError(f"override value {value!r} is not a number") from None


# -- parsing -----------------------------------------------------------------

def _line_index(text: str) -> dict[tuple, int]:
    """Map key paths to 1-based source lines using the composed node tree."""
    lines: dict[tuple, int] = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                lines[path + (key,)] = k.start_mark.line + 1
                walk(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for idx, v in enumerate(node.value):
                walk(v, path + (idx,))

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, ())
    return lines


class _Reader:
    def __init__(self, lines: dict[tuple, int]):
        self.lines = lines

    def line(self, path: tuple) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return self.lines.get(())

    def fail(self, path: tuple, message: str):
        name = ".".join(str(p) for p in path) or None
        raise ParseError(message, line=self.line(path), field=name)

    def mapping(self, obj: Any, path: tuple) -> dict:
        if not isinstance(obj, dict):
            self.fail(path, "expected a mapping")
        return obj

    def number(self, obj: Mapping, key: str, path: tuple, default: float | None = None) -> float:
        if key not in obj:
            if default is None:
                self.fail(path + (key,), "missing required field")
            return float(default)
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path + (key,), f"expected a number, got {v!r}")
        if not math.isfinite(v):
            self.fail(path + (key,), "value must be finite")
        return float(v)

    def unknown(self, obj: Mapping, allowed: set[str], path: tuple) -> None:
        for k in obj:
            if k not in allowed:
                self.fail(path + (k,), "unknown field")


def loads_scenario(text: str, name: str = "scenario") -> ScenarioConfig:
    """Parse and validate scenario text.

    Raises:
        ParseError: malformed YAML, wrong types, missing or unknown fields.
        ValidationError: well-formed but violates a model precondition.
    """
    try:
        data = yaml.safe_load(text)
        lines = _line_index(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ParseError(str(exc.problem), line=mark.line + 1 if mark else None) from None
    rd = _Reader(lines)
    top = rd.mapping(data, ())
    rd.unknown(top, {"name", "description", "graph", "interceptors", "target", "engagement", "analysis"}, ())

    gsec = rd.mapping(top.get("graph"), ("graph",))
    rd.unknown(gsec, {"n", "edges"}, ("graph",))
    n_raw = gsec.get("n")
    if isinstance(n_raw, bool) or not isinstance(n_raw, int):
        rd.fail(("graph", "n"), f"expected an integer vertex count, got {n_raw!r}")
    edges_raw = gsec.get("edges")
    if not isinstance(edges_raw, list):
        rd.fail(("graph", "edges"), "expected a list of [i, j, w_ij, w_ji] rows")
    rows = []
    for k, row in enumerate(edges_raw):
        p = ("graph", "edges", k)
        if not isinstance(row, list) or len(row) != 4:
            rd.fail(p, "edge row must be [i, j, w_ij, w_ji]")
        i, j, wij, wji = row
        if any(isinstance(v, bool) or not isinstance(v, int) for v in (i, j)):
            rd.fail(p, "vertex labels must be integers")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in (wij, wji)):
            rd.fail(p, "weights must be numbers")
        rows.append((i, j, float(wij), float(wji)))

    ilist = top.get("interceptors")
    if not isinstance(ilist, list):
        rd.fail(("interceptors",), "expected a list of interceptors")
    specs = []
    for k, item in enumerate(ilist):
        p = ("interceptors", k)
        item = rd.mapping(item, p)
        rd.unknown(item, {"r0_m", "theta0_deg", "gammaM0_deg", "V_M_mps"}, p)
        specs.append(InterceptorSpec(
            r0_m=rd.number(item, "r0_m", p),
            theta0_deg=rd.number(item, "theta0_deg", p),
            gammaM0_deg=rd.number(item, "gammaM0_deg", p),
            V_M_mps=rd.number(item, "V_M_mps", p),
        ))

    tsec = rd.mapping(top.get("target"), ("target",))
    rd.unknown(tsec, {"V_T_mps", "gammaT_deg"}, ("target",))
    target = TargetSpec(
        V_T_mps=rd.number(tsec, "V_T_mps", ("target",)),
        gammaT_deg=rd.number(tsec, "gammaT_deg", ("target",)),
    )

    esec = top.get("engagement") or {}
    esec = rd.mapping(esec, ("engagement",))
    defaults = EngagementSettings()
    allowed = set(asdict(defaults))
    rd.unknown(esec, allowed, ("engagement",))
    eng = EngagementSettings(**{
        k: rd.number(esec, k, ("engagement",), getattr(defaults, k)) for k in asdict(defaults)
    })

    overrides: list[tuple[str, float]] = []
    asec = top.get("analysis") or {}
    asec = rd.mapping(asec, ("analysis",))
    rd.unknown(asec, {"overrides"}, ("analysis",))
    osec = rd.mapping(asec.get("overrides") or {}, ("analysis", "overrides"))
    for key in osec:
        p = ("analysis", "overrides", key)
        try:
            parse_override_key(str(key))
        except ValueError as exc:
            rd.fail(p, str(exc))
        overrides.append((str(key), rd.number(osec, key, ("analysis", "overrides"))))

    try:
        graph = build_graph(n_raw, rows)
    except GraphError as exc:
        raise ValidationError(f"graph: {exc}") from exc

    cfg = ScenarioConfig(
        name=str(top.get("name", name)),
        graph=graph,
        interceptors=tuple(specs),
        target=target,
        engagement=eng,
        overrides=tuple(overrides),
        description=str(top.get("description", "")),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig) -> None:
    if len(cfg.interceptors) != cfg.graph.n:
        raise ValidationError(
            f"graph has {cfg.graph.n} vertices but {len(cfg.interceptors)} interceptors are listed"
        )
    if cfg.target.V_T_mps < 0:
        raise ValidationError("target speed must be non-negative")
    for k, s in enumerate(cfg.interceptors, start=1):
        if s.V_M_mps <= cfg.target.V_T_mps:
            raise ValidationError(f"interceptor {k}: interceptor must be faster than target")
        if s.r0_m <= cfg.engagement.capture_radius_m:
            raise ValidationError(f"interceptor {k}: initial range must exceed the capture radius")
        if abs(math.cos(math.radians(s.gammaM0_deg - s.theta0_deg))) < 1e-6:
            raise ValidationError(f"interceptor {k}: initial deviation angle is at quadrature")
    e = cfg.engagement
    for name in ("a_max_g", "capture_radius_m", "sync_tol_s", "dt_s", "t_max_s", "divergence_window_s"):
        if getattr(e, name) <= 0:
            raise ValidationError(f"engagement.{name} must be positive")
    for key, _ in cfg.overrides:
        i, j = parse_override_key(key)
        if not cfg.graph.has_pair(i, j):
            raise ValidationError(f"override {key}: no edge between {i} and {j}")
    try:
        cfg.effective_graph()
    except GraphError as exc:
        raise ValidationError(f"overrides: {exc}") from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    return loads_scenario(path.read_text(encoding="utf-8"), name=path.stem)


# -- serialisation -----------------------------------------------------------

def _num(v: float) -> int | float:
    return int(v) if float(v).is_integer() and abs(v) < 2**53 else float(v)


def dumps_scenario(cfg: ScenarioConfig) -> str:
    doc: dict[str, Any] = {"name": cfg.name}
    if cfg.description:
        doc["description"] = cfg.description
    doc["graph"] = {
        "n": cfg.graph.n,
        "edges": [[e.i, e.j, _num(e.w_ij), _num(e.w_ji)] for e in cfg.graph.edges],
    }
    doc["interceptors"] = [{k: _num(v) for k, v in asdict(s).items()} for s in cfg.interceptors]
    doc["target"] = {k: _num(v) for k, v in asdict(cfg.target).items()}
    doc["engagement"] = {k: _num(v) for k, v in asdict(cfg.engagement).items()}
    if cfg.overrides:
        doc["analysis"] = {"overrides": {k: _num(v) for k, v in cfg.overrides}}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def dump_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(cfg), encoding="utf-8")


def shipped_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.scenario"))


def shipped_scenario(name: str) -> Path:
    """Path of a scenario bundled with the package."""
    path = SCENARIO_DIR / f"{name.removesuffix('.scenario')}.scenario"
    if not path.exists():
        raise FileNotFoundError(f"no shipped scenario {name!r}; have {shipped_scenarios()}")
    return path
