"""JSON formats for problems, graphs and results.

Floats are written with Python's shortest round-trip representation, so
reading a serialized graph back yields an identical object.
"""

from __future__ import annotations

import json
import math
from typing import Any

from .cost import CostParams
from .errors import ParseError
from .graph import Edge, TransportGraph, Vertex
from .measures import AtomicMeasure, TransportProblem

FORMAT_VERSION = 1


def _num(x: Any, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{what} must be a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise ParseError(f"{what} must be finite")
    return x


def _int(x: Any, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{what} must be an integer, got {x!r}")
    return x


def _point(x: Any, what: str) -> tuple[float, ...]:
    if not isinstance(x, list) or not x:
        raise ParseError(f"{what} must be a non-empty list of numbers")
    return tuple(_num(v, what) for v in x)


def graph_to_json(g: TransportGraph) -> dict:
    return {
        "vertices": [{"id": v.id, "pos": list(v.pos)} for v in g.vertices],
        "edges": [{"id": e.id, "tail": e.tail, "head": e.head, "weight": e.weight} for e in g.edges],
    }


def graph_from_json(d: Any) -> TransportGraph:
    if not isinstance(d, dict):
        raise ParseError("graph must be an object")
    try:
        verts = tuple(Vertex(_int(v["id"], "vertex id"), _point(v["pos"], "vertex pos"))
                      for v in d.get("vertices", []))
        edges = tuple(
            Edge(_int(e["id"], "edge id"), _int(e["tail"], "edge tail"),
                 _int(e["head"], "edge head"), _num(e["weight"], "edge weight"))
            for e in d.get("edges", [])
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed graph entry: {exc}") from exc
    try:
        return TransportGraph(verts, edges)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _measure_from_json(items: Any, what: str) -> AtomicMeasure:
    if not isinstance(items, list):
        raise ParseError(f"{what} must be a list of atoms")
    try:
        return AtomicMeasure(tuple((_point(a["pos"], f"{what} pos"), _num(a["mass"], f"{what} mass"))
                                   for a in items))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed {what} atom: {exc}") from exc


def _measure_to_json(m: AtomicMeasure) -> list[dict]:
    return [{"pos": list(p), "mass": w} for p, w in m]


def problem_from_json(
    d: Any, alpha: float | None = None, capacity: float | None = None
) -> tuple[TransportProblem, TransportGraph | None]:
    """Parse a problem document; ``alpha``/``capacity`` override the file."""
    if not isinstance(d, dict):
        raise ParseError("problem file must hold a JSON object")
    if d.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported version {d.get('version')!r}")
    a = _num(alpha if alpha is not None else d.get("alpha"), "alpha")
    c = _num(capacity if capacity is not None else d.get("capacity", 1.0), "capacity")
    try:
        params = CostParams(a, c)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    source = _measure_from_json(d.get("source", []), "source")
    sink = _measure_from_json(d.get("sink", []), "sink")
    graph = graph_from_json(d["graph"]) if d.get("graph") is not None else None
    return TransportProblem(source, sink, params), graph


def problem_to_json(p: TransportProblem, graph: TransportGraph | None = None) -> dict:
    out = {"version": FORMAT_VERSION}
    if p.params is not None:
        out["alpha"] = p.params.alpha
        out["capacity"] = p.params.capacity
    out["source"] = _measure_to_json(p.source)
    out["sink"] = _measure_to_json(p.sink)
    if graph is not None:
        out["graph"] = graph_to_json(graph)
    return out


def load_problem(path: str, alpha: float | None = None, capacity: float | None = None):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return problem_from_json(doc, alpha, capacity)


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False)
