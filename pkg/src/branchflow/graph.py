"""Embedded weighted directed graphs standing in for transport paths.

A :class:`TransportGraph` is a discrete 1-current: straight edges carrying a
positive weight in the tail-to-head direction. Addition follows current
algebra on identical segments: edges on the same unordered endpoint pair
merge, with opposite orientations cancelling.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import MissingBoundaryVertex
from .measures import EPS_POS, TransportProblem, mass_tolerance

# merged weights below this fraction of the inputs are treated as exact cancellation
CANCEL_RTOL = 1e-12


@dataclass(frozen=True)
class Vertex:
    id: int
    pos: tuple[float, ...]


@dataclass(frozen=True)
class Edge:
    id: int
    tail: int
    head: int
    weight: float


@dataclass(frozen=True)
class TransportGraph:
    """Weighted directed multigraph with straight-line edges.

    Instances are immutable and validated on construction: weights are
    positive and finite, edges join distinct vertices, and vertex positions
    are pairwise farther apart than ``EPS_POS``. Use :meth:`from_segments`
    to build a graph from raw ``(tail_pos, head_pos, weight)`` triples with
    sign normalization.
    """

    vertices: tuple[Vertex, ...] = ()
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        self._validate()

    def _validate(self):
        ids = [v.id for v in self.vertices]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate vertex id")
        dims = {len(v.pos) for v in self.vertices}
        if len(dims) > 1:
            raise ValueError("vertices of mixed dimension")
        if dims and min(dims) < 1:
            raise ValueError("vertex position must have dimension >= 1")
        known = set(ids)
        eids = set()
        for e in self.edges:
            if e.id in eids:
                raise ValueError(f"duplicate edge id {e.id}")
            eids.add(e.id)
            if e.tail not in known or e.head not in known:
                raise ValueError(f"edge {e.id} references unknown vertex")
            if e.tail == e.head:
                raise ValueError(f"edge {e.id} is a self-loop")
            if not (np.isfinite(e.weight) and e.weight > 0):
                raise ValueError(f"edge {e.id} has non-positive weight {e.weight!r}")
        if len(self.vertices) > 1:
            pts = np.array([v.pos for v in self.vertices], dtype=float)
            if len(pts) <= 64:
                diff = pts[:, None, :] - pts[None, :, :]
                dist = np.sqrt((diff**2).sum(-1))
                np.fill_diagonal(dist, np.inf)
                close = bool((dist <= EPS_POS).any())
            else:
                close = bool(cKDTree(pts).query_pairs(EPS_POS))
            if close:
                raise ValueError("vertex positions closer than EPS_POS")

    # construction helpers

    @classmethod
    def from_segments(
        cls,
        segments: Iterable[tuple[Sequence[float], Sequence[float], float]],
        extra_points: Iterable[Sequence[float]] = (),
    ) -> TransportGraph:
        """Build a graph from ``(tail_pos, head_pos, weight)`` triples.

        Endpoints are identified by position. Negative weights flip the
        edge, zero weights and zero-length segments are dropped. Parallel
        segments are kept as separate edges; see :func:`canonicalize`.
        """
        index = _PointIndex()
        for p in extra_points:
            index.add(p)
        edges = []
        for p, q, w in segments:
            w = float(w)
            a, b = index.add(p), index.add(q)
            if w == 0 or a == b:
                continue
            if w < 0:
                a, b, w = b, a, -w
            edges.append(Edge(len(edges), a, b, w))
        verts = tuple(Vertex(i, p) for i, p in enumerate(index.points))
        return cls(verts, tuple(edges))

    # queries

    @cached_property
    def _pos(self) -> dict[int, np.ndarray]:
        return {v.id: np.asarray(v.pos, dtype=float) for v in self.vertices}

    @property
    def dimension(self) -> int | None:
        return len(self.vertices[0].pos) if self.vertices else None

    def position(self, vid: int) -> np.ndarray:
        return self._pos[vid]

    def length(self, e: Edge) -> float:
        return float(np.linalg.norm(self._pos[e.head] - self._pos[e.tail]))

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([self.length(e) for e in self.edges], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.edges], dtype=float)

    def edge(self, eid: int) -> Edge:
        return self._edges_by_id[eid]

    @cached_property
    def _edges_by_id(self) -> dict[int, Edge]:
        return {e.id: e for e in self.edges}

    def find_vertex(self, pos: Sequence[float], eps: float = EPS_POS) -> int | None:
        if not self.vertices or len(pos) != self.dimension:
            return None
        p = np.asarray(pos, dtype=float)
        best, best_d = None, eps
        for vid, q in self._pos.items():
            d = float(np.linalg.norm(q - p))
            if d <= best_d:
                best, best_d = vid, d
        return best

    def incident(self, vid: int) -> list[Edge]:
        return [e for e in self.edges if e.tail == vid or e.head == vid]

    def degree(self, vid: int) -> int:
        return len(self.incident(vid))

    def segments(self) -> list[tuple[tuple[float, ...], tuple[float, ...], float]]:
        pos = {v.id: v.pos for v in self.vertices}
        return [(pos[e.tail], pos[e.head], e.weight) for e in self.edges]

    def with_weights(self, weights: Mapping[int, float]) -> TransportGraph:
        """Return a copy with new signed weights for the given edge ids.

        Negative weights flip the edge; exact zeros remove it.
        """
        edges = []
        for e in self.edges:
            w = float(weights.get(e.id, e.weight))
            if w == 0:
                continue
            if w < 0:
                edges.append(Edge(e.id, e.head, e.tail, -w))
            else:
                edges.append(Edge(e.id, e.tail, e.head, w))
        return TransportGraph(self.vertices, tuple(edges))

    def __len__(self) -> int:
        return len(self.edges)


class _PointIndex:
    """Positions deduplicated within EPS_POS, numbered in insertion order."""

    def __init__(self, eps: float = EPS_POS):
        self.eps = eps
        self.points: list[tuple[float, ...]] = []
        self._exact: dict[tuple[float, ...], int] = {}

    def find(self, p: Sequence[float]) -> int | None:
        key = tuple(float(v) for v in p)
        hit = self._exact.get(key)
        if hit is not None:
            return hit
        if self.points:
            arr = np.asarray(self.points, dtype=float)
            if arr.shape[1] == len(key):
                d = np.linalg.norm(arr - np.asarray(key), axis=1)
                i = int(np.argmin(d))
                if d[i] <= self.eps:
                    return i
        return None

    def add(self, p: Sequence[float]) -> int:
        i = self.find(p)
        if i is None:
            key = tuple(float(v) for v in p)
            i = len(self.points)
            self.points.append(key)
            self._exact[key] = i
        return i


def _merge_edges(vertices: Sequence[Vertex], edges: Sequence[Edge]) -> TransportGraph:
    # Merge by unordered endpoint pair; the first edge of each group keeps
    # its id and fixes the reference orientation.
    groups: dict[tuple[int, int], list] = {}
    order = []
    for e in edges:
        key = (min(e.tail, e.head), max(e.tail, e.head))
        if key not in groups:
            groups[key] = [e, 0.0, 0.0]
            order.append(key)
        ref = groups[key][0]
        sign = 1.0 if (e.tail, e.head) == (ref.tail, ref.head) else -1.0
        groups[key][1] += sign * e.weight
        groups[key][2] = max(groups[key][2], e.weight)
    out = []
    for key in order:
        ref, total, scale = groups[key]
        if abs(total) <= CANCEL_RTOL * scale:
            continue
        if total > 0:
            out.append(Edge(ref.id, ref.tail, ref.head, total))
        else:
            out.append(Edge(ref.id, ref.head, ref.tail, -total))
    return TransportGraph(tuple(vertices), tuple(out))


def merge_parallel(g: TransportGraph) -> TransportGraph:
    """Merge edges sharing an endpoint pair without renumbering anything."""
    seen = set()
    for e in g.edges:
        key = (min(e.tail, e.head), max(e.tail, e.head))
        if key in seen:
            return _merge_edges(g.vertices, g.edges)
        seen.add(key)
    return g


def add_graphs(g1: TransportGraph, g2: TransportGraph) -> TransportGraph:
    """Current sum ``g1 + g2``.

    Vertices are unioned by position (``g1`` ids are kept, new ``g2``
    vertices are appended). Edges on a shared endpoint pair merge: aligned
    weights add, opposed weights subtract and the survivor points along the
    larger one.
    """
    if not g2.vertices:
        return merge_parallel(g1)
    if not g1.vertices:
        return merge_parallel(g2)
    if g1.dimension != g2.dimension:
        raise ValueError("cannot add graphs of different dimension")
    index = _PointIndex()
    ids: list[int] = []
    for v in g1.vertices:
        index.add(v.pos)
        ids.append(v.id)
    vertices = list(g1.vertices)
    next_vid = max(ids) + 1
    remap = {}
    for v in g2.vertices:
        i = index.find(v.pos)
        if i is None:
            index.add(v.pos)
            ids.append(next_vid)
            vertices.append(Vertex(next_vid, v.pos))
            remap[v.id] = next_vid
            next_vid += 1
        else:
            remap[v.id] = ids[i]
    edges = list(g1.edges)
    next_eid = max((e.id for e in g1.edges), default=-1) + 1
    for e in g2.edges:
        edges.append(Edge(next_eid, remap[e.tail], remap[e.head], e.weight))
        next_eid += 1
    return _merge_edges(vertices, edges)


def sum_graphs(graphs: Iterable[TransportGraph]) -> TransportGraph:
    total = TransportGraph()
    for g in graphs:
        total = add_graphs(total, g)
    return total


def scale_graph(g: TransportGraph, h: float) -> TransportGraph:
    """Multiply every weight by ``h``; negative ``h`` reverses all edges."""
    h = float(h)
    if h == 0:
        return TransportGraph()
    if h > 0:
        edges = tuple(Edge(e.id, e.tail, e.head, e.weight * h) for e in g.edges)
    else:
        edges = tuple(Edge(e.id, e.head, e.tail, -e.weight * h) for e in g.edges)
    return TransportGraph(g.vertices, edges)


def canonicalize(g: TransportGraph) -> TransportGraph:
    """Merged, pruned, and canonically numbered copy of ``g``.

    Vertices are sorted lexicographically by position and renumbered from
    zero; edges are sorted by ``(tail, head)`` and renumbered likewise.
    """
    m = merge_parallel(g)
    used = {e.tail for e in m.edges} | {e.head for e in m.edges}
    verts = sorted((v for v in m.vertices if v.id in used), key=lambda v: v.pos)
    new_id = {v.id: i for i, v in enumerate(verts)}
    edges = sorted(
        ((new_id[e.tail], new_id[e.head], e.weight) for e in m.edges),
        key=lambda t: (t[0], t[1]),
    )
    return TransportGraph(
        tuple(Vertex(i, v.pos) for i, v in enumerate(verts)),
        tuple(Edge(i, a, b, w) for i, (a, b, w) in enumerate(edges)),
    )


def relocate_vertex(g: TransportGraph, vid: int, pos: Sequence[float]) -> TransportGraph:
    """Move one vertex, merging it into any vertex it lands on."""
    points = {v.id: v.pos for v in g.vertices}
    points[vid] = tuple(float(x) for x in pos)
    segs = [(points[e.tail], points[e.head], e.weight) for e in g.edges]
    keep = [p for i, p in points.items() if i != vid]
    return merge_parallel(TransportGraph.from_segments(segs, extra_points=keep))


def boundary(g: TransportGraph) -> dict[int, float]:
    """Net outflow (outgoing minus incoming weight) at every vertex."""
    net = {v.id: 0.0 for v in g.vertices}
    for e in g.edges:
        net[e.tail] += e.weight
        net[e.head] -= e.weight
    return net


@dataclass(frozen=True)
class BalanceReport:
    residuals: dict[int, float]
    tolerance: float

    @property
    def max_abs(self) -> float:
        return max((abs(r) for r in self.residuals.values()), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_abs <= self.tolerance

    def violations(self) -> dict[int, float]:
        return {v: r for v, r in self.residuals.items() if abs(r) > self.tolerance}


def check_balance(g: TransportGraph, p: TransportProblem) -> BalanceReport:
    """Residual of the conservation law at every vertex of ``g``.

    The residual at ``v`` is outflow - inflow - source mass + sink mass; the
    graph is a transport path for ``p`` when every residual vanishes.
    """
    res = boundary(g)
    for measure, sign in ((p.source, -1.0), (p.sink, 1.0)):
        for pos, m in measure:
            vid = g.find_vertex(pos)
            if vid is None:
                raise MissingBoundaryVertex(f"no vertex at atom position {list(pos)}")
            res[vid] += sign * m
    return BalanceReport(res, mass_tolerance(p))
