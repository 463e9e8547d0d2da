"""Cycle detection, cycle reduction, and integer/residual decomposition.

A cycle is a closed walk in the undirected support of a graph. Adding a
multiple of the unit loop current along a cycle leaves the boundary
untouched, so it can be used to cancel weight on one side of the loop.
Two reductions are provided: shifting whole capacity units (linear cost
change, so the shorter side gains) and shifting a fractional amount on
the sub-capacity residual (concave cost change, so the side with the
smaller marginal cost gains).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .cost import CostParams, cost, split_units
from .errors import PreconditionUnmet
from .graph import TransportGraph, add_graphs, merge_parallel

log = logging.getLogger(__name__)

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Cycle:
    """Closed walk ``vertices[0] -> vertices[1] -> ... -> vertices[0]``.

    ``edges[i]`` joins ``vertices[i]`` and ``vertices[i + 1]``; its sign is
    +1 when the walk follows the edge direction and -1 otherwise.
    """

    edges: tuple[tuple[int, int], ...]
    vertices: tuple[int, ...]
    aligned_length: float
    anti_length: float

    @classmethod
    def from_walk(cls, g: TransportGraph, vertices: list[int], edge_ids: list[int]) -> Cycle:
        refs = []
        plus = minus = 0.0
        k = len(vertices)
        for i, eid in enumerate(edge_ids):
            e = g.edge(eid)
            a, b = vertices[i], vertices[(i + 1) % k]
            if (e.tail, e.head) == (a, b):
                refs.append((eid, 1))
                plus += g.length(e)
            elif (e.tail, e.head) == (b, a):
                refs.append((eid, -1))
                minus += g.length(e)
            else:
                raise ValueError(f"edge {eid} does not join {a} and {b}")
        return cls(tuple(refs), tuple(vertices), plus, minus)

    def reversed(self) -> Cycle:
        verts = (self.vertices[0],) + tuple(reversed(self.vertices[1:]))
        edges = tuple((eid, -s) for eid, s in reversed(self.edges))
        return Cycle(edges, verts, self.anti_length, self.aligned_length)

    @property
    def aligned(self) -> list[int]:
        return [eid for eid, s in self.edges if s > 0]

    @property
    def anti_aligned(self) -> list[int]:
        return [eid for eid, s in self.edges if s < 0]

    @property
    def edge_ids(self) -> list[int]:
        return [eid for eid, _ in self.edges]

    def as_json(self) -> list[list[int]]:
        return [[eid, s] for eid, s in self.edges]


def _adjacency(g: TransportGraph) -> dict[int, list[tuple[int, int]]]:
    adj: dict[int, list[tuple[int, int]]] = {v.id: [] for v in g.vertices}
    for e in sorted(g.edges, key=lambda e: e.id):
        adj[e.tail].append((e.id, e.head))
        adj[e.head].append((e.id, e.tail))
    return adj


def find_cycles(g: TransportGraph) -> list[Cycle]:
    """Fundamental cycles of a depth-first spanning forest.

    The search starts at the lowest vertex id and scans neighbours in edge
    id order, so the result is deterministic. Every cycle of the support is
    a combination of the returned ones; an empty list means cycle-free.
    """
    adj = _adjacency(g)
    visited: set[int] = set()
    on_stack: set[int] = set()
    parent: dict[int, int] = {}
    parent_edge: dict[int, int | None] = {}
    found = []
    for root in sorted(adj):
        if root in visited:
            continue
        visited.add(root)
        on_stack.add(root)
        parent_edge[root] = None
        stack = [(root, iter(adj[root]))]
        while stack:
            u, it = stack[-1]
            for eid, w in it:
                if eid == parent_edge[u]:
                    continue
                if w not in visited:
                    visited.add(w)
                    on_stack.add(w)
                    parent[w] = u
                    parent_edge[w] = eid
                    stack.append((w, iter(adj[w])))
                    break
                if w in on_stack:
                    chain, tree_edges = [u], []
                    x = u
                    while x != w:
                        tree_edges.append(parent_edge[x])
                        x = parent[x]
                        chain.append(x)
                    verts = chain[::-1]
                    eids = tree_edges[::-1] + [eid]
                    found.append(Cycle.from_walk(g, verts, eids))
            else:
                stack.pop()
                on_stack.discard(u)
    return found


def find_cycle(g: TransportGraph) -> Cycle | None:
    cycles = find_cycles(g)
    return cycles[0] if cycles else None


def is_cycle_free(g: TransportGraph) -> bool:
    return find_cycle(g) is None


def _orientations(cy: Cycle, score: float, scale: float) -> list[Cycle]:
    # Orientations with score <= 0, preferred first. A tie keeps both, led by
    # the one that traverses the lowest edge id forwards.
    if score < -TIE_RTOL * scale:
        return [cy]
    if score > TIE_RTOL * scale:
        return [cy.reversed()]
    lowest = min(cy.edges)
    first = cy if lowest[1] > 0 else cy.reversed()
    second = first.reversed()
    return [first, second]


def _snap(w: float, params: CostParams) -> float:
    q = w / params.capacity
    n = round(q)
    if abs(q - n) <= params.kappa_int:
        return n * params.capacity
    return w


def reduce_integer_cycle(g: TransportGraph, cy: Cycle, params: CostParams) -> TransportGraph:
    """Push whole capacity units around ``cy`` toward its shorter side.

    The walk is oriented so that the aligned length does not exceed the
    anti-aligned length; then ``n0 = min floor(w / c)`` over anti-aligned
    edges units are moved, changing the cost by
    ``c**alpha * n0 * (aligned - anti) <= 0`` and zeroing the integer part of
    at least one anti-aligned edge.
    """
    c = params.capacity
    score = cy.aligned_length - cy.anti_length
    for orient in _orientations(cy, score, cy.aligned_length + cy.anti_length):
        n0 = min(split_units(g.edge(eid).weight, params)[0] for eid in orient.anti_aligned)
        if n0 >= 1:
            shift = n0 * c
            new = {}
            for eid, s in orient.edges:
                new[eid] = _snap(g.edge(eid).weight + s * shift, params)
            return g.with_weights(new)
    raise PreconditionUnmet("no cost-nonincreasing orientation moves a full capacity unit")


def _upper_residual(w: float, params: CostParams) -> float:
    # Remainder in (0, c]: an exact multiple of c keeps a full unit.
    n, frac = split_units(w, params)
    if frac == 0.0:
        return params.capacity if n >= 1 else 0.0
    return frac * params.capacity


def reduce_fractional_cycle(g: TransportGraph, cy: Cycle, params: CostParams) -> TransportGraph:
    """Cancel residual weight around ``cy`` without increasing cost.

    Requires ``max r + min r <= c`` over the residuals ``r`` on the cycle.
    The walk is oriented so that the cost derivative at zero shift is
    nonpositive, then ``n2 = min r`` over anti-aligned edges is moved;
    concavity makes the full shift no worse than none. Aligned residuals
    must stay within capacity after the shift, otherwise the cycle is
    rejected as well.
    """
    c, a = params.capacity, params.alpha
    r = {eid: _upper_residual(g.edge(eid).weight, params) for eid in cy.edge_ids}
    if min(r.values()) <= 0:
        raise PreconditionUnmet("cycle edge carries no residual weight")
    if max(r.values()) + min(r.values()) > c * (1 + params.kappa_int):
        raise PreconditionUnmet(
            f"residual max + min = {max(r.values()) + min(r.values())!r} exceeds capacity {c!r}"
        )
    if a == 0:
        score, scale = 0.0, 1.0
    else:
        terms = [s * r[eid] ** (a - 1) * g.length(g.edge(eid)) for eid, s in cy.edges]
        score, scale = math.fsum(terms), math.fsum(abs(t) for t in terms)
    for orient in _orientations(cy, score, scale):
        n2 = min(r[eid] for eid in orient.anti_aligned)
        top = max((r[eid] for eid in orient.aligned), default=0.0)
        if top + n2 > c * (1 + params.kappa_int):
            continue
        new = {}
        for eid, s in orient.edges:
            w = g.edge(eid).weight
            if s < 0 and r[eid] == n2:
                new[eid] = w - r[eid]
            else:
                new[eid] = w + s * n2
            new[eid] = _snap(new[eid], params)
        return g.with_weights(new)
    raise PreconditionUnmet("shift would push an aligned residual above capacity")


@dataclass(frozen=True)
class Certificate:
    cost_t1: float
    cost_t2: float
    cost_sum: float
    cost_original: float
    integer_reductions: int = 0
    fractional_reductions: int = 0
    unreduced: tuple[dict, ...] = ()
    aborted: bool = False

    @property
    def parts_total(self) -> float:
        return self.cost_t1 + self.cost_t2

    @property
    def beats_original(self) -> bool:
        return self.parts_total < self.cost_original - 1e-12 * max(1.0, self.cost_original)

    def as_json(self) -> dict:
        return {
            "cost_t1": self.cost_t1,
            "cost_t2": self.cost_t2,
            "cost_t1_plus_cost_t2": self.parts_total,
            "cost_of_sum": self.cost_sum,
            "cost_original": self.cost_original,
            "beats_original": self.beats_original,
            "monotone": self.parts_total <= self.cost_original + 1e-9,
            "integer_reductions": self.integer_reductions,
            "fractional_reductions": self.fractional_reductions,
            "unreduced_cycles": list(self.unreduced),
            "aborted": self.aborted,
        }


@dataclass(frozen=True)
class Decomposition:
    t1: TransportGraph
    t2: TransportGraph
    certificate: Certificate = field(repr=False)

    @property
    def combined(self) -> TransportGraph:
        return add_graphs(self.t1, self.t2)


def split_integer_residual(g: TransportGraph, params: CostParams) -> tuple[TransportGraph, TransportGraph]:
    """Per-edge split into ``c * floor(w / c)`` and the remainder."""
    ints, rest = {}, {}
    for e in g.edges:
        n, frac = split_units(e.weight, params)
        ints[e.id] = n * params.capacity
        rest[e.id] = frac * params.capacity
    return g.with_weights(ints), g.with_weights(rest)


def _reduce_phase(graph, reducer, params, phase, budget, diagnostics):
    count = 0
    while True:
        cycles = find_cycles(graph)
        if not cycles:
            return graph, count
        failed = []
        for cy in cycles:
            if budget[0] <= 0:
                diagnostics.extend(failed)
                diagnostics.append({"phase": phase, "cycle": [], "reason": "attempt budget exhausted"})
                return graph, count
            budget[0] -= 1
            try:
                graph = reducer(graph, cy, params)
            except PreconditionUnmet as exc:
                failed.append({"phase": phase, "cycle": cy.as_json(), "reason": str(exc)})
                continue
            count += 1
            break
        else:
            diagnostics.extend(failed)
            return graph, count


def decompose(g: TransportGraph, params: CostParams) -> Decomposition:
    """Split ``g`` into an integer-multiple part and a sub-capacity part.

    Both parts are reduced cycle by cycle (integer part first) until they
    are cycle-free or every remaining fundamental cycle fails its
    reduction hypothesis; the latter are listed in the certificate.
    """
    g = merge_parallel(g)
    t1, t2 = split_integer_residual(g, params)
    diagnostics: list[dict] = []
    budget = [max(1, len(g.edges) ** 2)]
    t1, n_int = _reduce_phase(t1, reduce_integer_cycle, params, "integer", budget, diagnostics)
    t2, n_frac = _reduce_phase(t2, reduce_fractional_cycle, params, "fractional", budget, diagnostics)
    aborted = any(d["reason"] == "attempt budget exhausted" for d in diagnostics)
    if diagnostics:
        log.debug("decompose left %d cycle(s) unreduced", len(diagnostics))
    cert = Certificate(
        cost_t1=cost(t1, params),
        cost_t2=cost(t2, params),
        cost_sum=cost(add_graphs(t1, t2), params),
        cost_original=cost(g, params),
        integer_reductions=n_int,
        fractional_reductions=n_frac,
        unreduced=tuple(diagnostics),
        aborted=aborted,
    )
    return Decomposition(t1, t2, cert)
