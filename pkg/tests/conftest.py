import math

import numpy as np
import pytest

from branchflow.cost import CostParams
from branchflow.graph import Edge, TransportGraph, Vertex
from branchflow.measures import AtomicMeasure, TransportProblem

SQ = math.sqrt(0.4375)
TRI_X1, TRI_X2, TRI_X3 = (0.0, 0.0), (0.75, SQ), (1.5, 0.0)
FE_X1, FE_X2, FE_Y = (-1.0, 3.0), (1.0, 3.0), (0.0, 0.0)

_acceptance_lines: list[str] = []


def triangle_graph(m=(0.5, 1.0, 1.0)) -> TransportGraph:
    """Triangle with sides x1x2 = 1, x2x3 = 1, x1x3 = 1.5."""
    verts = (Vertex(0, TRI_X1), Vertex(1, TRI_X2), Vertex(2, TRI_X3))
    edges = (Edge(0, 0, 1, m[0]), Edge(1, 1, 2, m[1]), Edge(2, 0, 2, m[2]))
    return TransportGraph(verts, edges)


def triangle_shift(t: float) -> TransportGraph:
    """T + tR: weights (m1 - t, m2 - t, m3 + t) with signed normalization."""
    g = triangle_graph()
    return g.with_weights({0: 0.5 - t, 1: 1.0 - t, 2: 1.0 + t})


def triangle_problem(params=None) -> TransportProblem:
    return TransportProblem(
        AtomicMeasure.from_pairs([(TRI_X1, 1.5), (TRI_X2, 0.5)]),
        AtomicMeasure.from_pairs([(TRI_X3, 2.0)]),
        params,
    )


def two_source_problem(params=None) -> TransportProblem:
    return TransportProblem(
        AtomicMeasure.from_pairs([(FE_X1, 2.5), (FE_X2, 0.5)]),
        AtomicMeasure.from_pairs([(FE_Y, 3.0)]),
        params or CostParams(0.5, 1.0),
    )


def two_source_y_graph(b=(0.0, 2.0)) -> TransportGraph:
    return TransportGraph.from_segments(
        [(FE_X1, b, 0.5), (FE_X2, b, 0.5), (b, FE_Y, 1.0), (FE_X1, FE_Y, 2.0)]
    )


@pytest.fixture
def p05():
    return CostParams(0.5, 1.0)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        _acceptance_lines.append(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def random_cyclic_graph(rng, capacity: float, residual_cap: float = 0.5) -> TransportGraph:
    """Ring through all points plus chords; residuals at most ``residual_cap * c``.

    Every residual lies in ``[0, residual_cap * c]``, so with the default
    any cycle satisfies max + min <= c.
    """
    n = int(rng.integers(3, 7))
    while True:
        pts = rng.uniform(0, 10, size=(n, 2))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + np.eye(n) * 10
        if d.min() > 0.05:
            break
    pairs = [(i, (i + 1) % n) for i in range(n)]
    for _ in range(int(rng.integers(0, n))):
        a, b = (int(v) for v in rng.choice(n, size=2, replace=False))
        if (a, b) not in pairs and (b, a) not in pairs:
            pairs.append((a, b))
    edges = []
    for k, (a, b) in enumerate(pairs):
        if rng.random() < 0.5:
            a, b = b, a
        units = int(rng.integers(0, 4))
        r = 0.0 if rng.random() < 0.15 else float(rng.uniform(0.01, residual_cap)) * capacity
        if units == 0 and r == 0.0:
            r = 0.25 * capacity
        edges.append(Edge(k, a, b, units * capacity + r))
    verts = tuple(Vertex(i, (float(p[0]), float(p[1]))) for i, p in enumerate(pts))
    return TransportGraph(verts, tuple(edges))
