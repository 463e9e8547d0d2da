"""Randomized inequality suites shared by the ``verify`` command and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cost import CostParams, cost, h_value, m_alpha, verify_inequalities
from .graph import Edge, TransportGraph, Vertex, sum_graphs
from .io import graph_to_json

H_SMALL = tuple(round(0.1 * i, 1) for i in range(11))
H_LARGE = (1.0, 1.5, 2.0, 4.0, 8.0)
FAMILIES = (
    "subadditivity",
    "mass_bounds",
    "scalar_multiple_le1",
    "scalar_multiple_ge1",
    "h_chain",
    "h_subadditivity",
    "multipath",
)
RTOL = 1e-9


def random_points(rng: np.random.Generator, n: int, dim: int = 2, extent: float = 10.0):
    while True:
        pts = rng.uniform(0, extent, size=(n, dim))
        gaps = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + np.eye(n) * extent
        if n < 2 or gaps.min() > 1e-3:
            return [tuple(float(x) for x in p) for p in pts]


def random_weight(rng: np.random.Generator, capacity: float, top: float) -> float:
    # Mix in exact capacity multiples so integer snapping gets exercised.
    if rng.random() < 0.2:
        return float(rng.integers(1, max(2, int(top / capacity) + 1))) * capacity
    return float(rng.uniform(0.01, top))


def random_graph(
    rng: np.random.Generator,
    points: list[tuple[float, ...]],
    n_edges: int,
    capacity: float,
    max_weight: float,
    simple: bool = False,
) -> TransportGraph:
    """Random multigraph on ``points``.

    Parallel and opposite edges are allowed unless ``simple``, in which
    case every unordered vertex pair carries at most one edge, so that no
    merged weight exceeds ``max_weight``.
    """
    verts = tuple(Vertex(i, p) for i, p in enumerate(points))
    edges = []
    seen = set()
    for k in range(n_edges):
        a, b = (int(v) for v in rng.choice(len(points), size=2, replace=False))
        if simple:
            if (min(a, b), max(a, b)) in seen:
                continue
            seen.add((min(a, b), max(a, b)))
        edges.append(Edge(len(edges), a, b, random_weight(rng, capacity, max_weight)))
    return TransportGraph(verts, tuple(edges))


def random_params(rng: np.random.Generator, alpha: float | None, capacity: float | None) -> CostParams:
    if alpha is None:
        r = rng.random()
        alpha = 0.0 if r < 0.05 else 1.0 if r < 0.1 else float(rng.uniform(0, 1))
    if capacity is None:
        capacity = float(np.exp(rng.uniform(np.log(0.25), np.log(4.0))))
    return CostParams(alpha, capacity)


def _ok(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + RTOL * max(1.0, abs(lhs), abs(rhs))


@dataclass
class SuiteReport:
    trials: int
    seed: int
    counts: dict[str, list[int]] = field(default_factory=lambda: {f: [0, 0] for f in FAMILIES})
    counterexample: dict | None = None

    @property
    def passed(self) -> bool:
        return self.counterexample is None and all(p == t for p, t in self.counts.values())

    def as_json(self) -> dict:
        out = {
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "families": {f: {"passed": p, "total": t} for f, (p, t) in self.counts.items()},
        }
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


def _record(report, family, ok, detail):
    report.counts[family][1] += 1
    if ok:
        report.counts[family][0] += 1
    elif report.counterexample is None:
        report.counterexample = {"family": family, **detail}


def run_suite(
    trials: int,
    seed: int = 42,
    alpha: float | None = None,
    capacity: float | None = None,
    stop_on_failure: bool = True,
) -> SuiteReport:
    """Run every inequality family ``trials`` times from one seeded generator.

    Scalar-multiple trials cycle through the grids ``H_SMALL`` and
    ``H_LARGE`` so that every listed factor is exercised.
    """
    rng = np.random.default_rng(seed)
    report = SuiteReport(trials, seed)
    for i in range(trials):
        params = random_params(rng, alpha, capacity)
        c, a = params.capacity, params.alpha
        base = {"trial": i, "alpha": a, "capacity": c}
        pts = random_points(rng, int(rng.integers(2, 7)))
        g1 = random_graph(rng, pts, int(rng.integers(1, 7)), c, 3 * c)
        g2 = random_graph(rng, pts, int(rng.integers(0, 7)), c, 3 * c)
        graphs = {"g1": graph_to_json(g1), "g2": graph_to_json(g2)}

        h_small = H_SMALL[i % len(H_SMALL)]
        h_large = H_LARGE[i % len(H_LARGE)]
        low = verify_inequalities(g1, g2, params, h_small)
        high = verify_inequalities(g1, g2, params, h_large)
        sub = low.by_name("subadditivity")
        _record(report, "subadditivity", sub.passed, {**base, **graphs, "lhs": sub.lhs, "rhs": sub.rhs})
        bounds = [ch for ch in low.checks if ch.name.startswith("mass_")]
        bad = [ch for ch in bounds if not ch.passed]
        _record(report, "mass_bounds", not bad, {**base, **graphs, "failed": [ch.name for ch in bad]})
        for fam, rep, h in (("scalar_multiple_le1", low, h_small), ("scalar_multiple_ge1", high, h_large)):
            ch = rep.by_name("scalar_multiple")
            _record(report, fam, ch.passed, {**base, **graphs, "h": h, "lhs": ch.lhs, "rhs": ch.rhs})

        x = float(rng.uniform(0, 6 * c)) if rng.random() > 0.2 else float(rng.integers(0, 6)) * c
        chain = [x / c, h_value(x, params), h_value(x, CostParams(0.0, c)), math.floor(x / c + 1e-12) + 1]
        ok = all(_ok(u, v) for u, v in zip(chain, chain[1:]))
        _record(report, "h_chain", ok, {**base, "x": x, "chain": chain})

        x1, x2 = (float(v) for v in rng.uniform(0, 4 * c, size=2))
        lhs, rhs = h_value(x1 + x2, params), h_value(x1, params) + h_value(x2, params)
        _record(report, "h_subadditivity", _ok(lhs, rhs), {**base, "x1": x1, "x2": x2, "lhs": lhs, "rhs": rhs})

        parts = [random_graph(rng, pts, int(rng.integers(1, 5)), c, c, simple=True) for _ in range(int(rng.integers(2, 5)))]
        lhs = cost(sum_graphs(parts), params)
        rhs = sum(m_alpha(gi, a) for gi in parts)
        _record(report, "multipath", _ok(lhs, rhs),
                {**base, "parts": [graph_to_json(gi) for gi in parts], "lhs": lhs, "rhs": rhs})
        if stop_on_failure and report.counterexample is not None:
            break
    return report
