"""Local geometric moves: three-terminal junctions and integer corridors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cost import CostParams, cost, h_value, split_units
from .errors import DegenerateJunction, NoConvergence, PreconditionUnmet, UnsupportedDimension
from .graph import Edge, TransportGraph, Vertex, add_graphs, merge_parallel
from .measures import EPS_POS

log = logging.getLogger(__name__)

TOL_GRAD = 1e-10
MAX_ITER = 100_000
DAMPING = 0.5
GUARD_RADIUS = 1e-9


def _point2(p: Sequence[float]) -> tuple[float, float]:
    if len(p) != 2:
        raise UnsupportedDimension(f"junction solving is planar only, got dimension {len(p)}")
    return (float(p[0]), float(p[1]))


@dataclass(frozen=True)
class JunctionProblem:
    """Two sources ``x1``, ``x2`` with masses ``m1``, ``m2`` merging toward ``y``."""

    x1: tuple[float, float]
    x2: tuple[float, float]
    y: tuple[float, float]
    m1: float
    m2: float
    params: CostParams

    def __post_init__(self):
        for name in ("x1", "x2", "y"):
            object.__setattr__(self, name, _point2(getattr(self, name)))
        if not (self.m1 > 0 and self.m2 > 0):
            raise ValueError("junction masses must be positive")

    @property
    def terminals(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.y], dtype=float)

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return junction_coefficients(self)


def junction_coefficients(p: JunctionProblem) -> tuple[float, float, float]:
    """Per-length cost rates of the two branches and the merged trunk."""
    s = p.params.scale
    return (
        s * h_value(p.m1, p.params),
        s * h_value(p.m2, p.params),
        s * h_value(p.m1 + p.m2, p.params),
    )


def weber_cost(t: Sequence[float], points: np.ndarray, ks: Sequence[float]) -> float:
    d = np.linalg.norm(points - np.asarray(t, dtype=float), axis=1)
    return float(np.dot(ks, d))


def weber_gradient(t: Sequence[float], points: np.ndarray, ks: Sequence[float]) -> np.ndarray:
    """Gradient ``sum k_i (t - p_i) / |t - p_i|``; undefined at a terminal."""
    diff = np.asarray(t, dtype=float) - points
    d = np.linalg.norm(diff, axis=1)
    return (np.asarray(ks)[:, None] * diff / d[:, None]).sum(axis=0)


def weber_hessian(t: Sequence[float], points: np.ndarray, ks: Sequence[float]) -> np.ndarray:
    diff = np.asarray(t, dtype=float) - points
    d = np.linalg.norm(diff, axis=1)
    hess = np.zeros((2, 2))
    for k, v, r in zip(ks, diff, d):
        u = v / r
        hess += k * (np.eye(2) - np.outer(u, u)) / r
    return hess


@dataclass(frozen=True)
class JunctionSolution:
    t: tuple[float, float]
    F: float
    angles: tuple[float, float, float] | None
    degenerate: bool
    terminal: str | None = None
    gradient_norm: float = 0.0
    iterations: int = 0


_TERMINAL_NAMES = ("x1", "x2", "y")


def _terminal_minimizer(points: np.ndarray, ks: np.ndarray) -> int | None:
    # A terminal minimizes the weighted distance sum iff the pull of the other
    # terminals does not exceed its own coefficient.
    best, best_f = None, math.inf
    for j in range(len(points)):
        pull = np.zeros(2)
        own = ks[j]
        for i in range(len(points)):
            if i == j:
                continue
            v = points[i] - points[j]
            r = float(np.linalg.norm(v))
            if r <= EPS_POS:
                own += ks[i]
            else:
                pull += ks[i] * v / r
        if np.linalg.norm(pull) <= own * (1 + 1e-12):
            f = weber_cost(points[j], points, ks)
            if f < best_f:
                best, best_f = j, f
    return best


def _minimize_interior(points, ks, tol_grad, max_iter):
    t = (ks[:, None] * points).sum(axis=0) / ks.sum()
    if np.min(np.linalg.norm(points - t, axis=1)) <= GUARD_RADIUS:
        t = t + 1e-3 * (np.ptp(points, axis=0).max() or 1.0)
    f = weber_cost(t, points, ks)
    for it in range(1, max_iter + 1):
        g = weber_gradient(t, points, ks)
        gn = float(np.linalg.norm(g))
        if gn <= tol_grad:
            return t, f, gn, it
        try:
            step = -np.linalg.solve(weber_hessian(t, points, ks), g)
            if np.dot(step, g) >= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = None
        moved = False
        if step is not None:
            lam = 1.0
            for _ in range(60):
                cand = t + lam * step
                if np.min(np.linalg.norm(points - cand, axis=1)) > GUARD_RADIUS:
                    fc = weber_cost(cand, points, ks)
                    if fc < f or (fc <= f + 1e-14 * abs(f) and
                                  np.linalg.norm(weber_gradient(cand, points, ks)) < gn):
                        t, f, moved = cand, fc, True
                        break
                lam *= 0.5
        if not moved:
            # damped Weiszfeld step, then plain gradient descent
            d = np.linalg.norm(points - t, axis=1)
            w = ks / d
            target = (w[:, None] * points).sum(axis=0) / w.sum()
            cand = t + DAMPING * (target - t)
            fc = weber_cost(cand, points, ks)
            if fc <= f:
                t, f = cand, fc
            else:
                lam = 1.0 / max(1.0, gn)
                while lam > 1e-18:
                    cand = t - lam * g
                    fc = weber_cost(cand, points, ks)
                    if fc < f:
                        t, f = cand, fc
                        break
                    lam *= 0.5
                else:
                    return t, f, gn, it
    raise NoConvergence(f"junction solve did not converge in {max_iter} iterations")


@dataclass(frozen=True)
class WeberPoint:
    """Minimizer of a weighted distance sum; ``terminal`` indexes a degenerate hit."""

    t: tuple[float, ...]
    F: float
    terminal: int | None
    gradient_norm: float = 0.0
    iterations: int = 0


def solve_weber(
    points: Sequence[Sequence[float]],
    ks: Sequence[float],
    tol_grad: float = TOL_GRAD,
    max_iter: int = MAX_ITER,
) -> WeberPoint:
    """Minimize ``sum k_i |t - p_i|`` over the plane.

    A terminal is returned when it satisfies the one-sided optimality
    condition; otherwise the interior minimizer is found by Newton steps
    with Weiszfeld and gradient-descent fallbacks, to gradient norm
    ``tol_grad``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise UnsupportedDimension("weighted junctions are solved in the plane only")
    if np.linalg.norm(points - points[0], axis=1).max() <= EPS_POS:
        raise ValueError("junction terminals coincide")
    ks = np.asarray(ks, dtype=float)
    if (ks <= 0).any():
        raise ValueError("junction coefficients must be positive")
    j = _terminal_minimizer(points, ks)
    if j is not None:
        t = points[j]
        return WeberPoint(tuple(float(v) for v in t), weber_cost(t, points, ks), j)
    t, f, gn, it = _minimize_interior(points, ks, tol_grad, max_iter)
    if gn > tol_grad:
        raise NoConvergence(f"stalled at gradient norm {gn:.3e}")
    return WeberPoint((float(t[0]), float(t[1])), f, None, gn, it)


def solve_junction(
    p: JunctionProblem, tol_grad: float = TOL_GRAD, max_iter: int = MAX_ITER
) -> JunctionSolution:
    """Optimal branching point for two flows merging toward ``y``.

    A minimizer on a terminal is flagged degenerate: at ``y`` the two flows
    travel separately (V shape), at ``x1`` or ``x2`` one flow passes through
    the other source.
    """
    ks = p.coefficients
    w = solve_weber(p.terminals, ks, tol_grad, max_iter)
    if w.terminal is not None:
        return JunctionSolution(w.t, w.F, None, True, _TERMINAL_NAMES[w.terminal])
    return JunctionSolution(
        w.t, w.F, angles_from_coefficients(*ks), False, None, w.gradient_norm, w.iterations
    )


def angles_from_coefficients(k1: float, k2: float, k3: float) -> tuple[float, float, float]:
    """Branch angles implied by force balance, via the law of cosines.

    ``theta1`` is measured between the direction toward ``x1`` and the
    continuation of the trunk past the junction, ``theta2`` likewise for
    ``x2``, and ``theta3`` between the two branches.
    """
    def _acos(v):
        return math.acos(min(1.0, max(-1.0, v)))

    th1 = _acos((k1**2 + k3**2 - k2**2) / (2 * k1 * k3))
    th2 = _acos((k2**2 + k3**2 - k1**2) / (2 * k2 * k3))
    th3 = _acos((k3**2 - k1**2 - k2**2) / (2 * k1 * k2))
    return th1, th2, th3


def measured_angles(t: Sequence[float], p: JunctionProblem) -> tuple[float, float, float]:
    """The same three angles read off the geometry at junction ``t``."""
    t = np.asarray(t, dtype=float)
    to1 = (np.asarray(p.x1) - t) / np.linalg.norm(np.asarray(p.x1) - t)
    to2 = (np.asarray(p.x2) - t) / np.linalg.norm(np.asarray(p.x2) - t)
    trunk = (t - np.asarray(p.y)) / np.linalg.norm(t - np.asarray(p.y))

    def angle(u, v):
        return math.acos(min(1.0, max(-1.0, float(np.dot(u, v)))))

    return angle(to1, trunk), angle(to2, trunk), angle(to1, to2)


def junction_angles(sol: JunctionSolution, p: JunctionProblem) -> tuple[float, float, float]:
    if sol.degenerate:
        raise DegenerateJunction(f"junction collapsed onto terminal {sol.terminal}")
    return angles_from_coefficients(*p.coefficients)


# integer corridors


def _path_edges(g: TransportGraph, path: Sequence[int]) -> list[Edge]:
    if len(path) < 2:
        raise ValueError("a corridor needs at least two vertices")
    if len(set(path)) != len(path):
        raise ValueError("corridor path must be simple")
    lookup = {(e.tail, e.head): e for e in g.edges}
    edges = []
    for a, b in zip(path, path[1:]):
        e = lookup.get((a, b))
        if e is None:
            raise PreconditionUnmet(f"no edge {a}->{b} in the graph support")
        edges.append(e)
    return edges


def corridor_floor(g: TransportGraph, path: Sequence[int], params: CostParams) -> int:
    """Smallest number of whole capacity units carried along ``path``."""
    g = merge_parallel(g)
    return min(split_units(e.weight, params)[0] for e in _path_edges(g, path))


def _shift_along(g, edges, amount, params):
    new = {}
    for e in edges:
        w = e.weight - amount
        q = w / params.capacity
        if abs(q - round(q)) <= params.kappa_int:
            w = round(q) * params.capacity
        new[e.id] = w
    return g.with_weights(new)


def _single_edge(g: TransportGraph, a: int, b: int, w: float) -> TransportGraph:
    verts = (Vertex(a, tuple(g.position(a))), Vertex(b, tuple(g.position(b))))
    return TransportGraph(verts, (Edge(0, a, b, w),))


def straighten_integer_corridor(
    g: TransportGraph, path: Sequence[int], params: CostParams, strict: bool = True
) -> TransportGraph:
    """Reroute the whole-unit flow of a polyline onto the straight chord.

    With ``theta0`` the smallest whole-unit count along ``path``, subtracts
    ``theta0 * c`` from every path edge and adds it on the segment from the
    first to the last vertex. The cost changes by exactly
    ``c**alpha * theta0 * (chord - polyline)``. An already straight path is
    returned unchanged. When ``theta0 == 0`` this raises
    :class:`PreconditionUnmet`, or returns ``g`` untouched if ``strict`` is
    false.
    """
    g = merge_parallel(g)
    edges = _path_edges(g, path)
    theta0 = min(split_units(e.weight, params)[0] for e in edges)
    if theta0 == 0:
        if strict:
            raise PreconditionUnmet("corridor carries no whole capacity unit")
        log.info("corridor %s carries no whole capacity unit; left as is", list(path))
        return g
    poly = sum(g.length(e) for e in edges)
    chord = float(np.linalg.norm(g.position(path[-1]) - g.position(path[0])))
    if poly - chord <= 1e-12 * poly:
        return g
    amount = theta0 * params.capacity
    rest = _shift_along(g, edges, amount, params)
    return add_graphs(rest, _single_edge(g, path[0], path[-1], amount))


def straightening_delta(g: TransportGraph, path: Sequence[int], params: CostParams) -> float:
    """Predicted cost change ``c**alpha * theta0 * (chord - polyline)``."""
    g = merge_parallel(g)
    edges = _path_edges(g, path)
    theta0 = min(split_units(e.weight, params)[0] for e in edges)
    poly = sum(g.length(e) for e in edges)
    chord = float(np.linalg.norm(g.position(path[-1]) - g.position(path[0])))
    return params.scale * theta0 * (chord - poly)


def separate_corridor(
    g: TransportGraph, path: Sequence[int], theta1: int, params: CostParams
) -> tuple[TransportGraph, TransportGraph]:
    """Split ``theta1`` whole units off ``path`` as their own corridor.

    Returns ``(corridor, remainder)``; on the path the two costs add up to
    the original exactly.
    """
    if theta1 < 0 or int(theta1) != theta1:
        raise ValueError("theta1 must be a nonnegative integer")
    g = merge_parallel(g)
    if theta1 == 0:
        return TransportGraph(), g
    edges = _path_edges(g, path)
    theta0 = min(split_units(e.weight, params)[0] for e in edges)
    if theta1 > theta0:
        raise PreconditionUnmet(f"only {theta0} whole units run along the corridor, asked {theta1}")
    amount = theta1 * params.capacity
    used = {e.tail for e in edges} | {e.head for e in edges}
    corridor = TransportGraph(
        tuple(v for v in g.vertices if v.id in used),
        tuple(Edge(e.id, e.tail, e.head, amount) for e in edges),
    )
    return corridor, _shift_along(g, edges, amount, params)


def find_integer_corridors(g: TransportGraph, params: CostParams) -> list[list[int]]:
    """Greedy maximal directed paths whose edges carry at least one unit.

    Starting from each unused edge in id order, the path is extended
    forward and backward through the lowest-id unused edge that carries a
    whole unit and keeps the path simple. Only paths with two or more edges
    are returned, since a single edge is already straight.
    """
    g = merge_parallel(g)
    heavy = [e for e in sorted(g.edges, key=lambda e: e.id) if split_units(e.weight, params)[0] >= 1]
    used: set[int] = set()
    out_edges: dict[int, list[Edge]] = {}
    in_edges: dict[int, list[Edge]] = {}
    for e in heavy:
        out_edges.setdefault(e.tail, []).append(e)
        in_edges.setdefault(e.head, []).append(e)
    paths = []
    for e in heavy:
        if e.id in used:
            continue
        used.add(e.id)
        path = [e.tail, e.head]
        while True:
            nxt = next((f for f in out_edges.get(path[-1], ())
                        if f.id not in used and f.head not in path), None)
            if nxt is None:
                break
            used.add(nxt.id)
            path.append(nxt.head)
        while True:
            prv = next((f for f in in_edges.get(path[0], ())
                        if f.id not in used and f.tail not in path), None)
            if prv is None:
                break
            used.add(prv.id)
            path.insert(0, prv.tail)
        if len(path) >= 3:
            paths.append(path)
    return paths


def corridor_cost_check(g: TransportGraph, path: Sequence[int], params: CostParams) -> tuple[float, float]:
    """Evaluated and predicted cost change of straightening ``path``."""
    after = straighten_integer_corridor(g, path, params)
    return cost(after, params) - cost(g, params), straightening_delta(g, path, params)
