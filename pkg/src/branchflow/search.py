"""Brute-force oracle for tiny instances and the heuristic optimizer pipeline."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cost import CostParams, cost, h_value, split_units
from .cycles import decompose
from .errors import Infeasible, NoConvergence, PreconditionUnmet, TooLarge, UnsupportedDimension
from .geometry import find_integer_corridors, solve_weber, straighten_integer_corridor
from .graph import TransportGraph, add_graphs, canonicalize, check_balance, merge_parallel, relocate_vertex
from .measures import EPS_POS, TransportProblem, total_mass, validate_problem

log = logging.getLogger(__name__)

MAX_SOURCES = 3
MAX_UNITS = 16
MAX_PASSES = 50
IMPROVE_TOL = 1e-12


@dataclass(frozen=True)
class OracleConfig:
    grid: int = 64
    rounds: int = 4
    shrink: float = 0.25
    padding: float = 0.10

    def __post_init__(self):
        if self.grid < 8:
            raise ValueError("oracle grid must have at least 8 points per axis")
        if self.rounds < 1:
            raise ValueError("oracle needs at least one refinement round")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")

    @property
    def joint_grid(self) -> int:
        """Per-axis resolution for topologies with two free junctions."""
        return max(8, self.grid // 4)


@dataclass(frozen=True)
class OptimizeResult:
    graph: TransportGraph
    cost: float
    trace: list[tuple[str, float, float]] = field(default_factory=list)
    structure: dict | None = None

    @property
    def monotone(self) -> bool:
        return all(after <= before + 1e-12 * max(1.0, abs(before)) for _, before, after in self.trace)

    def as_json(self) -> dict:
        out = {"cost": self.cost, "trace": [list(t) for t in self.trace]}
        if self.structure is not None:
            out["structure"] = self.structure
        return out


# oracle


def _grid_minimize(
    fn: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    n_points: int,
    grid: int,
    cfg: OracleConfig,
    seeds: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Minimize ``fn`` over ``n_points`` planar points by grid refinement.

    ``fn`` maps an ``(N, 2 * n_points)`` array to ``N`` costs. Each round
    evaluates a full tensor grid over the current box and recentres a box
    shrunk by ``cfg.shrink`` on the best point. ``seeds`` are extra
    candidates (terminal placements) evaluated up front.
    """
    dims = 2 * n_points
    lo = np.tile(lo, n_points)
    hi = np.tile(hi, n_points)
    vals = fn(seeds)
    best_x, best_f = seeds[int(np.argmin(vals))], float(np.min(vals))
    center, half = (lo + hi) / 2, (hi - lo) / 2
    for _ in range(cfg.rounds + 1):
        axes = [np.linspace(c - h, c + h, grid) for c, h in zip(center, half)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)
        vals = fn(mesh)
        i = int(np.argmin(vals))
        if vals[i] < best_f:
            best_x, best_f = mesh[i], float(vals[i])
        center, half = best_x, half * cfg.shrink
    return best_x, best_f


def _dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(((a - b) ** 2).sum(axis=-1))


@dataclass(frozen=True)
class _Candidate:
    cost: float
    label: str
    segments: tuple[tuple[tuple[float, float], tuple[float, float], float], ...]
    junctions: tuple[tuple[float, float], ...]


def _residual_topologies(xs, rs, y, params, lo, hi, cfg):
    """Best tree for sub-problem ``sum r_i delta_{x_i} -> sum r_i delta_y``."""
    s = params.scale
    n = len(xs)
    X = [np.asarray(x, dtype=float) for x in xs]
    Y = np.asarray(y, dtype=float)

    def k(m):
        return s * h_value(m, params)

    terms = [Y] + X
    seeds1 = np.array(terms)
    out = []
    if n == 1:
        return [_Candidate(k(rs[0]) * float(_dist(X[0], Y)), "direct", ((xs[0], y, rs[0]),), ())]
    if n == 2:
        ka, kb, kab = k(rs[0]), k(rs[1]), k(rs[0] + rs[1])

        def fy(t):
            return ka * _dist(X[0], t) + kb * _dist(X[1], t) + kab * _dist(t, Y)

        t, f = _grid_minimize(fy, lo, hi, 1, cfg.grid, cfg, seeds1)
        tt = (float(t[0]), float(t[1]))
        segs = ((xs[0], tt, rs[0]), (xs[1], tt, rs[1]), (tt, y, rs[0] + rs[1]))
        return [_Candidate(f, "Y", segs, (tt,))]
    # three active sources
    ks = [k(r) for r in rs]
    kall = k(sum(rs))
    direct = [ks[i] * float(_dist(X[i], Y)) for i in range(3)]
    out.append(_Candidate(sum(direct), "star", tuple((xs[i], y, rs[i]) for i in range(3)), ()))
    for a, b in ((0, 1), (0, 2), (1, 2)):
        c = 3 - a - b
        kab = k(rs[a] + rs[b])

        def fpair(t, a=a, b=b, kab=kab):
            return ks[a] * _dist(X[a], t) + ks[b] * _dist(X[b], t) + kab * _dist(t, Y)

        t, f = _grid_minimize(fpair, lo, hi, 1, cfg.grid, cfg, seeds1)
        tt = (float(t[0]), float(t[1]))
        segs = ((xs[a], tt, rs[a]), (xs[b], tt, rs[b]), (tt, y, rs[a] + rs[b]), (xs[c], y, rs[c]))
        out.append(_Candidate(f + direct[c], f"pair{a + 1}{b + 1}+direct", segs, (tt,)))

        def ffull(z, a=a, b=b, c=c, kab=kab):
            t1, t2 = z[:, :2], z[:, 2:]
            return (ks[a] * _dist(X[a], t1) + ks[b] * _dist(X[b], t1) + kab * _dist(t1, t2)
                    + ks[c] * _dist(X[c], t2) + kall * _dist(t2, Y))

        seeds2 = np.array([np.concatenate([p, q]) for p in terms for q in terms])
        z, f = _grid_minimize(ffull, lo, hi, 2, cfg.joint_grid, cfg, seeds2)
        t1, t2 = (float(z[0]), float(z[1])), (float(z[2]), float(z[3]))
        segs = ((xs[a], t1, rs[a]), (xs[b], t1, rs[b]), (t1, t2, rs[a] + rs[b]),
                (xs[c], t2, rs[c]), (t2, y, sum(rs)))
        out.append(_Candidate(f, f"steiner{a + 1}{b + 1}", segs, (t1, t2)))

    def fquad(t):
        return sum(ks[i] * _dist(X[i], t) for i in range(3)) + kall * _dist(t, Y)

    t, f = _grid_minimize(fquad, lo, hi, 1, cfg.grid, cfg, seeds1)
    tt = (float(t[0]), float(t[1]))
    segs = tuple((xs[i], tt, rs[i]) for i in range(3)) + ((tt, y, sum(rs)),)
    out.append(_Candidate(f, "degree4", segs, (tt,)))
    return out


def oracle_best(p: TransportProblem, cfg: OracleConfig | None = None, params: CostParams | None = None) -> OptimizeResult:
    """Best tree over an enumerated topology set for at most three sources and one sink.

    Every source may first send ``theta_i`` whole capacity units along its
    own straight corridor to the sink; the residual masses are then routed
    through each candidate topology (direct star, one junction, two
    junctions, one four-way junction) with junction positions found by
    grid refinement. Only intended as an independent cross-check.
    """
    cfg = cfg or OracleConfig()
    params = params or p.params
    if params is None:
        raise ValueError("cost parameters are required")
    problems = validate_problem(p)
    if problems:
        raise Infeasible("; ".join(problems))
    if len(p.sink) != 1 or len(p.source) > MAX_SOURCES:
        raise TooLarge(f"oracle handles at most {MAX_SOURCES} sources and exactly one sink")
    if p.dimension != 2:
        raise UnsupportedDimension("oracle is planar only")
    units = math.floor(total_mass(p.source) / params.capacity + params.kappa_int)
    if units > MAX_UNITS:
        raise TooLarge(f"{units} capacity units exceed the split cap of {MAX_UNITS}")

    y = p.sink.positions[0]
    xs = p.source.positions
    ms = p.source.masses
    pts = np.array(list(xs) + [y], dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = cfg.padding * np.maximum(hi - lo, max(float(np.max(hi - lo)), 1.0) * 1e-3)
    lo, hi = lo - pad, hi + pad

    floors = [split_units(m, params)[0] for m in ms]
    cache: dict[tuple, list[_Candidate]] = {}
    best: tuple[float, tuple, _Candidate | None] | None = None
    trace = []
    for thetas in itertools.product(*(range(f + 1) for f in floors)):
        rs = []
        for m, th in zip(ms, thetas):
            r = m - th * params.capacity
            rs.append(0.0 if r <= params.kappa_int * max(1.0, m) else r)
        corridor = sum(params.scale * th * float(np.linalg.norm(np.subtract(x, y)))
                       for x, th in zip(xs, thetas))
        active = tuple(i for i, r in enumerate(rs) if r > 0)
        key = tuple(rs[i] for i in active) + active
        if key not in cache:
            cache[key] = (
                _residual_topologies([xs[i] for i in active], [rs[i] for i in active], y, params, lo, hi, cfg)
                if active else [_Candidate(0.0, "none", (), ())]
            )
        for cand in cache[key]:
            total = corridor + cand.cost
            before = best[0] if best else math.inf
            if total < before:
                best = (total, thetas, cand)
                label = f"theta={list(thetas)}:{cand.label}"
                trace.append((label, before if math.isfinite(before) else total, total))
    assert best is not None
    _, thetas, cand = best
    segs = [(x, y, th * params.capacity) for x, th in zip(xs, thetas) if th > 0]
    segs += list(cand.segments)
    g = TransportGraph.from_segments(segs, extra_points=list(xs) + [y])
    g = canonicalize(g)
    structure = {
        "topology": cand.label,
        "corridors": [
            {"source": list(x), "units": th, "weight": th * params.capacity}
            for x, th in zip(xs, thetas) if th > 0
        ],
        "junctions": [list(t) for t in cand.junctions],
    }
    return OptimizeResult(g, cost(g, params), trace, structure)


# optimizer pipeline


def star_graph(p: TransportProblem) -> TransportGraph:
    """Every source joined straight to every sink with proportional weights."""
    total = total_mass(p.sink)
    segs = []
    for xs, ms in p.source:
        for ys, ns in p.sink:
            if np.linalg.norm(np.subtract(xs, ys)) > EPS_POS:
                segs.append((xs, ys, ms * ns / total))
    return TransportGraph.from_segments(segs, extra_points=p.source.positions + p.sink.positions)


def _atom_vertices(g: TransportGraph, p: TransportProblem) -> set[int]:
    out = set()
    for pos in p.source.positions + p.sink.positions:
        vid = g.find_vertex(pos)
        if vid is not None:
            out.add(vid)
    return out


def _better(new: float, old: float) -> bool:
    return new < old - IMPROVE_TOL * max(1.0, abs(old))


def _pass_decompose(g, p, params):
    d = decompose(g, params)
    return d.combined


def _pass_straighten(g, p, params):
    for _ in range(max(1, len(g.edges))):
        base = cost(g, params)
        for path in find_integer_corridors(g, params):
            try:
                cand = straighten_integer_corridor(g, path, params)
            except PreconditionUnmet:
                continue
            if _better(cost(cand, params), base):
                g = cand
                break
        else:
            return g
    return g


def _reroute_pair(g, hub, e1, e2, amounts, t, params):
    # Move amounts[i] of edge e_i onto a branch through t, keeping orientation.
    edges = [e1, e2]
    weights = {e.id: e.weight - a for e, a in zip(edges, amounts)}
    for e in edges:
        w = weights[e.id]
        q = w / params.capacity
        weights[e.id] = round(q) * params.capacity if abs(q - round(q)) <= params.kappa_int else w
    rest = g.with_weights(weights)
    segs = []
    hub_pos = tuple(g.position(hub))
    for e, a in zip(edges, amounts):
        other = e.head if e.tail == hub else e.tail
        op = tuple(g.position(other))
        if e.head == hub:
            segs.append((op, t, a))
        else:
            segs.append((t, op, a))
    total = sum(amounts)
    if edges[0].head == hub:
        segs.append((t, hub_pos, total))
    else:
        segs.append((hub_pos, t, total))
    branch = TransportGraph.from_segments(segs)
    return add_graphs(rest, branch)


def _pass_branch(g, p, params):
    """Replace two flows meeting at a vertex by a Y through an optimal junction."""
    if g.dimension != 2:
        return g
    for _ in range(max(1, 2 * len(g.edges))):
        base = cost(g, params)
        best = None
        for v in sorted(x.id for x in g.vertices):
            inc = [e for e in g.incident(v) if e.head == v]
            out = [e for e in g.incident(v) if e.tail == v]
            for group in (inc, out):
                for e1, e2 in itertools.combinations(sorted(group, key=lambda e: e.id), 2):
                    options = []
                    fr = [split_units(e.weight, params)[1] * params.capacity for e in (e1, e2)]
                    if fr[0] > 0 and fr[1] > 0:
                        options.append(fr)
                    options.append([e1.weight, e2.weight])
                    for amounts in options:
                        others = [e.tail if e.head == v else e.head for e in (e1, e2)]
                        pts = [g.position(others[0]), g.position(others[1]), g.position(v)]
                        ks = [params.scale * h_value(a, params) for a in amounts]
                        ks.append(params.scale * h_value(sum(amounts), params))
                        try:
                            sol = solve_weber(pts, ks)
                        except (NoConvergence, ValueError):
                            continue
                        if sol.terminal == 2:
                            continue
                        cand = _reroute_pair(g, v, e1, e2, amounts, sol.t, params)
                        cc = cost(cand, params)
                        if _better(cc, base) and (best is None or cc < best[0]):
                            best = (cc, cand)
        if best is None:
            return g
        g = best[1]
    return g


def _pass_relocate(g, p, params):
    """Move every interior vertex to the weighted median of its neighbours."""
    if g.dimension != 2:
        return g
    fixed = _atom_vertices(g, p)
    for _ in range(max(1, 2 * len(g.vertices))):
        moved = False
        for v in sorted(x.id for x in g.vertices):
            if v in fixed or g.find_vertex(g.position(v)) != v:
                continue
            inc = g.incident(v)
            if len(inc) < 2:
                continue
            pts = [g.position(e.head if e.tail == v else e.tail) for e in inc]
            ks = [params.scale * h_value(e.weight, params) for e in inc]
            try:
                sol = solve_weber(pts, ks)
            except (NoConvergence, ValueError):
                continue
            if np.linalg.norm(np.subtract(sol.t, g.position(v))) <= EPS_POS:
                continue
            cand = relocate_vertex(g, v, sol.t)
            if _better(cost(cand, params), cost(g, params)):
                g, moved = cand, True
                break
        if not moved:
            return g
    return g


PASSES: tuple[tuple[str, Callable], ...] = (
    ("decompose", _pass_decompose),
    ("straighten", _pass_straighten),
    ("branch", _pass_branch),
    ("relocate", _pass_relocate),
)


def optimize(
    g0: TransportGraph | None,
    p: TransportProblem,
    params: CostParams | None = None,
    max_passes: int = MAX_PASSES,
) -> OptimizeResult:
    """Heuristic cost descent from ``g0`` (or the proportional star).

    Each pass runs cycle decomposition, corridor straightening, V-to-Y
    branching and junction relocation in turn; a move is only kept when it
    lowers the cost, so the trace is non-increasing. Stops once a full
    pass gains less than 1e-12 or after ``max_passes`` passes. No global
    optimality is claimed.
    """
    params = params or p.params
    if params is None:
        raise ValueError("cost parameters are required")
    problems = validate_problem(p)
    if problems:
        raise Infeasible("; ".join(problems))
    if g0 is None:
        g = star_graph(p)
    else:
        try:
            report = check_balance(g0, p)
        except LookupError as exc:
            raise Infeasible(str(exc)) from exc
        if not report.ok:
            raise Infeasible(f"initial graph violates balance by {report.max_abs!r}")
        g = g0
    g = merge_parallel(g)
    current = cost(g, params)
    trace = []
    for k in range(1, max_passes + 1):
        start = current
        for name, step in PASSES:
            cand = step(g, p, params)
            cc = cost(cand, params)
            if cc <= current:
                g, after = cand, cc
            else:
                after = current
            trace.append((f"pass{k}:{name}", current, after))
            current = after
        if start - current < IMPROVE_TOL * max(1.0, abs(start)):
            break
    g = canonicalize(g)
    if not check_balance(g, p).ok:
        raise AssertionError("optimizer broke the balance equation")
    return OptimizeResult(g, cost(g, params), trace)
