"""One test per acceptance criterion; each records a PASS/FAIL summary line."""

import json
import math
import time

import numpy as np

from branchflow.cli import main
from branchflow.cost import CostParams, cost, m_alpha, m_alpha_c, split_units
from branchflow.cycles import decompose, find_cycles
from branchflow.geometry import (
    JunctionProblem,
    solve_junction,
    straighten_integer_corridor,
    straightening_delta,
    weber_cost,
    weber_gradient,
)
from branchflow.graph import TransportGraph, add_graphs, boundary
from branchflow.search import optimize, oracle_best
from branchflow.suite import FAMILIES, random_graph, random_points
from conftest import FE_X1, FE_Y, two_source_problem, random_cyclic_graph, triangle_shift

R2 = math.sqrt(2)


def test_1_triangle_exactness(acceptance):
    p = CostParams(0.5, 1.0)
    expected = {
        0.0: 5 / 2 + R2 / 2,
        0.5: 3 / 2 + R2 / 2 + 3 * R2 / 4,
        -0.5: 2 + R2 / 2 + 3 * R2 / 4,
        1.0: 3 + R2 / 2,
        -1.0: 3 + R2 / 2,
    }
    graphs = {t: triangle_shift(t) for t in expected}
    err = max(abs(m_alpha_c(graphs[t], p).total - v) for t, v in expected.items())
    # best of several runs, per single cost evaluation
    runs = []
    for _ in range(20):
        start = time.perf_counter()
        for g in graphs.values():
            m_alpha_c(g, p)
        runs.append((time.perf_counter() - start) / len(graphs))
    per_eval = min(runs)
    ok = err <= 1e-9 and per_eval < 1e-3
    assert acceptance("1 triangle F(t) values", ok, f"max err {err:.1e}, {per_eval * 1e6:.0f} us per eval")


def test_2_inequality_suites(acceptance, capsys):
    start = time.perf_counter()
    code = main(["verify", "--trials", "10000", "--seed", "42"])
    elapsed = time.perf_counter() - start
    report = json.loads(capsys.readouterr().out)
    fams = report["families"]
    counts = ", ".join(f"{k} {v['passed']}/{v['total']}" for k, v in fams.items())
    ok = (code == 0 and report["passed"] and set(fams) == set(FAMILIES)
          and all(v["passed"] == v["total"] == 10_000 for v in fams.values()) and elapsed < 30)
    assert acceptance("2 inequality suites, 1e4 trials", ok, f"{elapsed:.1f} s; {counts}")


def test_3_capacity_limit(acceptance):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        pts = random_points(rng, int(rng.integers(2, 7)))
        g = random_graph(rng, pts, int(rng.integers(1, 9)), 1.0, 5.0)
        a = float(rng.uniform(0, 1))
        merged = add_graphs(g, TransportGraph())
        c = 2 * float(merged.weights.max())
        lhs, rhs = cost(g, CostParams(a, c)), m_alpha(g, a)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    assert acceptance("3 capacity limit c = 2 max w", worst <= 1e-12, f"max rel err {worst:.1e}")


def _boundary_gap(g1, g2):
    def by_pos(g):
        pos = {v.id: v.pos for v in g.vertices}
        return {pos[v]: x for v, x in boundary(g).items()}

    a, b = by_pos(g1), by_pos(g2)
    return max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))


def test_4_decomposition(acceptance):
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    failures = []
    flagged = 0
    for i in range(500):
        c = float(rng.choice([0.5, 1.0, 2.0]))
        p = CostParams(float(rng.uniform(0, 1)), c)
        g = random_cyclic_graph(rng, c)
        assert find_cycles(g)
        d = decompose(g, p)
        cert = d.certificate
        checks = {
            "t1 integer": all(split_units(e.weight, p)[1] == 0.0 for e in d.t1.edges),
            "t2 <= c": all(e.weight <= c + p.kappa_int * c for e in d.t2.edges),
            "boundary": _boundary_gap(add_graphs(d.t1, d.t2), g) <= 1e-9,
            "cost": cert.parts_total <= cert.cost_original + 1e-9,
            "cycle-free or flagged": bool(cert.unreduced) or not (find_cycles(d.t1) or find_cycles(d.t2)),
        }
        flagged += bool(cert.unreduced)
        failures += [(i, k) for k, v in checks.items() if not v]
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    assert acceptance("4 decomposition, 500 cyclic graphs", ok,
                      f"{elapsed:.1f} s, {flagged} flagged, failures {failures[:3]}")


def test_5_junction_module(acceptance):
    rng = np.random.default_rng(5)
    # gradient against central differences
    grad_err, h, n = 0.0, 1e-6, 0
    while n < 100:
        pts = rng.uniform(-3, 3, size=(3, 2))
        ks = rng.uniform(0.1, 2.0, size=3)
        t = rng.uniform(-3, 3, size=2)
        if np.min(np.linalg.norm(pts - t, axis=1)) < 0.1:
            continue
        fd = np.array([(weber_cost(t + h * e, pts, ks) - weber_cost(t - h * e, pts, ks)) / (2 * h)
                       for e in np.eye(2)])
        g = weber_gradient(t, pts, ks)
        grad_err = max(grad_err, np.linalg.norm(fd - g) / np.linalg.norm(g))
        n += 1
    # force balance at interior optima
    balance, interior = 0.0, 0
    for _ in range(200):
        x1, x2 = rng.uniform(-3, 3, size=(2, 2)) + [0, 4]
        m1, m2 = rng.uniform(0.1, 3.0, size=2)
        jp = JunctionProblem(tuple(x1), tuple(x2), (0.0, 0.0), m1, m2,
                             CostParams(float(rng.uniform(0, 1)), float(rng.uniform(0.2, 3))))
        sol = solve_junction(jp)
        if not sol.degenerate:
            interior += 1
            balance = max(balance, float(np.linalg.norm(weber_gradient(sol.t, jp.terminals, jp.coefficients))))
    # triangle inequality of the coefficients
    tri_ok = True
    for _ in range(10_000):
        m1, m2 = rng.uniform(0.001, 10, size=2)
        k1, k2, k3 = JunctionProblem((0, 1), (1, 1), (0, 0), m1, m2,
                                     CostParams(float(rng.uniform(0, 1)), float(rng.uniform(0.01, 10)))).coefficients
        tri_ok &= k3 <= (k1 + k2) * (1 + 1e-12)
    # limits of k1/k3
    lim_err = 0.0
    for _ in range(200):
        m1, m2 = rng.uniform(0.1, 5, size=2)
        a = float(rng.uniform(0, 1))
        big = JunctionProblem((0, 1), (1, 1), (0, 0), m1, m2, CostParams(a, 1e3 * (m1 + m2))).coefficients
        small = JunctionProblem((0, 1), (1, 1), (0, 0), m1, m2, CostParams(a, 1e-4 * min(m1, m2))).coefficients
        lim_err = max(lim_err, abs(big[0] / big[2] - (m1 / (m1 + m2)) ** a),
                      abs(small[0] / small[2] - m1 / (m1 + m2)))
    ok = grad_err <= 1e-5 and balance <= 1e-9 and interior > 50 and tri_ok and lim_err <= 1e-3
    assert acceptance("5 junction module", ok,
                      f"grad rel {grad_err:.1e}, balance {balance:.1e} over {interior} interior, "
                      f"limits {lim_err:.1e}")


def test_6_two_source_example(acceptance):
    p = two_source_problem()
    start = time.perf_counter()
    ref = oracle_best(p)
    res = optimize(None, p)
    elapsed = time.perf_counter() - start
    pos = {v.id: v.pos for v in ref.graph.vertices}
    corridor = any(pos[e.tail] == FE_X1 and pos[e.head] == FE_Y and abs(e.weight - 2.0) < 1e-12
                   for e in ref.graph.edges)
    junction = ref.structure["topology"] == "Y" and len(ref.structure["junctions"]) == 1
    gap = abs(res.cost - ref.cost)
    ok = corridor and junction and gap <= 1e-3 and elapsed < 10
    assert acceptance("6 two-source example", ok,
                      f"oracle {ref.cost:.9f}, optimize {res.cost:.9f}, gap {gap:.1e}, {elapsed:.2f} s")


def test_7_straightening(acceptance):
    rng = np.random.default_rng(7)
    worst, positive = 0.0, 0
    done = 0
    while done < 200:
        k = int(rng.integers(3, 7))
        pts = [tuple(float(v) for v in q) for q in rng.uniform(0, 10, size=(k, 2))]
        if min(math.dist(a, b) for i, a in enumerate(pts) for b in pts[:i]) < 1e-3:
            continue
        c = float(rng.choice([0.5, 1.0, 2.0]))
        p = CostParams(float(rng.uniform(0, 1)), c)
        w = (int(rng.integers(1, 5)) + float(rng.uniform(0, 0.99))) * c
        g = TransportGraph.from_segments([(a, b, w) for a, b in zip(pts, pts[1:])])
        path = [g.find_vertex(q) for q in pts]
        out = straighten_integer_corridor(g, path, p)
        delta = cost(out, p) - cost(g, p)
        worst = max(worst, abs(delta - straightening_delta(g, path, p)) / max(1.0, cost(g, p)))
        positive += delta > 0
        done += 1
    ok = worst <= 1e-12 and positive == 0
    assert acceptance("7 corridor straightening", ok, f"max rel err {worst:.1e}, increases {positive}")
