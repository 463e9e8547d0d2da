import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from branchflow.cost import CostParams, cost
from branchflow.errors import DegenerateJunction, PreconditionUnmet, UnsupportedDimension
from branchflow.geometry import (
    JunctionProblem,
    angles_from_coefficients,
    find_integer_corridors,
    junction_angles,
    junction_coefficients,
    measured_angles,
    separate_corridor,
    solve_junction,
    solve_weber,
    straighten_integer_corridor,
    straightening_delta,
    weber_cost,
    weber_gradient,
    weber_hessian,
)
from branchflow.graph import TransportGraph
from conftest import FE_X1, FE_X2, FE_Y

TOL = 1e-10
coord = st.floats(-5.0, 5.0)
point = st.tuples(coord, coord)
mass_st = st.floats(0.05, 4.0)
alpha_st = st.floats(0.0, 1.0)
cap_st = st.floats(0.1, 5.0)


def residual_problem(alpha=0.5, c=1.0):
    return JunctionProblem(FE_X1, FE_X2, FE_Y, 0.5, 0.5, CostParams(alpha, c))


def noncollinear(a, b, y, tol=0.05):
    a, b, y = (np.asarray(v, dtype=float) for v in (a, b, y))
    cross = abs((b - a)[0] * (y - a)[1] - (b - a)[1] * (y - a)[0])
    sides = [np.linalg.norm(b - a), np.linalg.norm(y - a), np.linalg.norm(y - b)]
    return min(sides) > tol and cross > tol * max(sides)


class TestCoefficients:
    def test_half_half(self, p05):
        k = junction_coefficients(residual_problem())
        assert k == pytest.approx((math.sqrt(0.5), math.sqrt(0.5), 1.0), abs=1e-15)

    @given(mass_st, mass_st, st.floats(0.05, 1.0))
    def test_large_capacity_ratio(self, m1, m2, a):
        p = JunctionProblem((0, 1), (1, 1), (0, 0), m1, m2, CostParams(a, 1e3 * (m1 + m2)))
        k1, _, k3 = p.coefficients
        assert k1 / k3 == pytest.approx((m1 / (m1 + m2)) ** a, rel=1e-12)

    @given(mass_st, mass_st, st.floats(0.0, 1.0))
    def test_small_capacity_ratio(self, m1, m2, a):
        p = JunctionProblem((0, 1), (1, 1), (0, 0), m1, m2, CostParams(a, 1e-4 * min(m1, m2)))
        k1, _, k3 = p.coefficients
        assert abs(k1 / k3 - m1 / (m1 + m2)) <= 1e-3

    @given(mass_st, mass_st, alpha_st, cap_st)
    def test_triangle_inequality(self, m1, m2, a, c):
        k1, k2, k3 = JunctionProblem((0, 1), (1, 1), (0, 0), m1, m2, CostParams(a, c)).coefficients
        assert k3 <= (k1 + k2) * (1 + 1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            JunctionProblem((0, 1), (1, 1), (0, 0), 0.0, 1.0, CostParams(0.5))
        with pytest.raises(UnsupportedDimension):
            JunctionProblem((0, 1, 0), (1, 1, 0), (0, 0, 0), 1.0, 1.0, CostParams(0.5))


class TestSolveJunction:
    def test_collinear_small_capacity_passes_through(self):
        p = JunctionProblem((0, 2), (0, 1), (0, 0), 1.0, 1.0, CostParams(0.5, 1e-3))
        sol = solve_junction(p)
        assert sol.degenerate and sol.terminal == "x2" and sol.t == (0.0, 1.0)

    @given(mass_st, alpha_st, cap_st)
    def test_symmetric_on_axis(self, m, a, c):
        sol = solve_junction(JunctionProblem((-1, 3), (1, 3), (0, 0), m, m, CostParams(a, c)))
        assert abs(sol.t[0]) <= 1e-9

    def test_two_source_example_residual(self, p05):
        p = residual_problem()
        sol = solve_junction(p)
        k1, k2, _ = p.coefficients
        v_shape = k1 * math.dist(FE_X1, FE_Y) + k2 * math.dist(FE_X2, FE_Y)
        assert not sol.degenerate
        assert sol.F < v_shape
        # right-angle branching: the 0.5 + 0.5 -> 1 junction sits at (0, 2) with F = 4
        assert sol.t == pytest.approx((0.0, 2.0), abs=1e-9)
        assert sol.F == pytest.approx(4.0, abs=1e-12)

    def test_v_shape_when_merging_does_not_pay(self):
        p = JunctionProblem((-1, 0.1), (1, 0.1), (0, 0), 1.0, 1.0, CostParams(1.0, 10.0))
        sol = solve_junction(p)
        assert sol.degenerate and sol.terminal == "y"

    def test_coincident_terminals_rejected(self):
        with pytest.raises(ValueError):
            solve_junction(JunctionProblem((0, 0), (0, 0), (0, 0), 1.0, 1.0, CostParams(0.5)))

    @settings(max_examples=150, deadline=None)
    @given(point, point, point, mass_st, mass_st, st.floats(0.05, 0.95), cap_st)
    def test_beats_v_and_pass_through(self, x1, x2, y, m1, m2, a, c):
        assume(noncollinear(x1, x2, y))
        p = JunctionProblem(x1, x2, y, m1, m2, CostParams(a, c))
        k1, k2, k3 = p.coefficients
        assume(k3 < (k1 + k2) * (1 - 1e-9))
        sol = solve_junction(p)
        pts = p.terminals
        for t in pts:
            assert sol.F <= weber_cost(t, pts, (k1, k2, k3)) + 1e-9
        if not sol.degenerate:
            assert np.linalg.norm(weber_gradient(sol.t, pts, (k1, k2, k3))) <= 10 * TOL

    @settings(max_examples=150, deadline=None)
    @given(point, point, point, mass_st, mass_st, alpha_st, cap_st)
    def test_angles_consistent(self, x1, x2, y, m1, m2, a, c):
        assume(noncollinear(x1, x2, y))
        p = JunctionProblem(x1, x2, y, m1, m2, CostParams(a, c))
        sol = solve_junction(p)
        if sol.degenerate:
            with pytest.raises(DegenerateJunction):
                junction_angles(sol, p)
            return
        th = junction_angles(sol, p)
        assert measured_angles(sol.t, p) == pytest.approx(th, abs=1e-6)
        assert math.cos(th[2]) == pytest.approx(math.cos(th[0] + th[1]), abs=1e-9)


class TestAngles:
    def test_equal_coefficients_symmetric(self):
        th = angles_from_coefficients(0.7, 0.7, 1.0)
        assert th[0] == th[1]

    def test_linear_cost_goes_straight(self):
        assert angles_from_coefficients(1.0, 2.0, 3.0)[2] == 0.0

    def test_two_source_example_angles(self):
        p = residual_problem()
        sol = solve_junction(p)
        th = junction_angles(sol, p)
        assert th == pytest.approx((math.pi / 4, math.pi / 4, math.pi / 2), abs=1e-12)
        assert measured_angles(sol.t, p) == pytest.approx(th, abs=1e-6)


class TestWeberDerivatives:
    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(0)
        h = 1e-6
        for _ in range(100):
            pts = rng.uniform(-3, 3, size=(3, 2))
            ks = rng.uniform(0.1, 2.0, size=3)
            t = rng.uniform(-3, 3, size=2)
            if np.min(np.linalg.norm(pts - t, axis=1)) < 0.1:
                continue
            fd = np.array([
                (weber_cost(t + h * e, pts, ks) - weber_cost(t - h * e, pts, ks)) / (2 * h) for e in np.eye(2)
            ])
            g = weber_gradient(t, pts, ks)
            assert np.linalg.norm(fd - g) <= 1e-5 * max(np.linalg.norm(g), 1e-3)

    def test_hessian_positive_semidefinite(self):
        rng = np.random.default_rng(1)
        h = 1e-4
        for _ in range(100):
            pts = rng.uniform(-3, 3, size=(3, 2))
            ks = rng.uniform(0.1, 2.0, size=3)
            t = rng.uniform(-3, 3, size=2)
            if np.min(np.linalg.norm(pts - t, axis=1)) < 0.1:
                continue
            fd = np.array([
                (weber_gradient(t + h * e, pts, ks) - weber_gradient(t - h * e, pts, ks)) / (2 * h) for e in np.eye(2)
            ])
            assert np.linalg.eigvalsh((fd + fd.T) / 2).min() >= -1e-8
            np.testing.assert_allclose(fd, weber_hessian(t, pts, ks), atol=1e-5)

    def test_weber_with_four_terminals(self):
        pts = [(0, 0), (2, 0), (2, 2), (0, 2)]
        sol = solve_weber(pts, [1, 1, 1, 1])
        assert sol.terminal is None and sol.t == pytest.approx((1.0, 1.0), abs=1e-9)


def bent(w, c=1.0, alpha=0.5):
    v1, m, v2 = (0.0, 0.0), (1.5, math.sqrt(1.75)), (3.0, 0.0)
    g = TransportGraph.from_segments([(v1, m, w), (m, v2, w)])
    return g, [g.find_vertex(v1), g.find_vertex(m), g.find_vertex(v2)], CostParams(alpha, c)


class TestCorridors:
    @pytest.mark.parametrize("c, alpha", [(1.0, 0.5), (0.5, 0.3), (2.0, 0.0)])
    def test_bent_corridor(self, c, alpha):
        g, path, p = bent(2 * c, c, alpha)
        out = straighten_integer_corridor(g, path, p)
        assert cost(out, p) - cost(g, p) == pytest.approx(-(c**alpha) * 2 * 1.0, abs=1e-12)
        assert [(e.tail, e.head, e.weight) for e in out.edges] == [(path[0], path[2], 2 * c)]

    def test_partial_units_stay_on_the_polyline(self, p05):
        g, path, p = bent(2.3)
        out = straighten_integer_corridor(g, path, p)
        assert sorted(e.weight for e in out.edges) == pytest.approx([0.3, 0.3, 2.0])
        assert cost(out, p) - cost(g, p) == pytest.approx(straightening_delta(g, path, p), abs=1e-12)

    def test_straight_corridor_unchanged(self, p05):
        g = TransportGraph.from_segments([((0, 0), (1, 0), 2.0), ((1, 0), (3, 0), 2.0)])
        path = [g.find_vertex(q) for q in ((0, 0), (1, 0), (3, 0))]
        assert straighten_integer_corridor(g, path, p05) == g

    def test_zero_floor(self, p05):
        g, path, p = bent(0.7)
        with pytest.raises(PreconditionUnmet):
            straighten_integer_corridor(g, path, p)
        assert straighten_integer_corridor(g, path, p, strict=False) == g

    def test_path_must_follow_edges(self, p05):
        g, path, p = bent(2.0)
        with pytest.raises(PreconditionUnmet):
            straighten_integer_corridor(g, path[::-1], p)

    def test_separate_single_edge(self):
        p = CostParams(0.5, 2.0)
        g = TransportGraph.from_segments([((0, 0), (3, 4), 5.0)])
        corridor, rest = separate_corridor(g, [0, 1], 2, p)
        assert [e.weight for e in corridor.edges] == [4.0]
        assert [e.weight for e in rest.edges] == [1.0]
        assert cost(corridor, p) + cost(rest, p) == cost(g, p)

    def test_separate_zero_units(self, p05):
        g = TransportGraph.from_segments([((0, 0), (3, 4), 2.5)])
        corridor, rest = separate_corridor(g, [0, 1], 0, p05)
        assert corridor.edges == () and rest == g

    def test_separate_two_source_example_outflow(self, p05):
        g = TransportGraph.from_segments([(FE_X1, FE_Y, 2.5), (FE_X2, FE_Y, 0.5)])
        path = [g.find_vertex(FE_X1), g.find_vertex(FE_Y)]
        corridor, rest = separate_corridor(g, path, 2, p05)
        assert [e.weight for e in corridor.edges] == [2.0]
        assert sorted(e.weight for e in rest.edges) == [0.5, 0.5]
        with pytest.raises(PreconditionUnmet):
            separate_corridor(g, path, 3, p05)

    def test_find_corridors(self, p05):
        g = TransportGraph.from_segments([((0, 0), (1, 1), 2.0), ((1, 1), (2, 0), 1.5), ((2, 0), (3, 3), 0.5)])
        assert find_integer_corridors(g, p05) == [[0, 1, 2]]


@settings(max_examples=200, deadline=None)
@given(
    st.lists(point, min_size=3, max_size=6, unique=True),
    st.integers(1, 4),
    st.floats(0.0, 0.99),
    alpha_st,
    st.sampled_from([0.5, 1.0, 3.0]),
)
def test_straightening_delta_exact(pts, units, frac, a, c):
    arr = np.array(pts)
    gaps = np.linalg.norm(arr[:, None] - arr[None], axis=-1) + np.eye(len(pts)) * 10
    assume(gaps.min() > 1e-3)
    w = (units + frac) * c
    g = TransportGraph.from_segments([(p, q, w) for p, q in zip(pts, pts[1:])])
    p = CostParams(a, c)
    path = [g.find_vertex(q) for q in pts]
    out = straighten_integer_corridor(g, path, p)
    delta = cost(out, p) - cost(g, p)
    assert delta <= 1e-12 * max(1.0, cost(g, p))
    assert delta == pytest.approx(straightening_delta(g, path, p), abs=1e-12 * max(1.0, cost(g, p)))
