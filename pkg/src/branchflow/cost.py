"""Capacity-aware transport cost and the inequalities it satisfies.

The per-weight kernel is

    H(x) = floor(x / c) + (x / c - floor(x / c)) ** alpha

so that a weight is charged linearly for every full unit of capacity it
fills and concavely for the leftover fraction. The path cost is
``c**alpha * sum(H(w_e) * len_e)`` over edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeWeight
from .graph import TransportGraph, add_graphs, merge_parallel, scale_graph

KAPPA_INT = 1e-12
RTOL = 1e-9


@dataclass(frozen=True)
class CostParams:
    alpha: float
    capacity: float = 1.0
    kappa_int: float = KAPPA_INT

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "capacity", float(self.capacity))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (self.capacity > 0 and math.isfinite(self.capacity)):
            raise ValueError(f"capacity must be positive and finite, got {self.capacity}")
        if not 0.0 < self.kappa_int <= 1e-9:
            raise ValueError("kappa_int must lie in (0, 1e-9]")

    @property
    def scale(self) -> float:
        """``c ** alpha``, the cost of one full-capacity unit per unit length."""
        return self.capacity**self.alpha


def split_units(x: float, params: CostParams) -> tuple[int, float]:
    """Integer and fractional parts of ``x / c`` with integer snapping."""
    if x < 0:
        raise NegativeWeight(f"weight must be nonnegative, got {x!r}")
    q = x / params.capacity
    n = round(q)
    if abs(q - n) <= params.kappa_int:
        return int(n), 0.0
    n = math.floor(q)
    return int(n), q - n


def h_value(x: float, params: CostParams) -> float:
    n, frac = split_units(x, params)
    return n + (frac**params.alpha if frac > 0 else 0.0)


def h_values(x: np.ndarray, params: CostParams) -> np.ndarray:
    """Vectorized :func:`h_value`."""
    x = np.asarray(x, dtype=float)
    if (x < 0).any():
        raise NegativeWeight("weights must be nonnegative")
    n, frac = _split_array(x, params)
    return n + _frac_power(frac, params.alpha)


def _split_array(x: np.ndarray, params: CostParams) -> tuple[np.ndarray, np.ndarray]:
    q = x / params.capacity
    r = np.rint(q)
    snap = np.abs(q - r) <= params.kappa_int
    n = np.where(snap, r, np.floor(q))
    frac = np.where(snap, 0.0, q - n)
    return n, frac


def _frac_power(frac: np.ndarray, alpha: float) -> np.ndarray:
    out = np.zeros_like(frac)
    pos = frac > 0
    out[pos] = frac[pos] ** alpha
    return out


def kernel_cost(weights: np.ndarray, lengths: np.ndarray, params: CostParams) -> float:
    """Cost of edges given directly as weight and length arrays."""
    if len(weights) == 0:
        return 0.0
    return float(params.scale * np.dot(h_values(weights, params), lengths))


@dataclass(frozen=True)
class EdgeCost:
    edge_id: int
    integer_part: float
    fractional_part: float

    @property
    def total(self) -> float:
        return self.integer_part + self.fractional_part


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    per_edge: tuple[EdgeCost, ...]

    @property
    def integer_total(self) -> float:
        return sum(e.integer_part for e in self.per_edge)

    @property
    def fractional_total(self) -> float:
        return sum(e.fractional_part for e in self.per_edge)


def m_alpha_c(g: TransportGraph, params: CostParams) -> CostBreakdown:
    """Capacity-aware cost with its per-edge integer/fractional split.

    Parallel edges are merged first, so the cost is that of the underlying
    current; edge ids in the breakdown refer to the surviving edges.
    """
    g = merge_parallel(g)
    if not g.edges:
        return CostBreakdown(0.0, ())
    w, ln = g.weights, g.lengths
    n, frac = _split_array(w, params)
    ints = params.scale * n * ln
    fracs = params.scale * _frac_power(frac, params.alpha) * ln
    per_edge = tuple(
        EdgeCost(e.id, float(a), float(b)) for e, a, b in zip(g.edges, ints, fracs)
    )
    return CostBreakdown(float(np.sum(ints + fracs)), per_edge)


def cost(g: TransportGraph, params: CostParams) -> float:
    """Shorthand for ``m_alpha_c(g, params).total``."""
    g = merge_parallel(g)
    return kernel_cost(g.weights, g.lengths, params)


def m_alpha(g: TransportGraph, alpha: float) -> float:
    """Classical branched-transport cost ``sum(w ** alpha * len)``."""
    g = merge_parallel(g)
    if not g.edges:
        return 0.0
    return float(np.dot(g.weights**alpha, g.lengths))


def mass(g: TransportGraph) -> float:
    g = merge_parallel(g)
    if not g.edges:
        return 0.0
    return float(np.dot(g.weights, g.lengths))


def size(g: TransportGraph) -> float:
    """Total length of the support; parallel edges count once."""
    g = merge_parallel(g)
    return float(np.sum(g.lengths)) if g.edges else 0.0


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -RTOL * max(1.0, abs(self.lhs), abs(self.rhs))


@dataclass(frozen=True)
class InequalityReport:
    checks: tuple[InequalityCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[InequalityCheck]:
        return [c for c in self.checks if not c.passed]

    def by_name(self, name: str) -> InequalityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _power(h: float, alpha: float) -> float:
    # 0 ** 0 is taken as 1
    return 1.0 if alpha == 0 else h**alpha


def verify_inequalities(
    g1: TransportGraph, g2: TransportGraph, params: CostParams, h: float
) -> InequalityReport:
    """Evaluate subadditivity, the two-sided mass bound, and scalar scaling.

    Each check is stated as ``lhs <= rhs``; for the scaling inequality the
    direction depends on whether ``h`` is below or above one.
    """
    if h < 0:
        raise ValueError("scaling factor must be nonnegative")
    c, a = params.capacity, params.alpha
    checks = []
    c1, c2 = cost(g1, params), cost(g2, params)
    checks.append(InequalityCheck("subadditivity", cost(add_graphs(g1, g2), params), c1 + c2))
    for label, g, cg in (("g1", g1, c1), ("g2", g2, c2)):
        m = mass(g)
        checks.append(InequalityCheck(f"mass_lower[{label}]", m, c ** (1 - a) * cg))
        checks.append(InequalityCheck(f"mass_upper[{label}]", c ** (1 - a) * cg, m + c * size(g)))
    scaled = cost(scale_graph(g1, h), params) if h != 0 else 0.0
    if h <= 1:
        checks.append(InequalityCheck("scalar_multiple", scaled, _power(h, a) * c1))
    else:
        checks.append(InequalityCheck("scalar_multiple", _power(h, a) * c1, scaled))
    return InequalityReport(tuple(checks))
