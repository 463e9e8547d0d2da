"""Capacity-constrained branched transport: costs, reductions and junctions."""

from .cost import (
    CostBreakdown,
    CostParams,
    InequalityReport,
    cost,
    h_value,
    m_alpha,
    m_alpha_c,
    mass,
    size,
    verify_inequalities,
)
from .cycles import Certificate, Cycle, Decomposition, decompose, find_cycles, reduce_fractional_cycle, reduce_integer_cycle
from .errors import (
    BranchflowError,
    DegenerateJunction,
    Infeasible,
    MissingBoundaryVertex,
    NegativeWeight,
    NoConvergence,
    ParseError,
    PreconditionUnmet,
    TooLarge,
    UnsupportedDimension,
)
from .geometry import (
    JunctionProblem,
    JunctionSolution,
    junction_angles,
    junction_coefficients,
    separate_corridor,
    solve_junction,
    straighten_integer_corridor,
)
from .graph import Edge, TransportGraph, Vertex, add_graphs, canonicalize, check_balance, scale_graph
from .measures import AtomicMeasure, TransportProblem, validate_problem
from .search import OptimizeResult, OracleConfig, optimize, oracle_best
from .svg import RenderSpec, render_svg

__version__ = "0.1.0"
