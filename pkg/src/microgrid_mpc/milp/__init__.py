from .problem import (
    BINARY,
    CONTINUOUS,
    MilpError,
    MilpProblem,
    PiecewiseCurve,
    encode_piecewise,
)
from .branch_bound import (
    GAP_LIMIT,
    INFEASIBLE,
    NUMERICAL,
    OPTIMAL,
    UNBOUNDED,
    MilpSolution,
    SolverOptions,
    solve_lp,
    solve_milp,
)

__all__ = [
    "BINARY",
    "CONTINUOUS",
    "MilpError",
    "MilpProblem",
    "PiecewiseCurve",
    "encode_piecewise",
    "MilpSolution",
    "SolverOptions",
    "solve_lp",
    "solve_milp",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "GAP_LIMIT",
    "NUMERICAL",
]
