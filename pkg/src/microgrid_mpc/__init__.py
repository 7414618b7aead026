"""Resilient energy management for an isolated microgrid.

Sliding-window model-predictive control over a native mixed-integer
linear programming solver: each decision hour solves a 24-hour lookahead
MILP trading off battery switching cost, a piecewise-linear battery
lifecycle credit, a linearized power-imbalance penalty, and a resilience
credit that prioritizes essential loads; a two-hour-average forecaster
covers load data lost to communication outages.
"""

from .battery import (
    DEFAULT_BLC_CURVE,
    BatteryError,
    BatteryMode,
    BatteryParams,
    blc_eval,
    dod_of,
    estimate_lifespan,
    load_blc_curve,
    soc_update,
    switching_cost,
)
from .engine import (
    EngineConfig,
    EngineError,
    MpcDecision,
    MpcEngine,
    MpcState,
    Weights,
    build_horizon_problem,
    run,
)
from .forecast import ForecastError, LoadHistory, fill_window, predict_next, rmse
from .metrics import SimulationResult, count_switches, loss_totals, resilience_index
from .milp import (
    MilpError,
    MilpProblem,
    MilpSolution,
    PiecewiseCurve,
    SolverOptions,
    encode_piecewise,
    solve_lp,
    solve_milp,
)
from .scenario import (
    BUNDLED_SEED,
    GeneratorConfig,
    ScenarioError,
    ScenarioTimeSeries,
    ScenarioWindow,
    bundled_scenario,
    generate_synthetic,
    load_scenario,
    window,
    write_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "BUNDLED_SEED",
    "DEFAULT_BLC_CURVE",
    "BatteryError",
    "BatteryMode",
    "BatteryParams",
    "EngineConfig",
    "EngineError",
    "ForecastError",
    "GeneratorConfig",
    "LoadHistory",
    "MilpError",
    "MilpProblem",
    "MilpSolution",
    "MpcDecision",
    "MpcEngine",
    "MpcState",
    "PiecewiseCurve",
    "ScenarioError",
    "ScenarioTimeSeries",
    "ScenarioWindow",
    "SimulationResult",
    "SolverOptions",
    "Weights",
    "blc_eval",
    "build_horizon_problem",
    "bundled_scenario",
    "count_switches",
    "dod_of",
    "encode_piecewise",
    "estimate_lifespan",
    "fill_window",
    "generate_synthetic",
    "load_blc_curve",
    "load_scenario",
    "loss_totals",
    "predict_next",
    "resilience_index",
    "rmse",
    "run",
    "soc_update",
    "solve_lp",
    "solve_milp",
    "switching_cost",
    "window",
    "write_scenario",
]
