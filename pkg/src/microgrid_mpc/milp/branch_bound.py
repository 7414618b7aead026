"""LP and MILP drivers: two-phase simplex entry point and best-first
branch-and-bound over binary variables.

Branching is most-fractional with lowest-index tie-break, restricted to the
highest-priority fractional group when variables carry priorities; nodes are ordered
best-first by parent LP bound with FIFO tie-break, so runs are fully
deterministic. Child LPs re-use the solver's current basis via dual simplex
warm starts (the objective never changes inside the tree, so any previously
optimal basis stays dual feasible).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .problem import MilpProblem, MilpError
from . import simplex as sx
from .simplex import BoundedSimplex, NumericalTrouble, StandardForm

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
GAP_LIMIT = "gap-limit"
NUMERICAL = "numerical"


@dataclass
class SolverOptions:
    feasibility_tol: float = 1e-7
    integrality_tol: float = 1e-6
    gap_tol: float = 1e-6
    node_limit: int = 1_000_000   # 0 = diving heuristic only, no tree search
    deterministic: bool = True

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.integrality_tol <= 0 or self.gap_tol <= 0:
            raise MilpError("solver tolerances must be positive")
        if self.node_limit < 0:
            raise MilpError("node limit must be nonnegative")


@dataclass
class MilpSolution:
    status: str
    values: np.ndarray | None = None
    objective: float | None = None
    gap: float = 0.0
    message: str = ""
    nodes: int = 0
    iterations: int = 0
    basis: tuple | None = field(default=None, repr=False)


def _make_simplex(problem: MilpProblem, opts: SolverOptions) -> BoundedSimplex:
    sf = StandardForm(problem)
    return BoundedSimplex(sf, feas_tol=opts.feasibility_tol)


def _lp_solution(spx: BoundedSimplex, status: str) -> MilpSolution:
    if status == sx.OPTIMAL:
        return MilpSolution(OPTIMAL, spx.solution_values(), spx.objective(),
                            iterations=spx.iterations, basis=spx.snapshot_basis())
    if status == sx.INFEASIBLE:
        return MilpSolution(INFEASIBLE, iterations=spx.iterations)
    if status == sx.UNBOUNDED:
        return MilpSolution(UNBOUNDED, iterations=spx.iterations)
    return MilpSolution(NUMERICAL, message=f"simplex returned {status}",
                        iterations=spx.iterations)


def solve_lp(problem: MilpProblem, options: SolverOptions | None = None) -> MilpSolution:
    """Solve the LP relaxation of the problem with the two-phase simplex."""
    opts = options or SolverOptions()
    spx = _make_simplex(problem, opts)
    try:
        status = spx.cold_start()
    except NumericalTrouble as exc:
        return MilpSolution(NUMERICAL, message=str(exc), iterations=spx.iterations)
    return _lp_solution(spx, status)


class _Tree:
    """Bound-change bookkeeping shared by all nodes of one search."""

    def __init__(self, spx: BoundedSimplex, bin_idx: np.ndarray):
        self.spx = spx
        self.bin_idx = bin_idx
        self.orig_lb = spx.lb[bin_idx].copy()
        self.orig_ub = spx.ub[bin_idx].copy()
        self._touched: set[int] = set()

    def apply(self, fixings: dict[int, int]) -> None:
        spx = self.spx
        for j in self._touched - set(fixings):
            k = int(np.searchsorted(self.bin_idx, j))
            spx.lb[j] = self.orig_lb[k]
            spx.ub[j] = self.orig_ub[k]
        for j, v in fixings.items():
            spx.lb[j] = float(v)
            spx.ub[j] = float(v)
            if spx.vstat[j] == sx.AT_LOWER and v == 1:
                spx.vstat[j] = sx.AT_UPPER
            elif spx.vstat[j] == sx.AT_UPPER and v == 0:
                spx.vstat[j] = sx.AT_LOWER
        self._touched = set(fixings)
        spx.refresh_xB()

    def solve_node(self) -> str:
        spx = self.spx
        try:
            return spx.reoptimize()
        except NumericalTrouble:
            pass
        try:
            spx.refactor()
            return spx.reoptimize()
        except NumericalTrouble:
            pass
        # last resort: cold restart under the node's bounds
        try:
            return spx.cold_start()
        except NumericalTrouble:
            return sx.NUMERICAL


def _fractional(values: np.ndarray, bin_idx: np.ndarray, tol: float) -> np.ndarray:
    v = values[bin_idx]
    return np.abs(v - np.round(v)) > tol


def _snap(values: np.ndarray, bin_idx: np.ndarray) -> np.ndarray:
    out = values.copy()
    out[bin_idx] = np.round(out[bin_idx])
    return out


def solve_milp(problem: MilpProblem, options: SolverOptions | None = None,
               warm_basis: tuple | None = None) -> MilpSolution:
    """Best-first branch-and-bound over the problem's binary variables."""
    opts = options or SolverOptions()
    bin_idx = problem.binary_indices()
    spx = _make_simplex(problem, opts)

    try:
        if warm_basis is not None:
            try:
                spx.load_basis(*warm_basis)
                status = spx.reoptimize()
            except NumericalTrouble:
                status = spx.cold_start()
        else:
            status = spx.cold_start()
    except NumericalTrouble as exc:
        return MilpSolution(NUMERICAL, message=str(exc), iterations=spx.iterations)

    if status != sx.OPTIMAL:
        return _lp_solution(spx, status)
    root_basis = spx.snapshot_basis()
    root_obj = spx.objective()
    root_vals = spx._full_values()

    if bin_idx.size == 0 or not _fractional(root_vals, bin_idx, opts.integrality_tol).any():
        sol = _lp_solution(spx, status)
        sol.basis = root_basis
        return sol

    tree = _Tree(spx, bin_idx)
    bin_prio = np.array([problem.variables[int(j)].priority for j in bin_idx],
                        dtype=np.int64)
    incumbent = None
    incumbent_obj = np.inf
    nodes_done = 0

    def gap_abs():
        return opts.gap_tol * max(1.0, abs(incumbent_obj))

    def try_incumbent(obj, full_vals):
        nonlocal incumbent, incumbent_obj
        if obj < incumbent_obj - 1e-12:
            incumbent_obj = obj
            incumbent = _snap(full_vals, bin_idx)

    def branch_var(full_vals) -> int:
        v = full_vals[bin_idx]
        frac = np.minimum(v - np.floor(v), np.ceil(v) - v)
        eligible = frac > opts.integrality_tol
        top = bin_prio == bin_prio[eligible].max()
        frac = np.where(eligible & top, frac, -1.0)
        return int(bin_idx[int(np.argmax(frac))])

    # diving pass for an early incumbent: round fractional binaries in
    # batches (most fractional first, ties round up so sum-to-one groups
    # settle in one step), retreating to single fixes on infeasibility
    dive_fix: dict[int, int] = {}
    vals = root_vals
    for _ in range(bin_idx.size):
        fracs = _fractional(vals, bin_idx, opts.integrality_tol)
        if not fracs.any():
            try_incumbent(spx.objective(), vals)
            break
        # only dive on the highest-priority fractional group so structural
        # binaries get fixed before the dependent encoding binaries
        top = bin_prio == bin_prio[fracs].max()
        frac_bins = bin_idx[fracs & top]
        v = vals[frac_bins]
        dist = np.minimum(v - np.floor(v), np.ceil(v) - v)
        order = np.argsort(-dist, kind="stable")
        batch = frac_bins[order[:16]]
        trial = dict(dive_fix)
        for j in batch:
            trial[int(j)] = 1 if vals[j] >= 0.5 else 0
        tree.apply(trial)
        if tree.solve_node() == sx.OPTIMAL:
            dive_fix = trial
        else:
            j = int(batch[0])
            v0 = 1 if vals[j] >= 0.5 else 0
            trial = dict(dive_fix)
            trial[j] = v0
            tree.apply(trial)
            if tree.solve_node() != sx.OPTIMAL:
                trial[j] = 1 - v0
                tree.apply(trial)
                if tree.solve_node() != sx.OPTIMAL:
                    break
            dive_fix = trial
        vals = spx._full_values()

    heap: list[tuple[float, int, dict[int, int]]] = []
    tick = 0
    heapq.heappush(heap, (root_obj, tick, {}))
    status_out = OPTIMAL
    exit_lower = None

    while heap:
        if nodes_done >= opts.node_limit:
            status_out = GAP_LIMIT
            break
        bound, _, fixings = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent_obj - gap_abs():
            exit_lower = bound
            heap = []
            break
        tree.apply(fixings)
        st = tree.solve_node()
        nodes_done += 1
        if st == sx.INFEASIBLE:
            continue
        if st == sx.NUMERICAL:
            status_out = NUMERICAL
            break
        if st == sx.UNBOUNDED:
            return MilpSolution(UNBOUNDED, nodes=nodes_done, iterations=spx.iterations)
        obj = spx.objective()
        if incumbent is not None and obj >= incumbent_obj - gap_abs():
            continue
        full_vals = spx._full_values()
        fracs = _fractional(full_vals, bin_idx, opts.integrality_tol)
        if not fracs.any():
            try_incumbent(obj, full_vals)
            continue
        j = branch_var(full_vals)
        for v in (0, 1):
            child = dict(fixings)
            child[j] = v
            tick += 1
            heapq.heappush(heap, (obj, tick, child))

    if incumbent is None:
        if status_out == NUMERICAL:
            return MilpSolution(NUMERICAL, nodes=nodes_done, iterations=spx.iterations,
                                message="numerical trouble before any incumbent")
        if status_out == GAP_LIMIT:
            return MilpSolution(GAP_LIMIT, nodes=nodes_done, iterations=spx.iterations,
                                message="node limit hit with no incumbent")
        return MilpSolution(INFEASIBLE, nodes=nodes_done, iterations=spx.iterations)

    lower = min((entry[0] for entry in heap), default=np.inf)
    if exit_lower is not None:
        lower = min(lower, exit_lower)
    lower = min(lower, incumbent_obj)
    gap = max(0.0, (incumbent_obj - lower) / max(1.0, abs(incumbent_obj)))
    if status_out == OPTIMAL and gap > opts.gap_tol:
        status_out = GAP_LIMIT
    elif status_out == GAP_LIMIT and gap <= opts.gap_tol:
        status_out = OPTIMAL
    return MilpSolution(status_out, incumbent[: problem.num_vars],
                        float(incumbent_obj), gap=gap, nodes=nodes_done,
                        iterations=spx.iterations, basis=root_basis)
