"""Sparse mixed-integer linear program container and piecewise-linear encoding.

Problems are always stated as minimization. Constraint rows are kept sparse
as (variable index, coefficient) pairs; variables carry explicit finite
bounds so that big-M style indicator constraints stay well scaled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"

_SENSES = ("<=", "=", ">=")


class MilpError(ValueError):
    """Raised on malformed problems or encoding preconditions."""


@dataclass
class Variable:
    lb: float
    ub: float
    kind: str = CONTINUOUS
    name: str = ""
    priority: int = 0  # higher = branched/dived on first


@dataclass
class Constraint:
    coeffs: list[tuple[int, float]]
    sense: str
    rhs: float
    name: str = ""


@dataclass(frozen=True)
class PiecewiseCurve:
    """Continuous piecewise-linear function given by ordered breakpoints."""

    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.breakpoints) < 2:
            raise MilpError("piecewise curve needs at least 2 breakpoints")
        xs = [x for x, _ in self.breakpoints]
        for a, b in zip(xs, xs[1:]):
            if not b > a:
                raise MilpError("piecewise breakpoint x values must be strictly increasing")

    @property
    def x_first(self) -> float:
        return self.breakpoints[0][0]

    @property
    def x_last(self) -> float:
        return self.breakpoints[-1][0]

    @property
    def num_segments(self) -> int:
        return len(self.breakpoints) - 1

    def scaled(self, factor: float) -> "PiecewiseCurve":
        return PiecewiseCurve(tuple((x, y * factor) for x, y in self.breakpoints))


class MilpProblem:
    """Builder for a sparse MILP (minimization)."""

    def __init__(self):
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant: float = 0.0

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, lb: float, ub: float, kind: str = CONTINUOUS, name: str = "",
                priority: int = 0) -> int:
        if kind not in (CONTINUOUS, BINARY):
            raise MilpError(f"unknown variable kind {kind!r}")
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise MilpError(f"variable {name!r} must have finite bounds, got [{lb}, {ub}]")
        if lb > ub + 1e-12:
            raise MilpError(f"variable {name!r} has empty bound range [{lb}, {ub}]")
        if kind == BINARY and (lb < -1e-12 or ub > 1 + 1e-12):
            raise MilpError(f"binary variable {name!r} needs bounds within [0, 1]")
        self.variables.append(Variable(float(lb), float(ub), kind, name, int(priority)))
        return len(self.variables) - 1

    def add_constraint(self, coeffs, sense: str, rhs: float, name: str = "") -> int:
        if sense not in _SENSES:
            raise MilpError(f"unknown constraint sense {sense!r}")
        clean = []
        for idx, val in coeffs:
            if not 0 <= idx < len(self.variables):
                raise MilpError(f"constraint {name!r} references undeclared variable {idx}")
            if val != 0.0:
                clean.append((int(idx), float(val)))
        self.constraints.append(Constraint(clean, sense, float(rhs), name))
        return len(self.constraints) - 1

    def set_objective(self, coeffs, constant: float = 0.0) -> None:
        obj: dict[int, float] = {}
        for idx, val in coeffs:
            if not 0 <= idx < len(self.variables):
                raise MilpError(f"objective references undeclared variable {idx}")
            obj[int(idx)] = obj.get(int(idx), 0.0) + float(val)
        self.objective = obj
        self.objective_constant = float(constant)

    def add_objective_term(self, idx: int, val: float) -> None:
        if not 0 <= idx < len(self.variables):
            raise MilpError(f"objective references undeclared variable {idx}")
        self.objective[idx] = self.objective.get(idx, 0.0) + float(val)

    def binary_indices(self) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.kind == BINARY], dtype=np.int64)

    def dump(self, fp) -> None:
        """Write the problem in a plain LP-like text form (debug aid, write-only)."""

        def term(idx, val):
            name = self.variables[idx].name or f"x{idx}"
            return f"{val:+.12g} {name}"

        fp.write("minimize\n")
        obj = " ".join(term(i, v) for i, v in sorted(self.objective.items()))
        fp.write(f"  {obj or '0'} {self.objective_constant:+.12g}\n")
        fp.write("subject to\n")
        for k, con in enumerate(self.constraints):
            lhs = " ".join(term(i, v) for i, v in con.coeffs)
            label = con.name or f"c{k}"
            fp.write(f"  {label}: {lhs or '0'} {con.sense} {con.rhs:.12g}\n")
        fp.write("bounds\n")
        for i, var in enumerate(self.variables):
            name = var.name or f"x{i}"
            fp.write(f"  {var.lb:.12g} <= {name} <= {var.ub:.12g}\n")
        fp.write("binaries\n")
        names = [v.name or f"x{i}" for i, v in enumerate(self.variables) if v.kind == BINARY]
        fp.write("  " + " ".join(names) + "\n")
        fp.write("end\n")


def encode_piecewise(problem: MilpProblem, x_var: int, curve: PiecewiseCurve,
                     big_m: float = 100.0, tag: str = "pw") -> int:
    """Encode y = curve(x) with one binary per segment plus interpolation weights.

    Adds z_b binaries (sum to one), convex-combination weights over the
    breakpoints restricted to the active segment, and big-M activation rows
    pinning x into the chosen segment's interval. In any feasible integral
    solution y equals the exact interpolation of the active segment.

    Returns the index of the new y variable.
    """
    xs = [x for x, _ in curve.breakpoints]
    ys = [y for _, y in curve.breakpoints]
    xv = problem.variables[x_var]
    if xv.lb < xs[0] - 1e-9 or xv.ub > xs[-1] + 1e-9:
        raise MilpError(
            f"x bounds [{xv.lb}, {xv.ub}] outside curve domain [{xs[0]}, {xs[-1]}]")
    width = xs[-1] - xs[0]
    max_abs_y = max(abs(y) for y in ys)
    max_slope = max(abs((y2 - y1) / (x2 - x1))
                    for (x1, y1), (x2, y2) in zip(curve.breakpoints, curve.breakpoints[1:]))
    # The big-M must dominate every activation bound; un-normalized curves
    # (raw cycle counts) are rejected here rather than silently mis-encoded.
    if width > big_m or max_abs_y > big_m or max_slope * width > big_m:
        raise MilpError(
            f"curve scaling incompatible with big-M {big_m}: "
            f"width={width:.6g}, max|y|={max_abs_y:.6g}, max|slope|*width={max_slope * width:.6g}")

    n_bp = len(curve.breakpoints)
    y_var = problem.add_var(min(ys), max(ys), CONTINUOUS, f"{tag}_y")
    lam = [problem.add_var(0.0, 1.0, CONTINUOUS, f"{tag}_lam{i}") for i in range(n_bp)]
    z = [problem.add_var(0.0, 1.0, BINARY, f"{tag}_z{b}") for b in range(curve.num_segments)]

    problem.add_constraint([(l, 1.0) for l in lam], "=", 1.0, f"{tag}_lamsum")
    problem.add_constraint([(l, xs[i]) for i, l in enumerate(lam)] + [(x_var, -1.0)],
                           "=", 0.0, f"{tag}_xlink")
    problem.add_constraint([(l, ys[i]) for i, l in enumerate(lam)] + [(y_var, -1.0)],
                           "=", 0.0, f"{tag}_ylink")
    problem.add_constraint([(zb, 1.0) for zb in z], "=", 1.0, f"{tag}_zsum")
    # A breakpoint weight may only be nonzero when one of its adjacent segments is active.
    for i in range(n_bp):
        adj = [(z[b], -1.0) for b in (i - 1, i) if 0 <= b < curve.num_segments]
        problem.add_constraint([(lam[i], 1.0)] + adj, "<=", 0.0, f"{tag}_adj{i}")
    # Big-M interval activation: segment b active forces x into [xs[b], xs[b+1]].
    for b in range(curve.num_segments):
        problem.add_constraint([(x_var, -1.0), (z[b], big_m)], "<=", big_m - xs[b],
                               f"{tag}_lo{b}")
        problem.add_constraint([(x_var, 1.0), (z[b], big_m)], "<=", big_m + xs[b + 1],
                               f"{tag}_hi{b}")
    return y_var
