"""Two-phase bounded-variable revised simplex with dense basis inverse.

The LP is held in equality computational form A x = b with per-variable
bounds: structural columns first, then one slack per inequality row, then
one artificial per row (used only by phase 1 cold starts, fixed to zero
afterwards). The basis inverse is kept dense and updated by rank-1 pivots
with periodic refactorization; warm starts re-use a previous basis and
repair primal feasibility with dual simplex steps. Phase 1 minimizes the
sum of artificial values from an all-artificial starting basis.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.linalg.blas import dger

from .problem import MilpProblem

AT_LOWER = 0
AT_UPPER = 1
BASIC = 2

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERLIMIT = "iterlimit"
NUMERICAL = "numerical"


class NumericalTrouble(RuntimeError):
    """Basis became singular or pivots degenerated beyond repair."""


class StandardForm:
    """Equality-form data (CSC arrays) built from a MilpProblem."""

    def __init__(self, prob: MilpProblem):
        n = prob.num_vars
        m = prob.num_constraints
        ineq_rows = [i for i, con in enumerate(prob.constraints) if con.sense != "="]
        n_slack = len(ineq_rows)
        ncols = n + n_slack + m

        lb = np.empty(ncols)
        ub = np.empty(ncols)
        for j, var in enumerate(prob.variables):
            lb[j] = var.lb
            ub[j] = var.ub

        cols: list[list[tuple[int, float]]] = [[] for _ in range(ncols)]
        b = np.empty(m)
        slack_j = n
        self.slack_of_row = np.full(m, -1, dtype=np.int64)
        for i, con in enumerate(prob.constraints):
            b[i] = con.rhs
            for idx, val in con.coeffs:
                cols[idx].append((i, val))
            if con.sense == "<=":
                cols[slack_j].append((i, 1.0))
                lb[slack_j], ub[slack_j] = 0.0, np.inf
                self.slack_of_row[i] = slack_j
                slack_j += 1
            elif con.sense == ">=":
                cols[slack_j].append((i, 1.0))
                lb[slack_j], ub[slack_j] = -np.inf, 0.0
                self.slack_of_row[i] = slack_j
                slack_j += 1
        art0 = n + n_slack
        for i in range(m):
            cols[art0 + i].append((i, 1.0))
            lb[art0 + i], ub[art0 + i] = 0.0, 0.0

        counts = np.array([len(cl) for cl in cols], dtype=np.int64)
        self.indptr = np.concatenate(([0], np.cumsum(counts)))
        nnz = int(self.indptr[-1])
        self.rows = np.empty(nnz, dtype=np.int64)
        self.vals = np.empty(nnz)
        pos = 0
        for cl in cols:
            for r, v in cl:
                self.rows[pos] = r
                self.vals[pos] = v
                pos += 1
        self.col_of = np.repeat(np.arange(ncols), counts)
        self.art_data_pos = np.array([self.indptr[art0 + i] for i in range(m)], dtype=np.int64)

        self.m = m
        self.n_struct = n
        self.n_slack = n_slack
        self.ncols = ncols
        self.art0 = art0
        self.b = b
        self.lb = lb
        self.ub = ub
        c = np.zeros(ncols)
        for idx, val in prob.objective.items():
            c[idx] = val
        self.c = c
        self.obj_const = prob.objective_constant

    def col(self, j: int):
        s, e = self.indptr[j], self.indptr[j + 1]
        return self.rows[s:e], self.vals[s:e]


class BoundedSimplex:
    def __init__(self, sf: StandardForm, feas_tol: float = 1e-9, opt_tol: float = 1e-9,
                 refactor_every: int = 400):
        self.sf = sf
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = 1e-9
        self.refactor_every = refactor_every
        m, ncols = sf.m, sf.ncols
        self.lb = sf.lb.copy()
        self.ub = sf.ub.copy()
        self.b = sf.b.copy()
        self.c = sf.c.copy()
        self.basis = np.arange(sf.art0, sf.art0 + m, dtype=np.int64)
        self.vstat = np.full(ncols, AT_LOWER, dtype=np.int8)
        self.vstat[np.isinf(self.lb)] = AT_UPPER
        self.Binv = np.asfortranarray(np.eye(m))
        self.xB = np.zeros(m)
        self._pivots_since_refactor = 0
        self.iterations = 0

    # -- linear algebra helpers ------------------------------------------------

    def _col_dots(self, vec: np.ndarray) -> np.ndarray:
        """a_j . vec for every column j."""
        sf = self.sf
        contrib = sf.vals * vec[sf.rows]
        out = np.zeros(sf.ncols)
        counts = np.diff(sf.indptr)
        nz = counts > 0
        starts = sf.indptr[:-1][nz]
        if starts.size:
            out[nz] = np.add.reduceat(contrib, starts)
        return out

    def _matvec(self, x: np.ndarray) -> np.ndarray:
        sf = self.sf
        contrib = sf.vals * x[sf.col_of]
        return np.bincount(sf.rows, weights=contrib, minlength=sf.m)

    def _nb_values(self) -> np.ndarray:
        lo = np.where(np.isfinite(self.lb), self.lb, 0.0)
        hi = np.where(np.isfinite(self.ub), self.ub, 0.0)
        vals = np.where(self.vstat == AT_UPPER, hi, lo)
        vals[self.vstat == BASIC] = 0.0
        return vals

    def refresh_xB(self) -> None:
        rhs = self.b - self._matvec(self._nb_values())
        self.xB = self.Binv @ rhs

    def refactor(self) -> None:
        sf = self.sf
        m = sf.m
        B = np.zeros((m, m))
        for k, j in enumerate(self.basis):
            r, v = sf.col(j)
            B[r, k] = v
        try:
            self.Binv = np.asfortranarray(scipy.linalg.inv(B, check_finite=False))
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise NumericalTrouble("singular basis") from exc
        cond_probe = np.abs(self.Binv).max()
        if not np.isfinite(cond_probe) or cond_probe > 1e14:
            raise NumericalTrouble("ill-conditioned basis")
        self._pivots_since_refactor = 0
        self.refresh_xB()

    def load_basis(self, basis: np.ndarray, vstat: np.ndarray) -> None:
        self.basis = np.asarray(basis, dtype=np.int64).copy()
        self.vstat = np.asarray(vstat, dtype=np.int8).copy()
        self.refactor()

    def reduced_costs(self) -> np.ndarray:
        y = self.Binv.T @ self.c[self.basis]
        d = self.c - self._col_dots(y)
        d[self.basis] = 0.0
        return d

    def _ftran(self, j: int) -> np.ndarray:
        r, v = self.sf.col(j)
        return self.Binv[:, r] @ v

    def _pivot_update(self, r: int, alpha: np.ndarray) -> None:
        piv = alpha[r]
        self.Binv[r] /= piv
        mask = alpha.copy()
        mask[r] = 0.0
        # in-place BLAS rank-1 update; Binv is kept Fortran-ordered for this
        row = np.ascontiguousarray(self.Binv[r])
        self.Binv = dger(-1.0, mask, row, a=self.Binv, overwrite_a=1)
        self._pivots_since_refactor += 1
        if self._pivots_since_refactor >= self.refactor_every:
            self.refactor()

    # -- primal simplex --------------------------------------------------------

    def primal(self, max_iter: int = 50000) -> str:
        degen_streak = 0
        bland = False
        for _ in range(max_iter):
            self.iterations += 1
            d = self.reduced_costs()
            movable = (self.ub - self.lb) > self.feas_tol
            elig_lo = (self.vstat == AT_LOWER) & movable & (d < -self.opt_tol)
            elig_up = (self.vstat == AT_UPPER) & movable & (d > self.opt_tol)
            elig = elig_lo | elig_up
            if not elig.any():
                return OPTIMAL
            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                score = np.where(elig, np.abs(d), 0.0)
                q = int(np.argmax(score))
            dirn = 1.0 if self.vstat[q] == AT_LOWER else -1.0
            alpha = self._ftran(q)
            denom = dirn * alpha
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            inf = np.inf
            with np.errstate(divide="ignore", invalid="ignore"):
                t_low = np.where(denom > self.pivot_tol, (self.xB - lbB) / denom, inf)
                t_up = np.where(denom < -self.pivot_tol, (self.xB - ubB) / denom, inf)
            t_low = np.where(np.isfinite(lbB), t_low, inf)
            t_up = np.where(np.isfinite(ubB), t_up, inf)
            t_basic = np.minimum(t_low, t_up)
            t_basic = np.maximum(t_basic, 0.0)
            rng = self.ub[q] - self.lb[q]
            t_flip = rng if np.isfinite(rng) else inf
            t_min_basic = t_basic.min() if self.sf.m else inf
            theta = min(t_min_basic, t_flip)
            if not np.isfinite(theta):
                return UNBOUNDED
            if t_flip <= t_min_basic + 1e-12 and np.isfinite(t_flip):
                # bound flip, no basis change
                self.xB -= t_flip * dirn * alpha
                self.vstat[q] = AT_UPPER if self.vstat[q] == AT_LOWER else AT_LOWER
                degen_streak = 0
                continue
            ties = np.flatnonzero(t_basic <= t_min_basic + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(denom[ties]))])
            if abs(alpha[r]) < self.pivot_tol:
                raise NumericalTrouble("tiny pivot in primal ratio test")
            leave_at_lower = t_low[r] <= t_up[r]
            x_q_new = (self.lb[q] if dirn > 0 else self.ub[q]) + dirn * theta
            self.xB -= theta * dirn * alpha
            leaving = self.basis[r]
            self.vstat[leaving] = AT_LOWER if leave_at_lower else AT_UPPER
            self.basis[r] = q
            self.vstat[q] = BASIC
            self.xB[r] = x_q_new
            self._pivot_update(r, alpha)
            if theta < 1e-10:
                degen_streak += 1
                if degen_streak > 60:
                    bland = True
            else:
                degen_streak = 0
                bland = False
        return ITERLIMIT

    # -- dual simplex ----------------------------------------------------------

    def dual(self, max_iter: int = 50000) -> str:
        if self.sf.m == 0:
            return OPTIMAL
        for _ in range(max_iter):
            self.iterations += 1
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            viol_lo = np.where(np.isfinite(lbB), lbB - self.xB, -np.inf)
            viol_up = np.where(np.isfinite(ubB), self.xB - ubB, -np.inf)
            viol = np.maximum(viol_lo, viol_up)
            r = int(np.argmax(viol))
            if viol[r] <= self.feas_tol * (1.0 + np.abs(self.xB[r])):
                return OPTIMAL
            below = viol_lo[r] >= viol_up[r]
            w = self.Binv[r]
            rho = self._col_dots(w)
            d = self.reduced_costs()
            movable = (self.ub - self.lb) > self.feas_tol
            nonbasic = self.vstat != BASIC
            if below:
                elig = nonbasic & movable & (
                    ((self.vstat == AT_LOWER) & (rho < -self.pivot_tol))
                    | ((self.vstat == AT_UPPER) & (rho > self.pivot_tol)))
            else:
                elig = nonbasic & movable & (
                    ((self.vstat == AT_LOWER) & (rho > self.pivot_tol))
                    | ((self.vstat == AT_UPPER) & (rho < -self.pivot_tol)))
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                return INFEASIBLE
            ratios = np.abs(d[idx]) / np.abs(rho[idx])
            best = ratios.min()
            cand = idx[ratios <= best + 1e-12]
            q = int(cand[np.argmax(np.abs(rho[cand]))])
            alpha = self._ftran(q)
            if abs(alpha[r]) < self.pivot_tol:
                raise NumericalTrouble("tiny pivot in dual ratio test")
            target = lbB[r] if below else ubB[r]
            delta_q = (self.xB[r] - target) / alpha[r]
            x_q_new = (self.lb[q] if self.vstat[q] == AT_LOWER else self.ub[q]) + delta_q
            self.xB -= delta_q * alpha
            leaving = self.basis[r]
            self.vstat[leaving] = AT_LOWER if below else AT_UPPER
            self.basis[r] = q
            self.vstat[q] = BASIC
            self.xB[r] = x_q_new
            self._pivot_update(r, alpha)
        return ITERLIMIT

    # -- drivers ---------------------------------------------------------------

    def cold_start(self) -> str:
        """Phase 1 from an all-artificial basis, then phase 2 on the true costs."""
        sf = self.sf
        m = sf.m
        # free the artificials and point them at the current residual
        art = np.arange(sf.art0, sf.art0 + m)
        self.lb[art] = 0.0
        self.ub[art] = np.inf
        self.vstat[:] = np.where(np.isinf(self.lb), AT_UPPER, AT_LOWER).astype(np.int8)
        self.vstat[art] = BASIC
        self.basis = art.copy()
        nbv = self._nb_values()
        nbv[art] = 0.0
        resid = self.b - self._matvec(nbv)
        sign = np.where(resid < 0.0, -1.0, 1.0)
        sf.vals[sf.art_data_pos] = sign
        self.Binv = np.asfortranarray(np.diag(sign))
        self.xB = np.abs(resid)
        self._pivots_since_refactor = 0

        true_c = self.c.copy()
        self.c = np.zeros(sf.ncols)
        self.c[art] = 1.0
        status = self.primal()
        if status != OPTIMAL:
            self.c = true_c
            if status == UNBOUNDED:
                raise NumericalTrouble("phase 1 unbounded")
            return status
        scale = 1.0 + np.abs(self.b).max(initial=0.0)
        infeas = float(self.c @ self._full_values())
        self.c = true_c
        if infeas > 1e-7 * scale:
            return INFEASIBLE
        self.lb[art] = 0.0
        self.ub[art] = 0.0
        basic_art = np.isin(self.basis, art)
        if basic_art.any():
            # tolerate degenerate artificials pinned at zero in the basis
            self.xB[basic_art & (np.abs(self.xB) < 1e-7)] = 0.0
        status = self.primal()
        if status == OPTIMAL:
            status = self.dual()  # clean any residual bound violations
            if status == OPTIMAL:
                status = self.primal()
        return status

    def reoptimize(self) -> str:
        """Dual steps to repair primal feasibility, then primal to optimality."""
        status = self.dual()
        if status != OPTIMAL:
            return status
        status = self.primal()
        if status == OPTIMAL and not self.primal_feasible():
            status = self.dual()
            if status == OPTIMAL:
                status = self.primal()
        return status

    # -- accessors -------------------------------------------------------------

    def _full_values(self) -> np.ndarray:
        vals = self._nb_values()
        vals[self.basis] = self.xB
        return vals

    def solution_values(self) -> np.ndarray:
        return self._full_values()[: self.sf.n_struct]

    def objective(self) -> float:
        return float(self.c @ self._full_values()) + self.sf.obj_const

    def primal_feasible(self) -> bool:
        lbB = self.lb[self.basis]
        ubB = self.ub[self.basis]
        lo_ok = np.where(np.isfinite(lbB), self.xB - lbB, 0.0) >= -1e-7 * (1 + np.abs(self.xB))
        up_ok = np.where(np.isfinite(ubB), ubB - self.xB, 0.0) >= -1e-7 * (1 + np.abs(self.xB))
        return bool(lo_ok.all() and up_ok.all())

    def snapshot_basis(self):
        return self.basis.copy(), self.vstat.copy()
