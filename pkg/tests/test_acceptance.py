"""End-to-end acceptance gate.

One test per criterion; each ends with a single printed pass/fail line
(visible with `pytest -s`, and mirrored by the test verdict itself).
Tolerances are pinned as module constants next to the criteria that use
them.
"""

import itertools
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from microgrid_mpc import battery as bat
from microgrid_mpc import engine as eng
from microgrid_mpc import scenario as sc
from microgrid_mpc.battery import BatteryMode, BatteryParams
from microgrid_mpc.engine import (
    EngineConfig,
    Weights,
    build_horizon_problem,
    imbalance_penalty,
)
from microgrid_mpc.milp import (
    BINARY,
    MilpProblem,
    SolverOptions,
    encode_piecewise,
    solve_milp,
)

TOL_MILP_ORACLE = 1e-6         # objective agreement vs enumeration
TOL_PIECEWISE = 1e-6           # encoded BLC vs direct interpolation
TOL_TOY_HORIZON = 1e-3         # engine objective vs brute-force oracle
TOL_SOC_BOUNDS = 1e-9          # SOC band slack
TOL_RI_RECOVERY = 0.02         # expected-RI recovery vs pre-event level
TOL_COMM_LOSS_RI = 0.01        # aggregate RI shift from comm loss
RUNTIME_BUDGET_S = 60.0        # full 72-decision simulation
ORACLE_BUDGET_S = 10.0         # each randomized oracle batch

EXACT = SolverOptions(gap_tol=1e-9, node_limit=500_000)

M = BatteryMode


def _report(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" — {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared full simulation runs (expensive; computed once per session)

@pytest.fixture(scope="module")
def full_run():
    series = sc.bundled_scenario()
    t0 = time.perf_counter()
    result = eng.run(series, EngineConfig())
    elapsed = time.perf_counter() - t0
    return series, result, elapsed


@pytest.fixture(scope="module")
def full_run_repeat():
    return eng.run(sc.bundled_scenario(), EngineConfig())


@pytest.fixture(scope="module")
def no_comm_run():
    series = sc.bundled_scenario().without_comm_loss()
    return eng.run(series, EngineConfig())


# ---------------------------------------------------------------------------
# criterion 1: MILP oracle equivalence

def _random_milp(seed):
    rng = np.random.default_rng(seed)
    pure_binary = seed % 5 == 4
    nb = int(rng.integers(9, 13)) if pure_binary else int(rng.integers(2, 9))
    nc = 0 if pure_binary else int(rng.integers(1, 7))
    m = int(rng.integers(1, 11))
    c_lo = rng.uniform(-2, 0, nc)
    c_hi = c_lo + rng.uniform(0.5, 4, nc)
    rows = []
    for _ in range(m):
        coeffs = np.round(rng.uniform(-3, 3, nb + nc), 3)
        sense = str(rng.choice(["<=", ">=", "="], p=[0.7, 0.2, 0.1]))
        rhs = float(np.round(rng.uniform(-1, 4), 3))
        rows.append((coeffs, sense, rhs))
    obj = np.round(rng.uniform(-3, 3, nb + nc), 3)
    return nb, nc, list(zip(c_lo, c_hi)), rows, obj


def _enumeration_oracle(nb, nc, cbounds, rows, obj):
    best = np.inf
    for bits in itertools.product((0.0, 1.0), repeat=nb):
        bits = np.array(bits)
        if nc == 0:
            ok = True
            for coeffs, sense, rhs in rows:
                lhs = float(coeffs[:nb] @ bits)
                if sense == "<=" and lhs > rhs + 1e-9:
                    ok = False
                elif sense == ">=" and lhs < rhs - 1e-9:
                    ok = False
                elif sense == "=" and abs(lhs - rhs) > 1e-9:
                    ok = False
                if not ok:
                    break
            if ok:
                best = min(best, float(obj[:nb] @ bits))
            continue
        a_ub, b_ub, a_eq, b_eq = [], [], [], []
        for coeffs, sense, rhs in rows:
            resid = rhs - float(coeffs[:nb] @ bits)
            cont = coeffs[nb:]
            if sense == "<=":
                a_ub.append(cont); b_ub.append(resid)
            elif sense == ">=":
                a_ub.append(-cont); b_ub.append(-resid)
            else:
                a_eq.append(cont); b_eq.append(resid)
        res = linprog(obj[nb:], A_ub=a_ub or None, b_ub=b_ub or None,
                      A_eq=a_eq or None, b_eq=b_eq or None,
                      bounds=cbounds, method="highs")
        if res.status == 0:
            best = min(best, float(obj[:nb] @ bits) + float(res.fun))
    return best


def test_criterion_milp_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        nb, nc, cbounds, rows, obj = _random_milp(seed)
        p = MilpProblem()
        for _ in range(nb):
            p.add_var(0, 1, BINARY)
        for lb, ub in cbounds:
            p.add_var(lb, ub)
        for coeffs, sense, rhs in rows:
            p.add_constraint(list(enumerate(coeffs)), sense, rhs)
        p.set_objective(list(enumerate(obj)))
        sol = solve_milp(p)
        oracle = _enumeration_oracle(nb, nc, cbounds, rows, obj)
        if np.isinf(oracle):
            assert sol.status == "infeasible", f"seed {seed}: oracle infeasible, got {sol.status}"
        else:
            assert sol.status == "optimal", f"seed {seed}: {sol.status}"
            worst = max(worst, abs(sol.objective - oracle))
    elapsed = time.perf_counter() - t0
    ok = worst <= TOL_MILP_ORACLE and elapsed < ORACLE_BUDGET_S
    _report("milp-oracle-equivalence", ok,
            f"max |Δobj| {worst:.2e} over 50 problems in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion 2: piecewise encoding exactness

def test_criterion_piecewise_exactness():
    curve = bat.DEFAULT_BLC_CURVE
    max_cycles = max(y for _, y in curve.breakpoints)
    norm = curve.scaled(1.0 / max_cycles)
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for dod in rng.uniform(norm.x_first, norm.x_last, 100):
        p = MilpProblem()
        x = p.add_var(float(dod), float(dod))
        y = encode_piecewise(p, x, norm, big_m=100.0)
        p.set_objective([(y, 1.0)])
        sol = solve_milp(p)
        assert sol.status == "optimal"
        expect = bat.blc_eval(curve, float(dod)) / max_cycles
        worst = max(worst, abs(sol.values[y] - expect))
    elapsed = time.perf_counter() - t0
    ok = worst <= TOL_PIECEWISE and elapsed < ORACLE_BUDGET_S
    _report("piecewise-encoding-exactness", ok,
            f"max |y - curve(x)| {worst:.2e} over 100 points in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion 3: toy-horizon optimality vs brute force

def _toy_instance(seed):
    # imbalances stay within +-0.5 kW of parity so the battery's SOC and
    # power bounds never bind and optimal powers sit on the 0.01 kW grid
    rng = np.random.default_rng(1000 + seed)
    ess = np.round(rng.uniform(1.0, 2.0, 2), 2)
    reg = np.round(rng.uniform(1.0, 2.0, 2), 2)
    gen = np.round(ess + reg + rng.uniform(-0.5, 0.5, 2), 2)
    gen = np.maximum(gen, 0.0)
    return gen, ess, reg


def _toy_bruteforce(gen, ess, reg, weights, params, curve):
    grid = np.round(np.arange(0.0, 1.0 + 1e-9, 0.01), 2)
    cap, segs = 12.0, 4
    max_cycles = max(y for _, y in curve.breakpoints)
    xs = np.array([x for x, _ in curve.breakpoints])
    ys = np.array([y for _, y in curve.breakpoints]) / max_cycles
    wl = [weights.w_essential * ess[k] + weights.w_regular * reg[k] for k in range(2)]

    cuts = eng.penalty_cuts(cap, segs)

    def hour_cost(k, prev_mode, mode, p):
        # p: signed power (+charge, -discharge), vectorized
        sw = bat.switching_cost(prev_mode, mode, params)
        z = ess[k] + reg[k] - gen[k] + p
        deficit = np.maximum(z, 0.0)
        reg_shed = np.minimum(deficit, reg[k])
        ess_shed = np.minimum(deficit - reg_shed, ess[k])
        mag = np.abs(z)
        pen = np.zeros_like(mag)
        for slope, off in cuts:
            pen = np.maximum(pen, slope * mag - off)
        shed_cost = weights.w_r * (weights.w_essential * ess_shed
                                   + weights.w_regular * reg_shed) / wl[k]
        return weights.w_bat * sw + weights.w_t * pen + shed_cost

    best = np.inf
    modes = (M.CH, M.DIS, M.IDLE)
    for m0 in modes:
        p0 = grid if m0 == M.CH else (-grid if m0 == M.DIS else np.zeros(1))
        soc1 = 0.5 + np.where(p0 >= 0, params.eta_ch * p0,
                              p0 / params.eta_dis) / params.e_max
        valid0 = (soc1 >= params.soc_min - 1e-12) & (soc1 <= params.soc_max + 1e-12)
        if not valid0.any():
            continue
        c0 = hour_cost(0, M.IDLE, m0, p0)
        blc0 = -weights.w_blc * params.c_bat * np.interp(1.0 - soc1, xs, ys)
        c0 = c0 + blc0
        for m1 in modes:
            p1 = grid if m1 == M.CH else (-grid if m1 == M.DIS else np.zeros(1))
            soc2 = soc1[:, None] + np.where(p1 >= 0, params.eta_ch * p1,
                                            p1 / params.eta_dis)[None, :] / params.e_max
            valid = (valid0[:, None]
                     & (soc2 >= params.soc_min - 1e-12)
                     & (soc2 <= params.soc_max + 1e-12))
            if not valid.any():
                continue
            c1 = hour_cost(1, m0, m1, p1)
            blc1 = -weights.w_blc * params.c_bat * np.interp(1.0 - soc2, xs, ys)
            total = c0[:, None] + c1[None, :] + blc1
            best = min(best, float(total[valid].min()))
    return best


def test_criterion_toy_horizon_optimality():
    weights, params, curve = Weights(), BatteryParams(), bat.DEFAULT_BLC_CURVE
    worst = 0.0
    for seed in range(20):
        gen, ess, reg = _toy_instance(seed)
        win = sc.ScenarioWindow(start=0, length=2, wind=gen, solar=np.zeros(2),
                                essential_load=ess, regular_load=reg,
                                load_known=np.ones(2, dtype=bool))
        hp = build_horizon_problem(win, 0.5, M.IDLE, weights, params, curve)
        sol = solve_milp(hp.problem, EXACT)
        assert sol.status == "optimal", f"seed {seed}: {sol.status}"
        oracle = _toy_bruteforce(gen, ess, reg, weights, params, curve)
        worst = max(worst, abs(sol.objective - oracle))
    ok = worst <= TOL_TOY_HORIZON
    _report("toy-horizon-optimality", ok,
            f"max |Δobj| {worst:.2e} over 20 instances")


# ---------------------------------------------------------------------------
# criterion 4: full-run invariants + runtime

def test_criterion_full_run_invariants(full_run):
    series, result, elapsed = full_run
    params = BatteryParams()
    issues = []
    for r in result.records:
        if not (params.soc_min - TOL_SOC_BOUNDS <= r.soc_after
                <= params.soc_max + TOL_SOC_BOUNDS):
            issues.append(f"hour {r.hour}: soc {r.soc_after}")
        if r.mode not in (M.CH, M.DIS, M.IDLE):
            issues.append(f"hour {r.hour}: mode {r.mode}")
        if r.mode != M.CH and r.p_ch != 0.0 or r.mode != M.DIS and r.p_dis != 0.0:
            issues.append(f"hour {r.hour}: power inconsistent with mode")
        if r.essential_shed > r.essential_load + 1e-9:
            issues.append(f"hour {r.hour}: essential shed > load")
        if r.regular_shed > r.regular_load + 1e-9:
            issues.append(f"hour {r.hour}: regular shed > load")
    if result.hours != 72:
        issues.append(f"expected 72 decisions, got {result.hours}")
    if result.total_loss_kwh != result.essential_loss_kwh + result.regular_loss_kwh:
        issues.append("total_loss != essential + regular")
    if not 0.0 <= result.resilience_index <= 1.0:
        issues.append(f"RI {result.resilience_index} outside [0, 1]")
    if elapsed >= RUNTIME_BUDGET_S:
        issues.append(f"runtime {elapsed:.1f}s >= {RUNTIME_BUDGET_S}s")
    _report("full-run-invariants", not issues,
            "; ".join(issues) or f"72 decisions in {elapsed:.1f}s, "
                                 f"RI {result.resilience_index:.3f}")


# ---------------------------------------------------------------------------
# criterion 5: pre-event charging

def test_criterion_pre_event_charging(full_run):
    _, result, _ = full_run
    soc26 = next(r.soc_after for r in result.records if r.hour == 26)
    ok = soc26 >= 0.85
    _report("pre-event-charging", ok, f"SOC at hour 26 = {soc26:.3f}")


# ---------------------------------------------------------------------------
# criterion 6: expected-RI trough and recovery

def test_criterion_expected_ri_trough(full_run):
    _, result, _ = full_run
    ri = result.expected_ri_curve
    trough = int(np.argmin(ri))
    # pre-event level: decisions 0..3, whose lookahead windows end at or
    # before hour 27 and therefore see none of the event
    pre_level = float(np.mean(ri[:4]))
    recovery_gap = abs(pre_level - float(ri[50]))
    ok = 27 <= trough <= 39 and recovery_gap <= TOL_RI_RECOVERY
    _report("expected-ri-trough", ok,
            f"trough at decision {trough} ({ri[trough]:.4f}), "
            f"recovery gap {recovery_gap:.4f} at hour 50")


# ---------------------------------------------------------------------------
# criterion 7: load-priority ordering

def _single_hour_shed(weights):
    params = BatteryParams()
    win = sc.ScenarioWindow(start=0, length=1, wind=np.array([1.0]),
                            solar=np.zeros(1), essential_load=np.array([2.0]),
                            regular_load=np.array([2.0]),
                            load_known=np.ones(1, dtype=bool))
    # battery pinned at its floor: the 3 kW deficit cannot be served
    hp = build_horizon_problem(win, params.soc_min, M.IDLE, weights, params,
                               bat.DEFAULT_BLC_CURVE)
    sol = solve_milp(hp.problem, EXACT)
    assert sol.status == "optimal"
    return (float(sol.values[hp.vars.ess_shed[0]]),
            float(sol.values[hp.vars.reg_shed[0]]))


def test_criterion_priority_property():
    ess_shed, reg_shed = _single_hour_shed(Weights())
    swapped = Weights()
    object.__setattr__(swapped, "w_essential", 0.1)  # bypass the type guard to
    object.__setattr__(swapped, "w_regular", 0.9)    # probe the argmin property
    ess_swap, reg_swap = _single_hour_shed(swapped)
    ok = ess_shed <= reg_shed + 1e-9 and reg_swap <= ess_swap + 1e-9
    _report("load-priority-ordering", ok,
            f"default (ess {ess_shed:.2f} <= reg {reg_shed:.2f}), "
            f"swapped (reg {reg_swap:.2f} <= ess {ess_swap:.2f})")


# ---------------------------------------------------------------------------
# criterion 8: comm-loss robustness

def test_criterion_comm_loss_robustness(full_run, no_comm_run):
    _, with_comm, _ = full_run
    delta = abs(with_comm.resilience_index - no_comm_run.resilience_index)
    rmse = with_comm.rmse
    if rmse is None:
        _report("comm-loss-robustness", False, "no forecast errors recorded")
    ok = delta <= TOL_COMM_LOSS_RI and rmse["essential"] < rmse["regular"]
    _report("comm-loss-robustness", ok,
            f"|ΔRI| {delta:.4f}, RMSE essential {rmse['essential']:.4f} "
            f"< regular {rmse['regular']:.4f}")


# ---------------------------------------------------------------------------
# criterion 9: window locality and determinism

def _record_key(r):
    return (r.hour, r.mode, r.p_ch, r.p_dis, r.soc_after, r.essential_shed,
            r.regular_shed, r.surplus, r.horizon_objective, r.expected_ri)


def test_criterion_locality_and_determinism(full_run, full_run_repeat):
    series, result, _ = full_run
    # truncating all data beyond hour t + 24 must leave decisions <= t intact
    t = 5
    truncated = series.truncated(t + 1 + 24)
    config = EngineConfig(simulation_hours=t + 1)
    short = eng.run(truncated, config)
    locality = all(_record_key(a) == _record_key(b)
                   for a, b in zip(result.records[:t + 1], short.records))
    deterministic = (
        all(_record_key(a) == _record_key(b)
            for a, b in zip(result.records, full_run_repeat.records))
        and np.array_equal(result.expected_ri_curve,
                           full_run_repeat.expected_ri_curve)
        and result.summary() == full_run_repeat.summary())
    ok = locality and deterministic
    _report("window-locality-and-determinism", ok,
            f"locality through hour {t}: {locality}, repeat-run identical: "
            f"{deterministic}")
