import pytest

from microgrid_mpc import battery as bat
from microgrid_mpc.battery import BatteryMode, BatteryParams


PARAMS = BatteryParams()


def test_soc_update_charge():
    # 0.5 + 0.9 * 1 / 4
    assert bat.soc_update(0.5, 1.0, 0.0, PARAMS) == pytest.approx(0.725)


def test_soc_update_discharge():
    # 0.725 - (0.95 / 0.95) / 4
    assert bat.soc_update(0.725, 0.0, 0.95, PARAMS) == pytest.approx(0.475)


def test_soc_update_idle_fixed_point():
    assert bat.soc_update(0.6, 0.0, 0.0, PARAMS) == 0.6


def test_soc_update_round_trip():
    # charging p then discharging eta_ch * eta_dis * p returns soc to start
    p = 1.7
    soc1 = bat.soc_update(0.4, p, 0.0, PARAMS)
    soc2 = bat.soc_update(soc1, 0.0, PARAMS.eta_ch * PARAMS.eta_dis * p, PARAMS)
    assert soc2 == pytest.approx(0.4, abs=1e-12)


def test_soc_update_monotone():
    base = bat.soc_update(0.5, 1.0, 0.0, PARAMS)
    assert bat.soc_update(0.5, 2.0, 0.0, PARAMS) > base
    assert bat.soc_update(0.5, 0.0, 2.0, PARAMS) < bat.soc_update(0.5, 0.0, 1.0, PARAMS)


def test_soc_update_rejects_bad_powers():
    with pytest.raises(bat.BatteryError):
        bat.soc_update(0.5, 1.0, 1.0, PARAMS)
    with pytest.raises(bat.BatteryError):
        bat.soc_update(0.5, -0.1, 0.0, PARAMS)
    with pytest.raises(bat.BatteryError):
        bat.soc_update(0.5, PARAMS.p_max + 1.0, 0.0, PARAMS)


def test_params_validation():
    with pytest.raises(bat.BatteryError):
        BatteryParams(soc_min=0.5, soc_init=0.4)
    with pytest.raises(bat.BatteryError):
        BatteryParams(eta_ch=0.0)
    with pytest.raises(bat.BatteryError):
        BatteryParams(p_max=0.0)


def test_dod_of():
    assert bat.dod_of(1.0) == 0.0
    assert bat.dod_of(0.2) == pytest.approx(0.8)
    assert bat.dod_of(0.55) == pytest.approx(0.45)
    with pytest.raises(bat.BatteryError):
        bat.dod_of(1.5)


def test_blc_eval_breakpoints():
    curve = bat.DEFAULT_BLC_CURVE
    assert bat.blc_eval(curve, 0.2) == 9000.0
    assert bat.blc_eval(curve, 0.9) == 1600.0


def test_blc_eval_midpoint():
    assert bat.blc_eval(bat.DEFAULT_BLC_CURVE, 0.15) == pytest.approx(12000.0)


def test_blc_eval_continuous_and_decreasing():
    curve = bat.DEFAULT_BLC_CURVE
    xs = [x for x, _ in curve.breakpoints]
    prev = None
    for i in range(len(xs) - 1):
        for t in (0.0, 0.25, 0.5, 0.75, 0.999):
            x = xs[i] + t * (xs[i + 1] - xs[i])
            y = bat.blc_eval(curve, x)
            if prev is not None:
                assert y < prev
            prev = y
    # continuity at a shared breakpoint
    eps = 1e-9
    assert bat.blc_eval(curve, 0.3 - eps) == pytest.approx(bat.blc_eval(curve, 0.3 + eps), abs=1e-3)


def test_blc_eval_domain_error():
    with pytest.raises(bat.BatteryError):
        bat.blc_eval(bat.DEFAULT_BLC_CURVE, 0.05)


def test_switching_cost_cases():
    p = PARAMS
    assert bat.switching_cost(BatteryMode.CH, BatteryMode.DIS, p) == pytest.approx(0.055)
    assert bat.switching_cost(BatteryMode.DIS, BatteryMode.CH, p) == pytest.approx(0.055)
    assert bat.switching_cost(BatteryMode.CH, BatteryMode.CH, p) == 0.0
    assert bat.switching_cost(BatteryMode.DIS, BatteryMode.IDLE, p) == pytest.approx(0.0825)
    assert bat.switching_cost(BatteryMode.IDLE, BatteryMode.IDLE, p) == pytest.approx(0.0275)


def test_discharge_episodes_grouping():
    M = BatteryMode
    modes = [M.IDLE, M.DIS, M.DIS, M.CH, M.DIS, M.IDLE]
    socs = [0.5, 0.4, 0.3, 0.5, 0.4, 0.4]
    eps = bat.discharge_episodes(modes, socs, 0.5)
    assert eps == [(1, pytest.approx(0.2)), (4, pytest.approx(0.1))]


def test_estimate_lifespan_one_episode_per_day():
    # one discharge episode per simulated day at depth 0.2 -> 9000 / 365
    M = BatteryMode
    modes, socs = [], []
    soc = 0.7
    for _ in range(2):  # two days
        for h in range(24):
            if h == 0:
                soc -= 0.2
                modes.append(M.DIS)
            elif h == 1:
                soc += 0.2
                modes.append(M.CH)
            else:
                modes.append(M.IDLE)
            socs.append(soc)
    years = bat.estimate_lifespan(modes, socs, 0.7, bat.DEFAULT_BLC_CURVE)
    assert years == pytest.approx(9000.0 / 365.0, rel=1e-12)


def test_estimate_lifespan_linear_in_episode_rate():
    M = BatteryMode
    modes, socs = [], []
    soc = 0.7
    for h in range(24):  # two episodes in one day, same depth
        if h in (0, 12):
            soc -= 0.2
            modes.append(M.DIS)
        elif h in (1, 13):
            soc += 0.2
            modes.append(M.CH)
        else:
            modes.append(M.IDLE)
        socs.append(soc)
    years = bat.estimate_lifespan(modes, socs, 0.7, bat.DEFAULT_BLC_CURVE)
    assert years == pytest.approx(9000.0 / 365.0 / 2.0, rel=1e-12)


def test_estimate_lifespan_no_cycling():
    M = BatteryMode
    assert bat.estimate_lifespan([M.IDLE] * 24, [0.5] * 24, 0.5,
                                 bat.DEFAULT_BLC_CURVE) is None


def test_curve_csv_roundtrip(tmp_path):
    path = tmp_path / "curve.csv"
    path.write_text("dod,cycles\n" + "\n".join(
        f"{x},{y}" for x, y in bat.DEFAULT_BLC_CURVE.breakpoints) + "\n")
    curve = bat.load_blc_curve(path)
    assert curve.breakpoints == bat.DEFAULT_BLC_CURVE.breakpoints


def test_curve_csv_validation(tmp_path):
    path = tmp_path / "curve.csv"
    path.write_text("dod,cycles\n0.1,100\n0.2,200\n")  # increasing cycles
    with pytest.raises(bat.BatteryError, match="decreasing"):
        bat.load_blc_curve(path)
    path.write_text("bad,header\n0.1,100\n")
    with pytest.raises(bat.BatteryError, match="header"):
        bat.load_blc_curve(path)
