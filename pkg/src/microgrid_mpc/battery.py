"""Battery physics and economics: SOC dynamics, operating modes, switching
costs, the depth-of-discharge lifecycle curve, and lifespan estimation."""

from __future__ import annotations

import bisect
import csv
import enum
from dataclasses import dataclass

from .milp.problem import PiecewiseCurve


class BatteryError(ValueError):
    pass


class BatteryMode(enum.Enum):
    CH = "CH"
    DIS = "DIS"
    IDLE = "IDLE"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BatteryParams:
    eta_ch: float = 0.90
    eta_dis: float = 0.95
    soc_init: float = 0.5
    soc_min: float = 0.2
    soc_max: float = 0.9
    e_max: float = 4.0          # kWh
    p_max: float = 4.0          # kW
    c_bat: float = 125.0        # lifecycle cost coefficient
    c_ch_dis: float = 0.055
    c_no_ch_dis: float = 0.055
    c_idle: float = 0.0275

    def __post_init__(self):
        if not 0.0 <= self.soc_min < self.soc_init < self.soc_max <= 1.0:
            raise BatteryError(
                f"need 0 <= soc_min < soc_init < soc_max <= 1, got "
                f"{self.soc_min}/{self.soc_init}/{self.soc_max}")
        for name in ("eta_ch", "eta_dis"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise BatteryError(f"{name} must be in (0, 1], got {v}")
        if self.p_max <= 0 or self.e_max <= 0:
            raise BatteryError("p_max and e_max must be positive")


# Representative default lifecycle curve (DOD fraction -> achievable cycles):
# 8 linear segments, strictly decreasing, convex. Replaceable via a CSV file
# with a manufacturer curve.
DEFAULT_BLC_CURVE = PiecewiseCurve((
    (0.1, 15000.0),
    (0.2, 9000.0),
    (0.3, 6000.0),
    (0.4, 4500.0),
    (0.5, 3500.0),
    (0.6, 2800.0),
    (0.7, 2300.0),
    (0.8, 1900.0),
    (0.9, 1600.0),
))


def validate_blc_curve(curve: PiecewiseCurve) -> None:
    xs = [x for x, _ in curve.breakpoints]
    ys = [y for _, y in curve.breakpoints]
    if xs[0] <= 0.0 or xs[-1] > 1.0:
        raise BatteryError("DOD breakpoints must lie in (0, 1]")
    for a, b in zip(ys, ys[1:]):
        if not b < a:
            raise BatteryError("cycle counts must be strictly decreasing in DOD")


def load_blc_curve(path) -> PiecewiseCurve:
    """Load a `dod,cycles` CSV curve (9 rows for the 8-segment default shape)."""
    points = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["dod", "cycles"]:
            raise BatteryError(f"{path}: expected header 'dod,cycles'")
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                points.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise BatteryError(f"{path}: bad row {ln}: {row}") from exc
    curve = PiecewiseCurve(tuple(points))
    validate_blc_curve(curve)
    return curve


def soc_update(soc: float, p_ch: float, p_dis: float, params: BatteryParams) -> float:
    """One-hour SOC transition for the given (exclusive) charge/discharge powers.

    The result is not clamped; keeping it inside [soc_min, soc_max] is the
    optimizer's job.
    """
    if p_ch < 0 or p_dis < 0:
        raise BatteryError("powers must be nonnegative")
    if p_ch > 0 and p_dis > 0:
        raise BatteryError("cannot charge and discharge in the same hour")
    if p_ch > params.p_max + 1e-9 or p_dis > params.p_max + 1e-9:
        raise BatteryError("power exceeds p_max")
    return soc + (params.eta_ch * p_ch - p_dis / params.eta_dis) / params.e_max


def dod_of(soc: float) -> float:
    if not 0.0 <= soc <= 1.0:
        raise BatteryError(f"soc out of [0, 1]: {soc}")
    return 1.0 - soc


def blc_eval(curve: PiecewiseCurve, dod: float) -> float:
    """Exact linear interpolation of the lifecycle curve at the given DOD."""
    xs = [x for x, _ in curve.breakpoints]
    ys = [y for _, y in curve.breakpoints]
    if dod < xs[0] - 1e-12 or dod > xs[-1] + 1e-12:
        raise BatteryError(f"dod {dod} outside curve domain [{xs[0]}, {xs[-1]}]")
    dod = min(max(dod, xs[0]), xs[-1])
    i = bisect.bisect_right(xs, dod) - 1
    i = min(max(i, 0), len(xs) - 2)
    t = (dod - xs[i]) / (xs[i + 1] - xs[i])
    return ys[i] + t * (ys[i + 1] - ys[i])


def switching_cost(prev: BatteryMode, nxt: BatteryMode, params: BatteryParams) -> float:
    """Per-hour mode cost: a transition charge plus an idle holding charge."""
    cost = 0.0
    if prev != nxt:
        if BatteryMode.IDLE in (prev, nxt):
            cost += params.c_no_ch_dis
        else:  # CH <-> DIS
            cost += params.c_ch_dis
    if nxt == BatteryMode.IDLE:
        cost += params.c_idle
    return cost


def discharge_episodes(modes, socs, soc_start: float):
    """Maximal contiguous DIS runs as (start_index, soc_drop) pairs."""
    episodes = []
    run_start = None
    for i, mode in enumerate(modes):
        if mode == BatteryMode.DIS:
            if run_start is None:
                run_start = i
        elif run_start is not None:
            soc_before = socs[run_start - 1] if run_start > 0 else soc_start
            episodes.append((run_start, soc_before - socs[i - 1]))
            run_start = None
    if run_start is not None:
        soc_before = socs[run_start - 1] if run_start > 0 else soc_start
        episodes.append((run_start, soc_before - socs[len(modes) - 1]))
    return episodes


def estimate_lifespan(modes, socs, soc_start: float, curve: PiecewiseCurve) -> float | None:
    """Estimated battery lifespan in years from an hourly mode/SOC record.

    Each maximal contiguous discharge run counts as one cycle at a depth
    equal to its SOC drop; the achievable cycle count at the mean depth is
    spread over the observed episode rate. Returns None when the record
    contains no discharge episode ("no-cycling").
    """
    if len(modes) == 0 or len(modes) != len(socs):
        raise BatteryError("need equal-length nonempty mode and SOC records")
    episodes = discharge_episodes(modes, socs, soc_start)
    if not episodes:
        return None
    days = len(modes) / 24.0
    mean_depth = sum(d for _, d in episodes) / len(episodes)
    lo, hi = curve.x_first, curve.x_last
    mean_depth = min(max(mean_depth, lo), hi)
    episodes_per_day = len(episodes) / days
    return blc_eval(curve, mean_depth) / (episodes_per_day * 365.0)
