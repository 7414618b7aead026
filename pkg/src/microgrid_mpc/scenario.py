"""Scenario data: hourly generation/load series, CSV round-trip, the
synthetic storm-scenario generator, and sliding-window views."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

CSV_HEADER = ["hour", "wind_kw", "solar_kw", "essential_kw", "regular_kw", "hilp", "comm_loss"]

DEFAULT_SIMULATION_HOURS = 72
DEFAULT_LOOKAHEAD = 24
DEFAULT_SERIES_HOURS = DEFAULT_SIMULATION_HOURS + DEFAULT_LOOKAHEAD


class ScenarioError(ValueError):
    pass


def _frozen(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=float).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ScenarioTimeSeries:
    """Hourly wind/solar/load profiles plus HILP and comm-loss hour sets."""

    wind: np.ndarray
    solar: np.ndarray
    essential_load: np.ndarray
    regular_load: np.ndarray
    hilp_hours: frozenset = frozenset()
    comm_loss_hours: frozenset = frozenset()

    def __post_init__(self):
        for name in ("wind", "solar", "essential_load", "regular_load"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.wind)
        for name in ("solar", "essential_load", "regular_load"):
            if len(getattr(self, name)) != n:
                raise ScenarioError("all series must have equal length")
        for name in ("wind", "solar", "essential_load", "regular_load"):
            arr = getattr(self, name)
            if np.any(arr < 0):
                bad = int(np.argmax(arr < 0))
                raise ScenarioError(f"negative {name} at hour {bad}: {arr[bad]}")
        object.__setattr__(self, "hilp_hours", frozenset(int(h) for h in self.hilp_hours))
        object.__setattr__(self, "comm_loss_hours", frozenset(int(h) for h in self.comm_loss_hours))
        for h in self.hilp_hours | self.comm_loss_hours:
            if not 0 <= h < n:
                raise ScenarioError(f"event hour {h} outside series range 0..{n - 1}")

    @property
    def hours(self) -> int:
        return len(self.wind)

    @property
    def generation(self) -> np.ndarray:
        return self.wind + self.solar

    @property
    def total_load(self) -> np.ndarray:
        return self.essential_load + self.regular_load

    def require_hours(self, minimum: int) -> None:
        if self.hours < minimum:
            raise ScenarioError(f"series has {self.hours} hours, need at least {minimum}")

    def without_comm_loss(self) -> "ScenarioTimeSeries":
        return replace(self, comm_loss_hours=frozenset())

    def truncated(self, hours: int) -> "ScenarioTimeSeries":
        return ScenarioTimeSeries(
            self.wind[:hours], self.solar[:hours],
            self.essential_load[:hours], self.regular_load[:hours],
            frozenset(h for h in self.hilp_hours if h < hours),
            frozenset(h for h in self.comm_loss_hours if h < hours))

    def __eq__(self, other):
        if not isinstance(other, ScenarioTimeSeries):
            return NotImplemented
        return (np.array_equal(self.wind, other.wind)
                and np.array_equal(self.solar, other.solar)
                and np.array_equal(self.essential_load, other.essential_load)
                and np.array_equal(self.regular_load, other.regular_load)
                and self.hilp_hours == other.hilp_hours
                and self.comm_loss_hours == other.comm_loss_hours)


@dataclass(frozen=True)
class ScenarioWindow:
    """Read-only lookahead slice with per-hour load-data availability flags."""

    start: int
    length: int
    wind: np.ndarray
    solar: np.ndarray
    essential_load: np.ndarray
    regular_load: np.ndarray
    load_known: np.ndarray  # bool per hour

    @property
    def generation(self) -> np.ndarray:
        return self.wind + self.solar

    @property
    def hours(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.length)


def window(series: ScenarioTimeSeries, start: int, length: int,
           known_through: int) -> ScenarioWindow:
    """Lookahead view starting at `start`; load data for comm-loss hours past
    `known_through` is flagged unavailable."""
    if start < 0 or length <= 0 or start + length > series.hours:
        raise ScenarioError(
            f"window [{start}, {start + length}) outside series of {series.hours} hours")
    hours = range(start, start + length)
    known = np.array([not (h in series.comm_loss_hours and h > known_through)
                      for h in hours])
    sl = slice(start, start + length)
    return ScenarioWindow(start, length, series.wind[sl], series.solar[sl],
                          series.essential_load[sl], series.regular_load[sl],
                          _frozen(known).astype(bool))


def load_scenario(path, min_hours: int = DEFAULT_SERIES_HOURS) -> ScenarioTimeSeries:
    """Load and validate a scenario CSV (see CSV_HEADER for the schema)."""
    wind, solar, ess, reg = [], [], [], []
    hilp, comm = set(), set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise ScenarioError(f"{path}: expected header {','.join(CSV_HEADER)}")
        expected_hour = 0
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ScenarioError(f"{path}: row {ln}: expected {len(CSV_HEADER)} fields")
            try:
                hour = int(row[0])
                vals = [float(v) for v in row[1:5]]
                flags = [int(row[5]), int(row[6])]
            except ValueError as exc:
                raise ScenarioError(f"{path}: row {ln}: {exc}") from exc
            if hour != expected_hour:
                raise ScenarioError(
                    f"{path}: row {ln}: hour column must be contiguous from 0 "
                    f"(got {hour}, expected {expected_hour})")
            for col, v in zip(CSV_HEADER[1:5], vals):
                if v < 0:
                    raise ScenarioError(f"{path}: row {ln}: negative {col}: {v}")
            for col, f in zip(CSV_HEADER[5:], flags):
                if f not in (0, 1):
                    raise ScenarioError(f"{path}: row {ln}: {col} flag must be 0 or 1")
            wind.append(vals[0]); solar.append(vals[1])
            ess.append(vals[2]); reg.append(vals[3])
            if flags[0]:
                hilp.add(hour)
            if flags[1]:
                comm.add(hour)
            expected_hour += 1
    if len(wind) < min_hours:
        raise ScenarioError(
            f"{path}: {len(wind)} rows, need at least {min_hours} "
            f"(simulation hours + lookahead)")
    return ScenarioTimeSeries(wind, solar, ess, reg, frozenset(hilp), frozenset(comm))


def write_scenario(series: ScenarioTimeSeries, path) -> None:
    """Write the CSV form; floats use repr so the round-trip is bit-exact."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for h in range(series.hours):
            writer.writerow([
                h,
                repr(float(series.wind[h])),
                repr(float(series.solar[h])),
                repr(float(series.essential_load[h])),
                repr(float(series.regular_load[h])),
                1 if h in series.hilp_hours else 0,
                1 if h in series.comm_loss_hours else 0,
            ])


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic 96-hour storm scenario.

    The absolute kW scale is a documented default (the reference figures
    publish shapes, not numbers); generation is rescaled so that outside the
    storm window it covers mean load with a small margin, leaving a genuine
    deficit during the storm.
    """

    hours: int = DEFAULT_SERIES_HOURS
    hilp_start: int = 27
    hilp_end: int = 39            # inclusive
    comm_loss_start: int = 27
    essential_base: float = 1.8   # kW, near-flat
    regular_base: float = 2.6     # kW, diurnal mean
    regular_amplitude: float = 1.1
    wind_base: float = 2.4
    wind_amplitude: float = 0.8
    solar_peak: float = 2.2
    hilp_solar_factor: float = 0.35
    pre_peak_factor: float = 1.45  # >= 1.2 required (elevated wind around the event)
    supply_margin: float = 1.10   # normal-hour generation / load ratio
    storm_surge: float = 1.2      # kW jump in regular load at storm onset
    storm_decline: float = 0.22   # kW/h decline of regular load as the outage persists
    lull_hours: int = 8           # post-storm wind lull after the trailing peak
    lull_deficit: float = 2.6    # kW supply shortfall sustained through the lull

    def __post_init__(self):
        if not 0 <= self.hilp_start <= self.hilp_end < self.hours:
            raise ScenarioError(
                f"hilp window [{self.hilp_start}, {self.hilp_end}] outside 0..{self.hours - 1}")
        if self.pre_peak_factor < 1.2:
            raise ScenarioError("pre/post event wind peak factor must be >= 1.2")


def generate_synthetic(seed: int, config: GeneratorConfig | None = None) -> ScenarioTimeSeries:
    """Deterministic synthetic scenario: wind dies during the storm window
    (peaking just before and after), solar dims but persists in daylight,
    essential load stays near flat and regular load swings diurnally."""
    cfg = config or GeneratorConfig()
    rng = np.random.default_rng(seed)
    h = np.arange(cfg.hours)
    tod = h % 24

    essential = cfg.essential_base * (1.0
                                      + 0.02 * np.sin(2 * np.pi * (tod - 8) / 24)
                                      + rng.normal(0.0, 0.012, cfg.hours))
    regular = (cfg.regular_base
               + cfg.regular_amplitude * np.sin(2 * np.pi * (tod - 12) / 24)
               + rng.normal(0.0, 0.16, cfg.hours))
    essential = np.maximum(essential, 0.05)
    regular = np.maximum(regular, 0.05)

    # outage demand dynamics: regular consumption surges when the storm
    # hits, then falls off steadily while the disruption persists
    storm_span = np.arange(cfg.hilp_start, cfg.hilp_end + 1)
    regular[storm_span] = np.maximum(
        cfg.regular_base + cfg.storm_surge
        - cfg.storm_decline * (storm_span - cfg.hilp_start)
        + rng.normal(0.0, 0.08, storm_span.size), 0.05)

    daylight = np.clip(np.sin(np.pi * (tod - 6) / 12), 0.0, None)
    solar = cfg.solar_peak * daylight ** 1.4 * (1.0 + rng.normal(0.0, 0.05, cfg.hours))
    solar = np.maximum(solar, 0.0)

    # the wind share of the portfolio is sized to complement solar against
    # the deterministic demand shape (peaking at night when solar is out),
    # with its own gusting fluctuations on top
    demand_shape = (cfg.essential_base + cfg.regular_base
                    + cfg.regular_amplitude * np.sin(2 * np.pi * (tod - 12) / 24))
    solar_shape = cfg.solar_peak * daylight ** 1.4
    wind = (np.maximum(demand_shape - solar_shape, 0.3)
            + 0.35 * np.sin(2 * np.pi * h / 9.5)
            + rng.normal(0.0, 0.18, cfg.hours))
    wind = np.maximum(wind, 0.0)
    baseline_mean = float(wind.mean())

    hilp = np.arange(cfg.hilp_start, cfg.hilp_end + 1)
    ramp_pre = np.arange(max(0, cfg.hilp_start - 3), cfg.hilp_start)
    ramp_post = np.arange(cfg.hilp_end + 1, min(cfg.hours, cfg.hilp_end + 4))
    for idx in (ramp_pre, ramp_post):
        wind[idx] = np.maximum(wind[idx], cfg.pre_peak_factor * baseline_mean)
    solar[hilp] *= cfg.hilp_solar_factor
    wind[hilp] = 0.0

    # post-frontal calm: once the trailing gust peak passes, wind sags to a
    # sustained shortfall until the front fully clears
    lull = np.arange(cfg.hilp_end + 4,
                     min(cfg.hours, cfg.hilp_end + 4 + cfg.lull_hours))
    if lull.size:
        calm = demand_shape[lull] - solar_shape[lull] - cfg.lull_deficit
        wind[lull] = np.maximum(calm, 0.1) + rng.normal(0.0, 0.05, lull.size)

    # size generation against normal-hour demand: scale wind and solar
    # together so non-storm generation covers non-storm load with a small
    # margin (preserves the storm zeros and the relative pre/post peaks);
    # the storm window keeps its genuine deficit
    load_total = essential + regular
    normal = np.ones(cfg.hours, dtype=bool)
    normal[hilp] = False
    normal[lull] = False
    gen_total = wind + solar
    scale = float(cfg.supply_margin * load_total[normal].sum() / gen_total[normal].sum())
    wind *= scale
    solar *= scale

    comm = frozenset(int(x) for x in np.arange(cfg.comm_loss_start, cfg.hilp_end + 1))
    return ScenarioTimeSeries(wind, solar, essential, regular,
                              frozenset(int(x) for x in hilp), comm)


BUNDLED_SEED = 7


def bundled_scenario() -> ScenarioTimeSeries:
    """The default synthetic scenario used by examples and acceptance checks."""
    return generate_synthetic(BUNDLED_SEED)
