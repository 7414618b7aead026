"""Post-simulation metrics: switching counts, load-loss totals, the
weighted resilience index, battery lifespan, and the JSON summary."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import battery as bat
from .battery import BatteryMode, BatteryParams
from .milp.problem import PiecewiseCurve


@dataclass
class SimulationResult:
    """Per-hour committed records plus aggregates over the whole run."""

    records: list
    weights: object
    switches: int
    discharge_episode_count: int
    essential_loss_kwh: float
    regular_loss_kwh: float
    total_loss_kwh: float
    resilience_index: float
    lifespan_years: float | None
    expected_ri_curve: np.ndarray   # one entry per decision (horizon mean J_R)
    rmse: dict | None               # forecast errors; None when nothing was predicted

    @property
    def hours(self) -> int:
        return len(self.records)

    def summary(self) -> dict:
        out = {
            "switches": self.switches,
            "discharge_episodes": self.discharge_episode_count,
            "essential_loss_kwh": round(self.essential_loss_kwh, 6),
            "regular_loss_kwh": round(self.regular_loss_kwh, 6),
            "total_loss_kwh": round(self.total_loss_kwh, 6),
            "resilience_index": round(self.resilience_index, 6),
            "lifespan_years": (None if self.lifespan_years is None
                               else round(self.lifespan_years, 3)),
        }
        if self.rmse is not None:
            out["rmse"] = {k: round(v, 6) for k, v in self.rmse.items()}
        return out


def count_switches(modes) -> int:
    """Number of hour-to-hour mode changes in a committed mode sequence."""
    return sum(1 for a, b in zip(modes, modes[1:]) if a != b)


def loss_totals(records) -> tuple[float, float, float]:
    ess = sum(r.essential_shed for r in records)
    reg = sum(r.regular_shed for r in records)
    return ess, reg, ess + reg


def resilience_index(records, weights) -> float:
    """Weighted fraction of load served over the whole run.

    1 - sum(weighted shed) / sum(weighted load); an empty or zero-load run
    counts as fully resilient.
    """
    w_e, w_r = weights.w_essential, weights.w_regular
    shed = sum(w_e * r.essential_shed + w_r * r.regular_shed for r in records)
    load = sum(w_e * r.essential_load + w_r * r.regular_load for r in records)
    if load <= 1e-12:
        return 1.0
    return 1.0 - shed / load


def aggregate(records, weights, params: BatteryParams, curve: PiecewiseCurve,
              expected_ri_curve: np.ndarray, rmse_report: dict | None) -> SimulationResult:
    modes = [r.mode for r in records]
    socs = [r.soc_after for r in records]
    ess, reg, tot = loss_totals(records)
    episodes = bat.discharge_episodes(modes, socs, params.soc_init)
    lifespan = (bat.estimate_lifespan(modes, socs, params.soc_init, curve)
                if records else None)
    return SimulationResult(
        records=records,
        weights=weights,
        switches=count_switches(modes),
        discharge_episode_count=len(episodes),
        essential_loss_kwh=float(ess),
        regular_loss_kwh=float(reg),
        total_loss_kwh=float(tot),
        resilience_index=resilience_index(records, weights),
        lifespan_years=lifespan,
        expected_ri_curve=np.asarray(expected_ri_curve, dtype=float),
        rmse=rmse_report,
    )
