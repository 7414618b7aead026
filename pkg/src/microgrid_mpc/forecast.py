"""Two-hour-average load forecasting for comm-loss hours, plus RMSE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ForecastError(ValueError):
    pass


@dataclass
class LoadHistory:
    """Actual per-hour loads known so far, one list per load class."""

    essential: list[float] = field(default_factory=list)
    regular: list[float] = field(default_factory=list)

    @property
    def last_known(self) -> int:
        return len(self.essential) - 1

    def append(self, essential: float, regular: float) -> None:
        self.essential.append(float(essential))
        self.regular.append(float(regular))


def predict_next(history: LoadHistory) -> tuple[float, float]:
    """Next-hour load estimate: the mean of the last two known hours."""
    if len(history.essential) < 2 or len(history.regular) < 2:
        raise ForecastError("need at least two known hours to predict")
    ess = (history.essential[-1] + history.essential[-2]) / 2.0
    reg = (history.regular[-1] + history.regular[-2]) / 2.0
    return ess, reg


def fill_window(history: LoadHistory, essential_actual, regular_actual, known):
    """Per-hour window loads with unavailable hours filled recursively.

    `known[i]` marks hours whose actual loads are usable; unavailable hours
    get the two-hour-average prediction, re-fed with its own output for runs
    longer than one hour.
    """
    ess_work = list(history.essential)
    reg_work = list(history.regular)
    ess_out = np.array(essential_actual, dtype=float).copy()
    reg_out = np.array(regular_actual, dtype=float).copy()
    for i in range(len(ess_out)):
        if known[i]:
            ess_work.append(float(essential_actual[i]))
            reg_work.append(float(regular_actual[i]))
        else:
            if len(ess_work) < 2:
                raise ForecastError("need at least two known hours to predict")
            ess_hat = (ess_work[-1] + ess_work[-2]) / 2.0
            reg_hat = (reg_work[-1] + reg_work[-2]) / 2.0
            ess_out[i] = ess_hat
            reg_out[i] = reg_hat
            ess_work.append(ess_hat)
            reg_work.append(reg_hat)
    return ess_out, reg_out


def rmse(actual, predicted) -> float:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise ForecastError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise ForecastError("empty series")
    return float(math.sqrt(np.mean((a - p) ** 2)))
