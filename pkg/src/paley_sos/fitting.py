"""Power-law fits a * p^b by least squares on the log scale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerFit:
    a: float
    b: float
    r_squared: float
    n_points: int

    def predict(self, p) -> np.ndarray:
        return self.a * np.asarray(p, dtype=float) ** self.b


def fit_power_law(ps, values) -> PowerFit:
    """OLS of log(value) on log(p); needs at least 3 distinct p and positive values."""
    x = np.log(np.asarray(ps, dtype=float))
    y = np.asarray(values, dtype=float)
    if len(x) != len(y):
        raise ValueError("ps and values differ in length")
    if len(np.unique(x)) < 3:
        raise ValueError("need at least 3 points with distinct p")
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("values must be finite and positive")
    y = np.log(y)
    b, log_a = np.polyfit(x, y, 1)
    resid = y - (log_a + b * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return PowerFit(float(np.exp(log_a)), float(b), min(r2, 1.0), len(x))


def fit_records(records) -> PowerFit:
    """Fit over SweepRecords with status ok."""
    ok = [r for r in records if r.status == "ok"]
    return fit_power_law([r.p for r in ok], [r.value for r in ok])
