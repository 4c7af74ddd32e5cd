"""Log-log rate fitting."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    residual_rms: float
    window: tuple
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def fit_rate(t, values, window=None) -> FitResult:
    """Least-squares line through ``(log t, log value)`` restricted to ``window``."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(t.min()), float(t.max()))
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 5:
        raise ValueError(f"too few points in window [{lo:g}, {hi:g}]: {int(sel.sum())} < 5")
    tv, vv = t[sel], values[sel]
    if np.any(vv <= 0) or np.any(tv <= 0):
        raise ValueError("nonpositive value in fit window")
    x, y = np.log(tv), np.log(vv)
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = y - np.polyval(coef, x)
    return FitResult(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2))),
                     (float(lo), float(hi)), int(sel.sum()))
