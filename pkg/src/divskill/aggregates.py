"""Seed-aggregation helpers for reporting: interquartile mean and learning-curve area."""

from __future__ import annotations

import numpy as np


def iqm(values) -> float:
    """Interquartile mean: drop the lowest and highest quarter (floor), average the rest."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("iqm of empty sequence")
    k = int(np.floor(0.25 * x.size))
    trimmed = x[k : x.size - k] if x.size - 2 * k > 0 else x
    return float(trimmed.mean())


def area_under_curve(steps, values) -> float:
    """Trapezoidal area under a learning curve, for update-schedule comparisons."""
    s = np.asarray(steps, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.shape != v.shape or s.size < 2:
        raise ValueError("need matching steps/values with at least 2 points")
    return float(np.trapezoid(v, s))
