"""Argument checks shared by the estimator facade."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_scalar_in(value, name: str, lo=None, hi=None, *, lo_open=False, hi_open=False, kind=numbers.Real):
    """Return ``value`` as a float, raising ValueError/TypeError when out of range."""
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    v = float(value)
    if not np.isfinite(v):
        raise ValueError(f"{name} must be finite")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ValueError(f"{name}={v} is below its allowed range")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ValueError(f"{name}={v} is above its allowed range")
    return v


def check_points(X, dim: int) -> np.ndarray:
    """2-D float array of points with ``dim`` columns."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != dim:
        raise ValueError(f"expected points with {dim} coordinates, got {X.shape[1]}")
    return X


def check_time(t, T: float) -> float:
    return check_scalar_in(t, "t", 0.0, T * (1.0 + 1e-12))
