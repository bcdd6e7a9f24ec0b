"""Input validation helpers used across estimators and model functions."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .errors import DataError, DomainError


def check_interval(name, value, lo, hi, *, closed_lo=False, closed_hi=False):
    """Check ``value`` lies in the interval (lo, hi) with optional closed ends."""
    v = float(value)
    if not np.isfinite(v):
        raise DomainError(f"{name} must be finite, got {value!r}")
    ok_lo = v >= lo if closed_lo else v > lo
    ok_hi = v <= hi if closed_hi else v < hi
    if not (ok_lo and ok_hi):
        lb = "[" if closed_lo else "("
        rb = "]" if closed_hi else ")"
        raise DomainError(f"{name} must lie in {lb}{lo}, {hi}{rb}, got {v}")
    return v


def check_positive(name, value, *, strict=True):
    v = float(value)
    if not np.isfinite(v):
        raise DomainError(f"{name} must be finite, got {value!r}")
    if strict and v <= 0:
        raise DomainError(f"{name} must be > 0, got {v}")
    if not strict and v < 0:
        raise DomainError(f"{name} must be >= 0, got {v}")
    return v


def as_1d_array(name, values, *, dtype=float):
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def check_frame(X, required=(), name="panel"):
    """Coerce ``X`` to a DataFrame and verify the required columns exist."""
    if isinstance(X, pd.DataFrame):
        frame = X
    elif hasattr(X, "frame"):
        frame = X.frame
    else:
        raise DataError(f"{name} must be a DataFrame or TimeSeriesPanel, got {type(X).__name__}")
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataError(f"{name} is missing required columns: {missing}")
    return frame


def check_finite_columns(frame, columns, name="panel"):
    for c in columns:
        col = np.asarray(frame[c], dtype=float)
        if not np.all(np.isfinite(col)):
            raise DataError(f"{name} column {c!r} contains non-finite values")
