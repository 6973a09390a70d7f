"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .data import CUTOFF_ATOL, RdData


def as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def check_cutoffs(cutoffs) -> np.ndarray:
    cutoffs = np.asarray(cutoffs, dtype=float)
    if cutoffs.ndim != 1 or cutoffs.size < 2:
        raise ValueError("cutoffs must list at least two values")
    if not np.all(np.diff(cutoffs) > 0):
        raise ValueError("cutoffs must be strictly increasing")
    return cutoffs


def match_cutoff_labels(c_values, cutoffs, atol=CUTOFF_ATOL):
    """Snap cutoff labels onto configured cutoffs; return (snapped, unmatched rows)."""
    c_values = np.asarray(c_values, dtype=float)
    cutoffs = np.asarray(cutoffs, dtype=float)
    diffs = np.abs(c_values[:, None] - cutoffs[None, :])
    nearest = np.argmin(diffs, axis=1)
    matched = diffs[np.arange(c_values.size), nearest] <= atol
    snapped = np.where(matched, cutoffs[nearest], c_values)
    return snapped, np.flatnonzero(~matched)


def sharp_treatment_mismatches(data: RdData) -> np.ndarray:
    """Rows where d differs from the sharp assignment rule 1{x >= c}."""
    implied = (data.x >= data.c).astype(np.int8)
    return np.flatnonzero(data.d != implied)


def one_sided_violations(data: RdData) -> np.ndarray:
    """Rows treated strictly below their cutoff (forbidden under one-sided compliance)."""
    return np.flatnonzero((data.d == 1) & (data.x < data.c))


def check_interval(interval, pair) -> tuple:
    lo, hi = (float(interval[0]), float(interval[1]))
    if not lo <= hi:
        raise ValueError("interval endpoints must satisfy lo <= hi")
    if not (pair.l < lo and hi < pair.h):
        raise ValueError(
            f"interval [{lo:g}, {hi:g}] must lie strictly inside ({pair.l:g}, {pair.h:g})"
        )
    return lo, hi
