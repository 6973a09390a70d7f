"""Scikit-learn style estimators wrapping the bounds machinery.

``fit`` takes the design matrix ``X`` with columns (running variable,
cutoff label[, treatment indicator]) and the outcome ``y``; fitted curves,
variances, and the uniform band land in trailing-underscore attributes.
``predict`` evaluates the bound pair at new points inside the cutoff gap by
refitting the stored sample there, so the values are exact rather than
interpolated.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import bounds as _bounds
from . import fuzzy as _fuzzy
from . import inference as _inference
from .bandwidth import BandwidthPlan
from .bounds import CutoffPair, DIRECTION_INCREASING
from .data import RdData
from .errors import RdExtrapError
from .kernels import KernelSpec
from .validation import (
    as_float_array,
    check_cutoffs,
    match_cutoff_labels,
    one_sided_violations,
    sharp_treatment_mismatches,
)


class NotFittedError(RdExtrapError, AttributeError):
    """fit has not been called yet."""


def _resolve_bandwidths(bandwidths) -> BandwidthPlan | None:
    if bandwidths is None:
        return None
    if isinstance(bandwidths, BandwidthPlan):
        return bandwidths
    b_1l, b_0h, b_0l = bandwidths
    return BandwidthPlan(b_1l=float(b_1l), b_0h=float(b_0h), b_0l=float(b_0l))


class _RdBoundsBase(BaseEstimator):
    def _check_is_fitted(self):
        if not hasattr(self, "grid_"):
            raise NotFittedError(f"{type(self).__name__} must be fitted first")

    def _ingest(self, X, y, need_d: bool):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] not in (2, 3):
            raise ValueError("X must have columns (x, c) or (x, c, d)")
        y = as_float_array(y, "y")
        if y.size != X.shape[0]:
            raise ValueError("X and y have different lengths")
        x, c = X[:, 0], X[:, 1]
        if self.cutoffs is not None:
            cutoffs = check_cutoffs(self.cutoffs)
        else:
            cutoffs = check_cutoffs(np.unique(c))
        c, unmatched = match_cutoff_labels(c, cutoffs)
        if unmatched.size:
            raise ValueError(f"cutoff labels do not match configured cutoffs in rows {unmatched[:10].tolist()}")
        if X.shape[1] == 3:
            d = X[:, 2]
            if not np.isin(np.unique(d), (0.0, 1.0)).all():
                raise ValueError("treatment column must be binary")
            d = d.astype(np.int8)
        elif need_d:
            raise ValueError("fuzzy designs need an observed treatment column")
        else:
            d = (x >= c).astype(np.int8)
        data = RdData(y=y, x=x, c=c, d=d)
        self.n_features_in_ = X.shape[1]
        return data, cutoffs

    def _grid_and_interval(self, pair: CutoffPair):
        if self.interval is not None:
            lo, hi = float(self.interval[0]), float(self.interval[1])
        else:
            width = pair.h - pair.l
            lo = pair.l + _bounds.GRID_TRIM * width
            hi = pair.h - _bounds.GRID_TRIM * width
        grid = _inference.band_grid((lo, hi), self.grid_size)
        return grid, (lo, hi)


class SharpRdBounds(_RdBoundsBase):
    """Bound curves and a uniform band for a sharp multi-cutoff design.

    Parameters
    ----------
    cutoffs : sequence of two floats, optional
        Low and high cutoff. Inferred from the distinct labels in X when
        omitted (the two must then be the only labels present).
    kernel : str
        Kernel family for all local fits.
    direction : str
        "increasing_dominant" for the baseline shape restrictions,
        "decreasing_antidominant" for their reverse.
    interval : (float, float), optional
        Band interval; defaults to the trimmed interior of the cutoff gap.
    grid_size : int
        Number of grid points for curves and the supremum approximation.
    alpha : float
        One minus the simultaneous coverage level.
    n_boot : int
        Bootstrap replications for the band; set to 0 to skip the band.
    seed : int
        Seed of the multiplier streams.
    bandwidths : BandwidthPlan or (b_1l, b_0h, b_0l), optional
        Manual bandwidths; selected automatically when omitted.
    """

    def __init__(self, cutoffs=None, kernel="triangular", direction=DIRECTION_INCREASING,
                 interval=None, grid_size=50, alpha=0.05, n_boot=1000, seed=0,
                 bandwidths=None):
        self.cutoffs = cutoffs
        self.kernel = kernel
        self.direction = direction
        self.interval = interval
        self.grid_size = grid_size
        self.alpha = alpha
        self.n_boot = n_boot
        self.seed = seed
        self.bandwidths = bandwidths

    def fit(self, X, y):
        data, cutoffs = self._ingest(X, y, need_d=False)
        bad = sharp_treatment_mismatches(data)
        if bad.size:
            raise ValueError(
                f"treatment does not follow the sharp rule 1{{x >= c}} in rows {bad[:10].tolist()}"
            )
        pair = CutoffPair(float(cutoffs[0]), float(cutoffs[-1]))
        kernel = KernelSpec(self.kernel)
        grid, interval = self._grid_and_interval(pair)
        plan = _resolve_bandwidths(self.bandwidths)
        if plan is None:
            plan = _bounds.select_sharp_plan(data, pair, interval, kernel)
        parts = _bounds.sharp_parts(data, pair, grid, plan, kernel)
        curve = _bounds.curve_from_parts(parts, self.direction)
        curve = curve.with_cb(
            parts.contrast_down
            + (_bounds.fit_local_quadratic(parts.sub_0h, pair.l, plan.b_0h, kernel)
               - parts.mu_0l_at_l)
        )
        if self.n_boot:
            band = _inference._band_from_sharp_parts(
                parts, self.n_boot, self.alpha, self.seed, self.direction
            )
            curve = curve.with_band(band.lo, band.hi)
            self.band_ = band
            self.crit_ = (band.crit_lower, band.crit_upper)
        else:
            self.band_ = None
            self.crit_ = None
        self._data = data
        self._pair = pair
        self._kernel = kernel
        self.curve_ = curve
        self.grid_ = curve.grid
        self.lower_ = curve.lower
        self.upper_ = curve.upper
        self.var_lower_ = curve.var_lower
        self.var_upper_ = curve.var_upper
        self.cb_point_ = curve.cb_point
        self.band_lo_ = curve.band_lo
        self.band_hi_ = curve.band_hi
        self.bandwidths_ = plan
        self.diagnostics_ = _bounds.dominance_diagnostic(data, pair, plan, kernel)
        return self

    def predict(self, X):
        """Bound pair [lower, upper] at new points strictly inside (l, h)."""
        self._check_is_fitted()
        pts = np.sort(np.unique(as_float_array(X, "X")))
        parts = _bounds.sharp_parts(self._data, self._pair, pts, self.bandwidths_, self._kernel)
        curve = _bounds.curve_from_parts(parts, self.direction)
        order = np.searchsorted(pts, as_float_array(X, "X"))
        return np.column_stack([curve.lower[order], curve.upper[order]])


class FuzzyRdBounds(_RdBoundsBase):
    """Bound curves and a uniform band under one-sided noncompliance.

    X must carry the observed treatment column; rows treated below their own
    cutoff violate one-sided compliance and are rejected.
    """

    def __init__(self, cutoffs=None, kernel="triangular", interval=None, grid_size=50,
                 alpha=0.05, n_boot=1000, seed=0, bandwidths=None,
                 p_min=_fuzzy.P_MIN_DEFAULT):
        self.cutoffs = cutoffs
        self.kernel = kernel
        self.interval = interval
        self.grid_size = grid_size
        self.alpha = alpha
        self.n_boot = n_boot
        self.seed = seed
        self.bandwidths = bandwidths
        self.p_min = p_min

    def fit(self, X, y):
        data, cutoffs = self._ingest(X, y, need_d=True)
        bad = one_sided_violations(data)
        if bad.size:
            raise ValueError(
                f"one-sided compliance violated (treated below cutoff) in rows {bad[:10].tolist()}"
            )
        pair = CutoffPair(float(cutoffs[0]), float(cutoffs[-1]))
        kernel = KernelSpec(self.kernel)
        grid, interval = self._grid_and_interval(pair)
        plan = _resolve_bandwidths(self.bandwidths)
        if plan is None:
            plan = _fuzzy.select_fuzzy_plan(data, pair, interval, kernel)
        parts = _fuzzy.fuzzy_parts(data, pair, grid, plan, kernel, self.p_min)
        curve = _fuzzy.curve_from_fuzzy_parts(parts)
        if self.n_boot:
            band = _inference._band_from_fuzzy_parts(parts, self.n_boot, self.alpha, self.seed)
            curve = curve.with_band(band.lo, band.hi)
            self.band_ = band
            self.crit_ = (band.crit_lower, band.crit_upper)
        else:
            self.band_ = None
            self.crit_ = None
        self._data = data
        self._pair = pair
        self._kernel = kernel
        self.curve_ = curve
        self.grid_ = curve.grid
        self.lower_ = curve.lower
        self.upper_ = curve.upper
        self.p_hat_ = curve.p_hat
        self.var_lower_ = curve.var_lower
        self.var_upper_ = curve.var_upper
        self.band_lo_ = curve.band_lo
        self.band_hi_ = curve.band_hi
        self.bandwidths_ = plan
        return self

    def predict(self, X):
        """Bound pair [lower, upper] at new points strictly inside (l, h)."""
        self._check_is_fitted()
        pts = np.sort(np.unique(as_float_array(X, "X")))
        parts = _fuzzy.fuzzy_parts(
            self._data, self._pair, pts, self.bandwidths_, self._kernel, self.p_min
        )
        curve = _fuzzy.curve_from_fuzzy_parts(parts)
        order = np.searchsorted(pts, as_float_array(X, "X"))
        return np.column_stack([curve.lower[order], curve.upper[order]])
