"""Bounds for one-sided-noncompliance fuzzy designs.

Numerators are bias-corrected fits of the observed outcome on the
(c=l, x>=l), (c=h, x<h), and (c=l, x<l) subsamples; the denominator is the
bias-corrected local fit of the treatment indicator on the first of these,
sharing its bandwidth. Variances fold the take-up estimation error into the
outcome residuals before applying the equivalent-kernel formula, then scale
by the squared take-up.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import warnings

import numpy as np

from .bandwidth import BandwidthPlan, imse_bandwidth, mse_bandwidth
from .bounds import CutoffPair, default_grid, _check_grid
from .data import SIDE_LEFT, SIDE_RIGHT, RdData, Subsample, subsample
from .errors import WeakTakeupError
from .kernels import KernelSpec
from .locpoly import (
    batched_intercepts,
    corrected_residuals,
    fit_local_linear,
    fit_local_quadratic,
    variance_estimate,
)

P_MIN_DEFAULT = 0.05


@dataclass(frozen=True)
class FuzzyBoundsCurve:
    """Take-up-scaled bound curves with the estimated take-up itself."""

    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    p_hat: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray
    crossed: np.ndarray
    p_min: float
    band_lo: np.ndarray | None = None
    band_hi: np.ndarray | None = None

    def with_band(self, band_lo, band_hi) -> "FuzzyBoundsCurve":
        return replace(self, band_lo=np.asarray(band_lo), band_hi=np.asarray(band_hi))


def clamp_takeup(p, p_min=P_MIN_DEFAULT, warn=True):
    """Clamp take-up values into [p_min, 1]; warn when anything moved."""
    p = np.asarray(p, dtype=float)
    clipped = np.clip(p, p_min, 1.0)
    if warn and np.any(clipped != p):
        warnings.warn(
            f"take-up estimates clamped into [{p_min:g}, 1]", RuntimeWarning, stacklevel=2
        )
    return clipped if clipped.ndim else float(clipped)


def takeup_fit(data: RdData, pair: CutoffPair, x0, bandwidth, kernel=KernelSpec(),
               p_min=P_MIN_DEFAULT) -> float:
    """Local linear take-up probability for the low-cutoff group right of l."""
    sub = subsample(data, c=pair.l, side=SIDE_RIGHT)
    fit = fit_local_linear(sub.with_target(sub.d.astype(float)), x0, bandwidth, kernel)
    return clamp_takeup(fit, p_min)


def select_fuzzy_plan(data: RdData, pair: CutoffPair, interval, kernel=KernelSpec(),
                      b_1l=None, b_0h=None, b_0l=None) -> BandwidthPlan:
    """Bandwidths for the three fuzzy arms (plan slots map to +, h, - arms)."""
    sub_plus = subsample(data, c=pair.l, side=SIDE_RIGHT)
    sub_h = subsample(data, c=pair.h, side=SIDE_LEFT)
    sub_minus = subsample(data, c=pair.l, side=SIDE_LEFT)
    return BandwidthPlan(
        b_1l=float(b_1l) if b_1l else imse_bandwidth(sub_plus, interval, kernel),
        b_0h=float(b_0h) if b_0h else imse_bandwidth(sub_h, interval, kernel),
        b_0l=float(b_0l) if b_0l else mse_bandwidth(sub_minus, pair.l, kernel),
    )


@dataclass(frozen=True)
class FuzzyParts:
    """Component fits shared by the fuzzy bounds and their bootstrap."""

    pair: CutoffPair
    grid: np.ndarray
    kernel: KernelSpec
    plan: BandwidthPlan
    p_min: float
    sub_plus: Subsample
    sub_plus_d: Subsample
    sub_h: Subsample
    sub_minus: Subsample
    mu_l: np.ndarray
    mu_h: np.ndarray
    mu_minus_at_l: float
    p_hat: np.ndarray
    v_h: np.ndarray
    v_minus_at_l: float
    v_plus_lower: np.ndarray
    v_plus_upper: np.ndarray
    res_l: np.ndarray
    res_h: np.ndarray
    res_minus: np.ndarray
    res_d: np.ndarray

    @property
    def n_parent(self) -> int:
        return self.sub_plus.n_parent

    @property
    def lower(self) -> np.ndarray:
        return (self.mu_l - self.mu_h) / self.p_hat

    @property
    def upper(self) -> np.ndarray:
        return (self.mu_l - self.mu_minus_at_l) / self.p_hat

    @property
    def var_lower(self) -> np.ndarray:
        return (self.v_plus_lower + self.v_h) / self.p_hat**2

    @property
    def var_upper(self) -> np.ndarray:
        return (self.v_plus_upper + self.v_minus_at_l) / self.p_hat**2


def fuzzy_parts(data: RdData, pair: CutoffPair, grid, plan: BandwidthPlan,
                kernel=KernelSpec(), p_min=P_MIN_DEFAULT) -> FuzzyParts:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    _check_grid(grid, pair.l, pair.h)
    sub_plus = subsample(data, c=pair.l, side=SIDE_RIGHT)
    sub_h = subsample(data, c=pair.h, side=SIDE_LEFT)
    sub_minus = subsample(data, c=pair.l, side=SIDE_LEFT)
    sub_plus_d = sub_plus.with_target(sub_plus.d.astype(float))

    b_plus, b_h, b_minus = plan.b_1l, plan.b_0h, plan.b_0l

    res_l = corrected_residuals(sub_plus, b_plus, kernel)
    res_h = corrected_residuals(sub_h, b_h, kernel)
    res_minus = corrected_residuals(sub_minus, b_minus, kernel)
    res_d = corrected_residuals(sub_plus_d, b_plus, kernel)

    mu_l = batched_intercepts(sub_plus, grid, b_plus, kernel, degree=2)
    mu_h = batched_intercepts(sub_h, grid, b_h, kernel, degree=2)
    mu_minus_at_l = fit_local_quadratic(sub_minus, pair.l, b_minus, kernel)

    p_raw = batched_intercepts(sub_plus_d, grid, b_plus, kernel, degree=2)
    weak = p_raw < p_min
    if weak.any():
        i = int(np.argmax(weak))
        raise WeakTakeupError(grid[i], p_raw[i], p_min)
    p_hat = clamp_takeup(p_raw, p_min)

    v_h = np.array([
        variance_estimate(sub_h, x, b_h, kernel, residuals=res_h) for x in grid
    ])
    v_minus_at_l = variance_estimate(
        sub_minus, pair.l, b_minus, kernel, boundary=True, residuals=res_minus
    )

    # Take-up error enters the outcome residual with the bound itself as the
    # loading, separately per grid point for each of the two bounds.
    lower = (mu_l - mu_h) / p_hat
    upper = (mu_l - mu_minus_at_l) / p_hat
    v_plus_lower = np.array([
        variance_estimate(sub_plus, x, b_plus, kernel, residuals=res_l - r * res_d)
        for x, r in zip(grid, lower)
    ])
    v_plus_upper = np.array([
        variance_estimate(sub_plus, x, b_plus, kernel, residuals=res_l - r * res_d)
        for x, r in zip(grid, upper)
    ])

    return FuzzyParts(
        pair=pair, grid=grid, kernel=kernel, plan=plan, p_min=p_min,
        sub_plus=sub_plus, sub_plus_d=sub_plus_d, sub_h=sub_h, sub_minus=sub_minus,
        mu_l=mu_l, mu_h=mu_h, mu_minus_at_l=float(mu_minus_at_l),
        p_hat=p_hat, v_h=v_h, v_minus_at_l=float(v_minus_at_l),
        v_plus_lower=v_plus_lower, v_plus_upper=v_plus_upper,
        res_l=res_l, res_h=res_h, res_minus=res_minus, res_d=res_d,
    )


def curve_from_fuzzy_parts(parts: FuzzyParts) -> FuzzyBoundsCurve:
    lower, upper = parts.lower, parts.upper
    return FuzzyBoundsCurve(
        grid=parts.grid,
        lower=lower,
        upper=upper,
        p_hat=parts.p_hat,
        var_lower=parts.var_lower,
        var_upper=parts.var_upper,
        crossed=lower > upper,
        p_min=parts.p_min,
    )


def fuzzy_bounds(data: RdData, pair: CutoffPair, grid=None, plan=None,
                 kernel=KernelSpec(), p_min=P_MIN_DEFAULT) -> FuzzyBoundsCurve:
    """Bound curves for the complier effect of the low-cutoff group.

    Requires one-sided compliance: nobody below their cutoff is treated.
    Raises WeakTakeupError when the estimated take-up falls below ``p_min``
    at any grid point.
    """
    if grid is None:
        grid = default_grid(pair)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if plan is None:
        plan = select_fuzzy_plan(data, pair, (grid[0], grid[-1]), kernel)
    parts = fuzzy_parts(data, pair, grid, plan, kernel, p_min)
    return curve_from_fuzzy_parts(parts)
