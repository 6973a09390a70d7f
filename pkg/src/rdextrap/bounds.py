"""Sharp-design bounds on extrapolated effects between two cutoffs.

The lower curve contrasts the treated fit of the low-cutoff group with the
control fit of the high-cutoff group at the same point; the upper curve
contrasts it with the low-cutoff control level at its own cutoff, estimated
from the left with the boundary equivalent kernel. Under the reversed shape
restrictions the two contrasts swap roles. All component fits are
bias-corrected local fits with equal main and bias bandwidths.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bandwidth import BandwidthPlan, imse_bandwidth, mse_bandwidth
from .data import SIDE_LEFT, SIDE_RIGHT, RdData, Subsample, subsample
from .kernels import KernelSpec
from .locpoly import (
    batched_intercepts,
    corrected_residuals,
    fit_local_quadratic,
    variance_estimate,
)

DIRECTION_INCREASING = "increasing_dominant"
DIRECTION_DECREASING = "decreasing_antidominant"
DIRECTIONS = (DIRECTION_INCREASING, DIRECTION_DECREASING)

GRID_TRIM = 0.05
DEFAULT_GRID_SIZE = 50


@dataclass(frozen=True)
class CutoffPair:
    """Two cutoff locations with l < h."""

    l: float
    h: float

    def __post_init__(self):
        if not self.l < self.h:
            raise ValueError("cutoff pair requires l < h")


@dataclass(frozen=True)
class BoundsCurve:
    """Estimated bound curves on a grid, with variances and optional extras.

    ``crossed`` flags grid points where sampling noise pushed the lower
    estimate above the upper one; estimates are never reordered.
    """

    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray
    crossed: np.ndarray
    cb_point: np.ndarray | None = None
    band_lo: np.ndarray | None = None
    band_hi: np.ndarray | None = None

    def with_band(self, band_lo, band_hi) -> "BoundsCurve":
        return replace(self, band_lo=np.asarray(band_lo), band_hi=np.asarray(band_hi))

    def with_cb(self, cb_point) -> "BoundsCurve":
        return replace(self, cb_point=np.asarray(cb_point))


def default_grid(pair: CutoffPair, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Equispaced grid on the trimmed interior of (l, h)."""
    width = pair.h - pair.l
    return np.linspace(pair.l + GRID_TRIM * width, pair.h - GRID_TRIM * width, size)


def _check_grid(grid: np.ndarray, lo: float, hi: float):
    if grid.size == 0:
        raise ValueError("grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] <= lo or grid[-1] >= hi:
        raise ValueError(
            f"grid must lie strictly inside ({lo:g}, {hi:g}); got [{grid[0]:g}, {grid[-1]:g}]"
        )


def select_sharp_plan(data: RdData, pair: CutoffPair, interval, kernel=KernelSpec(),
                      b_1l=None, b_0h=None, b_0l=None) -> BandwidthPlan:
    """Interval-optimal bandwidths for the two curves, pointwise for the boundary level.

    Explicit keyword values override the automatic choice arm by arm.
    """
    sub_1l = subsample(data, d=1, c=pair.l, side=SIDE_RIGHT)
    sub_0h = subsample(data, d=0, c=pair.h, side=SIDE_LEFT)
    sub_0l = subsample(data, d=0, c=pair.l, side=SIDE_LEFT)
    return BandwidthPlan(
        b_1l=float(b_1l) if b_1l else imse_bandwidth(sub_1l, interval, kernel),
        b_0h=float(b_0h) if b_0h else imse_bandwidth(sub_0h, interval, kernel),
        b_0l=float(b_0l) if b_0l else mse_bandwidth(sub_0l, pair.l, kernel),
    )


@dataclass(frozen=True)
class SharpParts:
    """Component fits shared by the bounds, the extrapolation, and the bootstrap."""

    pair: CutoffPair
    grid: np.ndarray
    kernel: KernelSpec
    plan: BandwidthPlan
    sub_1l: Subsample
    sub_0h: Subsample
    sub_0l: Subsample
    mu_1l: np.ndarray
    mu_0h: np.ndarray
    mu_0l_at_l: float
    v_1l: np.ndarray
    v_0h: np.ndarray
    v_0l_at_l: float
    res_1l: np.ndarray
    res_0h: np.ndarray
    res_0l: np.ndarray

    @property
    def n_parent(self) -> int:
        return self.sub_1l.n_parent

    @property
    def contrast_down(self) -> np.ndarray:
        """mu_1l(x) - mu_0h(x): the comparison-group contrast."""
        return self.mu_1l - self.mu_0h

    @property
    def contrast_up(self) -> np.ndarray:
        """mu_1l(x) - mu_0l(l): the own-boundary contrast."""
        return self.mu_1l - self.mu_0l_at_l

    @property
    def var_down(self) -> np.ndarray:
        return self.v_1l + self.v_0h

    @property
    def var_up(self) -> np.ndarray:
        return self.v_1l + self.v_0l_at_l


def sharp_parts(data: RdData, pair: CutoffPair, grid, plan: BandwidthPlan,
                kernel=KernelSpec()) -> SharpParts:
    """Fit every component once for a grid of evaluation points."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    _check_grid(grid, pair.l, pair.h)
    sub_1l = subsample(data, d=1, c=pair.l, side=SIDE_RIGHT)
    sub_0h = subsample(data, d=0, c=pair.h, side=SIDE_LEFT)
    sub_0l = subsample(data, d=0, c=pair.l, side=SIDE_LEFT)

    res_1l = corrected_residuals(sub_1l, plan.b_1l, kernel)
    res_0h = corrected_residuals(sub_0h, plan.b_0h, kernel)
    res_0l = corrected_residuals(sub_0l, plan.b_0l, kernel)

    mu_1l = batched_intercepts(sub_1l, grid, plan.b_1l, kernel, degree=2)
    mu_0h = batched_intercepts(sub_0h, grid, plan.b_0h, kernel, degree=2)
    mu_0l_at_l = fit_local_quadratic(sub_0l, pair.l, plan.b_0l, kernel)

    v_1l = np.array([
        variance_estimate(sub_1l, x, plan.b_1l, kernel, residuals=res_1l) for x in grid
    ])
    v_0h = np.array([
        variance_estimate(sub_0h, x, plan.b_0h, kernel, residuals=res_0h) for x in grid
    ])
    v_0l_at_l = variance_estimate(
        sub_0l, pair.l, plan.b_0l, kernel, boundary=True, residuals=res_0l
    )

    return SharpParts(
        pair=pair, grid=grid, kernel=kernel, plan=plan,
        sub_1l=sub_1l, sub_0h=sub_0h, sub_0l=sub_0l,
        mu_1l=mu_1l, mu_0h=mu_0h, mu_0l_at_l=float(mu_0l_at_l),
        v_1l=v_1l, v_0h=v_0h, v_0l_at_l=float(v_0l_at_l),
        res_1l=res_1l, res_0h=res_0h, res_0l=res_0l,
    )


def curve_from_parts(parts: SharpParts, direction=DIRECTION_INCREASING) -> BoundsCurve:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    if direction == DIRECTION_INCREASING:
        lower, upper = parts.contrast_down, parts.contrast_up
        var_lower, var_upper = parts.var_down, parts.var_up
    else:
        lower, upper = parts.contrast_up, parts.contrast_down
        var_lower, var_upper = parts.var_up, parts.var_down
    var_upper = np.broadcast_to(np.asarray(var_upper, dtype=float), lower.shape).copy()
    var_lower = np.broadcast_to(np.asarray(var_lower, dtype=float), lower.shape).copy()
    return BoundsCurve(
        grid=parts.grid,
        lower=lower,
        upper=upper,
        var_lower=var_lower,
        var_upper=var_upper,
        crossed=lower > upper,
    )


def sharp_bounds(data: RdData, pair: CutoffPair, grid=None, plan=None,
                 kernel=KernelSpec(), direction=DIRECTION_INCREASING) -> BoundsCurve:
    """Estimated bound curves for the low-cutoff group on points inside (l, h)."""
    if grid is None:
        grid = default_grid(pair)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if plan is None:
        plan = select_sharp_plan(data, pair, (grid[0], grid[-1]), kernel)
    parts = sharp_parts(data, pair, grid, plan, kernel)
    return curve_from_parts(parts, direction)


def constant_bias_extrapolation(data: RdData, pair: CutoffPair, grid=None, plan=None,
                                kernel=KernelSpec()) -> np.ndarray:
    """Point extrapolation that assumes the control-group gap stays constant.

    Returns mu_1l(x) - mu_0h(x) + [mu_0h(l) - mu_0l(l)] on the grid, all from
    bias-corrected fits. Equals the lower bound curve when the gap at l is
    zero, and lies inside the bounds whenever the shape restrictions hold.
    """
    if grid is None:
        grid = default_grid(pair)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if plan is None:
        plan = select_sharp_plan(data, pair, (grid[0], grid[-1]), kernel)
    parts = sharp_parts(data, pair, grid, plan, kernel)
    mu_0h_at_l = fit_local_quadratic(parts.sub_0h, pair.l, plan.b_0h, kernel)
    gap_at_l = mu_0h_at_l - parts.mu_0l_at_l
    return parts.contrast_down + gap_at_l


@dataclass(frozen=True)
class MultiCutoffPlan:
    """Bandwidths for the treated arm, boundary arm, and each control arm."""

    b_treated: float
    b_boundary: float
    b_control: dict


def multi_cutoff_bounds(data: RdData, cutoffs, grid=None, plans=None,
                        kernel=KernelSpec()) -> BoundsCurve:
    """Bounds for the lowest-cutoff group tightened by intermediate groups.

    Under sequential dominance the lower bound at x uses the control curve of
    the smallest cutoff strictly above x; the upper bound is unchanged from
    the two-cutoff case. With two cutoffs this reduces exactly to
    ``sharp_bounds``.
    """
    cutoffs = np.asarray(cutoffs, dtype=float)
    if cutoffs.size < 2 or np.any(np.diff(cutoffs) <= 0):
        raise ValueError("cutoffs must be at least two strictly increasing values")
    c0, c_top = float(cutoffs[0]), float(cutoffs[-1])
    outer = CutoffPair(c0, c_top)
    if grid is None:
        grid = default_grid(outer)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    _check_grid(grid, c0, c_top)

    sub_1 = subsample(data, d=1, c=c0, side=SIDE_RIGHT)
    sub_0_base = subsample(data, d=0, c=c0, side=SIDE_LEFT)

    # Smallest cutoff strictly above each grid point brackets it.
    bracket = np.searchsorted(cutoffs, grid, side="right")
    upper_cutoffs = [float(cutoffs[k]) for k in sorted(set(bracket))]

    if plans is None:
        b_control = {}
        for ck in upper_cutoffs:
            pts = grid[cutoffs[bracket] == ck]
            sub_ck = subsample(data, d=0, c=ck, side=SIDE_LEFT)
            b_control[ck] = imse_bandwidth(sub_ck, (pts[0], pts[-1]), kernel)
        plans = MultiCutoffPlan(
            b_treated=imse_bandwidth(sub_1, (grid[0], grid[-1]), kernel),
            b_boundary=mse_bandwidth(sub_0_base, c0, kernel),
            b_control=b_control,
        )

    res_1 = corrected_residuals(sub_1, plans.b_treated, kernel)
    res_0_base = corrected_residuals(sub_0_base, plans.b_boundary, kernel)
    mu_1 = batched_intercepts(sub_1, grid, plans.b_treated, kernel, degree=2)
    v_1 = np.array([
        variance_estimate(sub_1, x, plans.b_treated, kernel, residuals=res_1) for x in grid
    ])
    mu_0_at_c0 = fit_local_quadratic(sub_0_base, c0, plans.b_boundary, kernel)
    v_0_at_c0 = variance_estimate(
        sub_0_base, c0, plans.b_boundary, kernel, boundary=True, residuals=res_0_base
    )

    mu_ctrl = np.empty_like(grid)
    v_ctrl = np.empty_like(grid)
    for ck in upper_cutoffs:
        mask = cutoffs[bracket] == ck
        sub_ck = subsample(data, d=0, c=ck, side=SIDE_LEFT)
        b_ck = plans.b_control[ck]
        res_ck = corrected_residuals(sub_ck, b_ck, kernel)
        mu_ctrl[mask] = batched_intercepts(sub_ck, grid[mask], b_ck, kernel, degree=2)
        v_ctrl[mask] = [
            variance_estimate(sub_ck, x, b_ck, kernel, residuals=res_ck) for x in grid[mask]
        ]

    lower = mu_1 - mu_ctrl
    upper = mu_1 - mu_0_at_c0
    return BoundsCurve(
        grid=grid,
        lower=lower,
        upper=upper,
        var_lower=v_1 + v_ctrl,
        var_upper=v_1 + v_0_at_c0,
        crossed=lower > upper,
    )


@dataclass(frozen=True)
class DominanceDiagnostic:
    """Left-limit contrast of the two control curves at the low cutoff."""

    statistic: float
    std_error: float
    flag: str  # "consistent" or "refuted"


def dominance_diagnostic(data: RdData, pair: CutoffPair, plan=None,
                         kernel=KernelSpec()) -> DominanceDiagnostic:
    """One-sided 5% check of the dominance restriction at the low cutoff.

    The restriction is refuted when the low-cutoff control level exceeds the
    high-cutoff control level as x approaches l from below by more than 1.96
    standard errors. Both levels are boundary fits from left-side data only.
    """
    sub_0l = subsample(data, d=0, c=pair.l, side=SIDE_LEFT)
    sub_0h = subsample(data, d=0, c=pair.h, side=SIDE_LEFT)
    sub_0h_left = sub_0h.restrict(sub_0h.x < pair.l, label=f"x<{pair.l:g}")

    b_0l = plan.b_0l if plan is not None else mse_bandwidth(sub_0l, pair.l, kernel)
    b_0h_left = mse_bandwidth(sub_0h_left, pair.l, kernel)

    res_0l = corrected_residuals(sub_0l, b_0l, kernel)
    res_0h = corrected_residuals(sub_0h_left, b_0h_left, kernel)

    mu_0l = fit_local_quadratic(sub_0l, pair.l, b_0l, kernel)
    mu_0h = fit_local_quadratic(sub_0h_left, pair.l, b_0h_left, kernel)
    v_0l = variance_estimate(sub_0l, pair.l, b_0l, kernel, boundary=True, residuals=res_0l)
    v_0h = variance_estimate(
        sub_0h_left, pair.l, b_0h_left, kernel, boundary=True, residuals=res_0h
    )

    statistic = float(mu_0l - mu_0h)
    se = float(np.sqrt(v_0l + v_0h))
    flag = "refuted" if statistic > 1.96 * se else "consistent"
    return DominanceDiagnostic(statistic=statistic, std_error=se, flag=flag)
