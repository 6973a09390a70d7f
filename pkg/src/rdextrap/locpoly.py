"""Weighted local polynomial fits, bias correction, and variance estimators.

All fits solve the kernel-weighted normal equations in centered and
bandwidth-scaled coordinates z = (x - x0) / b, which keeps the small normal
matrices well conditioned at narrow bandwidths. With equal main and bias
bandwidths the bias-corrected local linear estimator coincides with the
local quadratic fit, so the corrected value is computed directly from the
degree-two system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Subsample
from .errors import DegenerateDensityError, InsufficientLocalDataError
from .kernels import (
    KernelSpec,
    equivalent_kernel_boundary,
    equivalent_kernel_interior,
    eval_kernel,
)

COND_LIMIT = 1e12
DENSITY_FLOOR = 1e-12
_DET_RTOL = 1e-13


@dataclass(frozen=True)
class LocalFit:
    """Local linear estimate with its quadratic-based bias correction."""

    x0: float
    estimate: float
    bias: float
    corrected: float
    variance: float
    n_eff: int

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")


def _window(sub_x: np.ndarray, x0: float, bandwidth: float):
    lo = np.searchsorted(sub_x, x0 - bandwidth, side="left")
    hi = np.searchsorted(sub_x, x0 + bandwidth, side="right")
    return lo, hi


def _intercept(z, y, w, degree, x0, bandwidth):
    """Intercept of the weighted degree-p fit; raises on rank or conditioning trouble."""
    pos = w > 0
    n_eff = int(np.count_nonzero(pos))
    if n_eff < degree + 1 or np.unique(z[pos]).size < degree + 1:
        raise InsufficientLocalDataError(x0, bandwidth)
    zp = z[pos]
    design = np.vander(zp, N=degree + 1, increasing=True)
    wp = w[pos]
    s = design.T @ (design * wp[:, None])
    t = design.T @ (wp * y[pos])
    if np.linalg.cond(s) > COND_LIMIT:
        raise InsufficientLocalDataError(
            x0, bandwidth, f"ill-conditioned normal matrix at x0={x0:g}"
        )
    beta = np.linalg.solve(s, t)
    return float(beta[0]), n_eff


def _fit(sub: Subsample, x0, bandwidth, kernel, degree, multipliers=None):
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    x0 = float(x0)
    lo, hi = _window(sub.x, x0, bandwidth)
    if hi - lo < degree + 1:
        raise InsufficientLocalDataError(x0, bandwidth)
    z = (sub.x[lo:hi] - x0) / bandwidth
    w = eval_kernel(kernel, z)
    if multipliers is not None:
        m = np.asarray(multipliers, dtype=float)
        if m.size != len(sub):
            raise ValueError("multipliers must align with the subsample rows")
        if not np.isfinite(m).all():
            raise ValueError("multipliers must be finite")
        w = w * m[lo:hi]
    return _intercept(z, sub.y[lo:hi], w, degree, x0, bandwidth)


def fit_local_linear(sub: Subsample, x0, bandwidth, kernel=KernelSpec()) -> float:
    """Kernel-weighted local linear estimate of E[y | x = x0]."""
    return _fit(sub, x0, bandwidth, kernel, degree=1)[0]


def fit_local_quadratic(sub: Subsample, x0, bandwidth, kernel=KernelSpec(), multipliers=None) -> float:
    """Kernel-weighted local quadratic estimate, optionally with per-row multipliers.

    With all multipliers equal to one this equals the bias-corrected local
    linear estimator that uses the same bandwidth for the bias step.
    """
    return _fit(sub, x0, bandwidth, kernel, degree=2, multipliers=multipliers)[0]


def batched_intercepts(sub: Subsample, x0s, bandwidth, kernel=KernelSpec(), degree=2, strict=True) -> np.ndarray:
    """Degree-p intercepts at many evaluation points.

    With ``strict`` the first ill-posed point raises; otherwise such points
    come back as NaN for the caller to patch.
    """
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    out = np.full(x0s.size, np.nan)
    p = degree + 1
    for i, x0 in enumerate(x0s):
        lo, hi = _window(sub.x, x0, bandwidth)
        if hi - lo < p:
            if strict:
                raise InsufficientLocalDataError(x0, bandwidth)
            continue
        z = (sub.x[lo:hi] - x0) / bandwidth
        w = eval_kernel(kernel, z)
        try:
            out[i] = _intercept(z, sub.y[lo:hi], w, degree, x0, bandwidth)[0]
        except InsufficientLocalDataError:
            if strict:
                raise
    return out


def corrected_residuals(sub: Subsample, bandwidth, kernel=KernelSpec()) -> np.ndarray:
    """Residuals u_i = y_i - corrected fit at x_i, same bandwidth throughout.

    Observations where the quadratic fit is ill posed at their own location
    reuse the fit from the nearest location where it is valid.
    """
    fits = batched_intercepts(sub, sub.x, bandwidth, kernel, degree=2, strict=False)
    bad = ~np.isfinite(fits)
    if bad.all():
        raise InsufficientLocalDataError(sub.x[0], bandwidth, "no valid local fits in subsample")
    if bad.any():
        good = np.flatnonzero(~bad)
        pos = np.searchsorted(sub.x[good], sub.x[bad])
        left = np.clip(pos - 1, 0, good.size - 1)
        right = np.clip(pos, 0, good.size - 1)
        take_right = np.abs(sub.x[good][right] - sub.x[bad]) < np.abs(sub.x[good][left] - sub.x[bad])
        fits[bad] = fits[good[np.where(take_right, right, left)]]
    return sub.y - fits


def density_estimate(sub: Subsample, x0, bandwidth, kernel=KernelSpec()) -> float:
    """Kernel density of the running variable at x0 within the subsample."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    lo, hi = _window(sub.x, float(x0), bandwidth)
    if hi == lo:
        return 0.0
    w = eval_kernel(kernel, (sub.x[lo:hi] - float(x0)) / bandwidth)
    return float(np.sum(w)) / (len(sub) * bandwidth)


def variance_estimate(sub: Subsample, x0, bandwidth, kernel=KernelSpec(), boundary=False,
                      residuals=None) -> float:
    """Conditional variance of the bias-corrected estimator at x0.

    Uses the equivalent-kernel linearization with residuals taken at the
    observation locations under the same bandwidth. ``boundary`` switches to
    the one-sided equivalent kernel and assumes the subsample sits on one
    side of x0 (the argument is folded to [0, 1]); the density estimate is
    then doubled, since a plain kernel density halves at a support edge and
    the linearization needs the one-sided density limit.
    """
    if residuals is None:
        residuals = corrected_residuals(sub, bandwidth, kernel)
    x0 = float(x0)
    n = len(sub)
    fhat = density_estimate(sub, x0, bandwidth, kernel)
    if boundary:
        fhat = 2.0 * fhat
    if fhat < DENSITY_FLOOR:
        raise DegenerateDensityError(f"density estimate at x0={x0:g} is numerically zero")
    z = (sub.x - x0) / bandwidth
    if boundary:
        kstar = equivalent_kernel_boundary(kernel, np.abs(z))
    else:
        kstar = equivalent_kernel_interior(kernel, z)
    s2 = float(np.sum(residuals**2 * kstar**2)) / (n * bandwidth * fhat**2)
    return s2 / (n * bandwidth)


def bias_corrected_fit(sub: Subsample, x0, bandwidth, kernel=KernelSpec(), boundary=False,
                       residuals=None) -> LocalFit:
    """Local linear estimate, its quadratic bias correction, and variance."""
    estimate = fit_local_linear(sub, x0, bandwidth, kernel)
    corrected, n_eff = _fit(sub, x0, bandwidth, kernel, degree=2)
    variance = variance_estimate(
        sub, x0, bandwidth, kernel, boundary=boundary, residuals=residuals
    )
    return LocalFit(
        x0=float(x0),
        estimate=estimate,
        bias=estimate - corrected,
        corrected=corrected,
        variance=variance,
        n_eff=n_eff,
    )


def bootstrap_intercepts(sub: Subsample, x0s, bandwidth, xi_plus_one, kernel=KernelSpec()) -> np.ndarray:
    """Multiplier-weighted local quadratic intercepts, batched over replications.

    ``xi_plus_one`` has shape (n_parent, M) and is indexed by observation
    identity, so subsamples drawn from the same rows share multipliers.
    Ill-posed replication/point pairs come back NaN; positivity of the
    multipliers keeps the weighted normal matrix comparable to the
    unweighted one, so NaNs only flag genuinely degenerate windows.
    """
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    n_rep = xi_plus_one.shape[1]
    out = np.full((x0s.size, n_rep), np.nan)
    for g, x0 in enumerate(x0s):
        lo, hi = _window(sub.x, x0, bandwidth)
        if hi - lo < 3:
            continue
        z = (sub.x[lo:hi] - x0) / bandwidth
        base = eval_kernel(kernel, z)
        pos = base > 0
        if np.count_nonzero(pos) < 3 or np.unique(z[pos]).size < 3:
            continue
        z = z[pos]
        y = sub.y[lo:hi][pos]
        w = base[pos][:, None] * xi_plus_one[sub.row_id[lo:hi][pos], :]
        powers = np.vander(z, N=5, increasing=True).T  # rows z^0 .. z^4
        stacked = np.vstack([powers, powers[:3] * y])
        moms = stacked @ w  # (8, M)
        s = np.empty((n_rep, 3, 3))
        for j in range(3):
            for k in range(3):
                s[:, j, k] = moms[j + k]
        t = moms[5:8].T
        det = np.linalg.det(s)
        scale = np.maximum(moms[0], 1e-300) ** 3
        good = np.isfinite(det) & (np.abs(det) > _DET_RTOL * scale)
        if good.any():
            beta = np.linalg.solve(s[good], t[good][:, :, None])[:, 0, 0]
            out[g, good] = beta
    return out
