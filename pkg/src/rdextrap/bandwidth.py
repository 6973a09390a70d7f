"""Plug-in bandwidth selection for local linear estimation.

The pointwise selector minimizes the asymptotic MSE of the local linear fit,

    b = [ sigma^2 R / (f(x0) mu''(x0)^2 c_bias^2) ]^(1/5) n^(-1/5),

with the curvature from a global quartic pilot fit, the residual variance
from the same pilot, and a kernel density estimate for f. At interior
points c_bias is the kernel's second moment and R its roughness; when all
data sit on one side of x0 the constants switch to those of the one-sided
local-linear equivalent kernel and the density estimate is doubled to undo
the half-window loss of the plain kernel density at a support edge. The
interval selector integrates the squared-bias and variance constants over
the interval with 64-point Gauss-Legendre quadrature. Outputs are clamped
so that at least ten observations carry weight and the window never
exceeds half the subsample range.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .data import Subsample
from .errors import PilotFailureError
from .kernels import KernelSpec, eval_kernel, moments
from .locpoly import density_estimate

MIN_PILOT_N = 20
MIN_NEIGHBORS = 10
_QUAD_NODES = 64
_CURVATURE_FLOOR = 1e-300


@dataclass(frozen=True)
class BandwidthPlan:
    """Bandwidths for the three estimation arms; bias bandwidths equal these.

    For fuzzy designs the same slots hold the bandwidths of the
    (c=l, x>=l), (c=h, x<h), and (c=l, x<l) arms respectively.
    """

    b_1l: float
    b_0h: float
    b_0l: float

    def __post_init__(self):
        for name in ("b_1l", "b_0h", "b_0l"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive and finite")


@dataclass(frozen=True)
class _Pilot:
    """Global quartic fit in a scaled domain, with the coefficient covariance.

    The covariance feeds a debiasing step: squared-curvature plug-ins use
    max(mu2_hat^2 - 4 Var(mu2_hat), 0), treating curvature within two
    standard errors of zero as zero, so noise-dominated curvature pushes
    the bandwidth to its upper clamp instead of collapsing it.
    """

    coef: np.ndarray
    cov: np.ndarray
    mid: float
    half: float
    sigma2: float
    kde_bandwidth: float

    def _mu2_basis(self, x):
        t = (np.asarray(x, dtype=float) - self.mid) / self.half
        scale = 1.0 / self.half**2
        basis = np.zeros(np.shape(t) + (5,))
        basis[..., 2] = 2.0 * scale
        basis[..., 3] = 6.0 * t * scale
        basis[..., 4] = 12.0 * t * t * scale
        return basis

    def mu2(self, x):
        return self._mu2_basis(x) @ self.coef

    def mu2_var(self, x):
        basis = self._mu2_basis(x)
        return np.einsum("...i,ij,...j->...", basis, self.cov, basis)

    def mu2_squared_debiased(self, x):
        return np.maximum(self.mu2(x) ** 2 - 4.0 * self.mu2_var(x), 0.0)


def silverman_bandwidth(x: np.ndarray) -> float:
    """Rule-of-thumb density bandwidth used inside the plug-in selectors."""
    x = np.asarray(x, dtype=float)
    n = x.size
    sd = float(np.std(x))
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread <= 0:
        spread = max(sd, 1e-8)
    return 0.9 * spread * n ** (-0.2)


def _pilot_fit(sub: Subsample) -> _Pilot:
    x, y = sub.x, sub.y
    if np.unique(x).size < 5:
        raise PilotFailureError("fewer than five distinct x values for the quartic pilot",
                                fallback=True)
    lo, hi = sub.x_range
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    t = (x - mid) / half
    design = np.vander(t, N=5, increasing=True)
    gram = design.T @ design
    if np.linalg.cond(gram) > 1e12:
        raise PilotFailureError("quartic pilot design is rank deficient", fallback=True)
    coef = np.linalg.solve(gram, design.T @ y)
    resid = y - design @ coef
    dof = max(x.size - 5, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(gram)
    return _Pilot(coef=coef, cov=cov, mid=mid, half=half, sigma2=sigma2,
                  kde_bandwidth=silverman_bandwidth(x))


def _nn_distance(x: np.ndarray, x0: float, k: int = MIN_NEIGHBORS) -> float:
    d = np.sort(np.abs(x - x0))
    return float(d[min(k - 1, d.size - 1)])


def _clamp(sub: Subsample, raw: float, anchor_points) -> float:
    lo = max(_nn_distance(sub.x, p) for p in anchor_points)
    span = sub.x_range[1] - sub.x_range[0]
    hi = span / 2.0 if span > 0 else max(lo, 1e-8)
    return max(min(raw, hi), lo)


def _fallback_span(sub: Subsample) -> float:
    span = sub.x_range[1] - sub.x_range[0]
    if span <= 0:
        raise PilotFailureError("subsample has no x spread", fallback=False)
    return span / 2.0


@lru_cache(maxsize=None)
def _boundary_linear_constants(family: str):
    """Bias and variance constants of the one-sided local-linear fit.

    The one-sided equivalent kernel is (nu_2 - nu_1 u) K(u) / det on [0, 1];
    its roughness replaces R(K) and |row . (nu_2, nu_3)| replaces pi_2 in the
    plug-in formula.
    """
    nu = moments(KernelSpec(family)).nu
    det = nu[0] * nu[2] - nu[1] ** 2
    c_bias = abs((nu[2] ** 2 - nu[1] * nu[3]) / det)
    nodes, weights = np.polynomial.legendre.leggauss(_QUAD_NODES)
    u = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    ek = (nu[2] - nu[1] * u) * eval_kernel(KernelSpec(family), u) / det
    rough = float(np.sum(w * ek**2))
    return c_bias, rough


def _is_left_data_boundary(sub: Subsample, x0: float) -> bool:
    return x0 >= sub.x[-1]


def _is_right_data_boundary(sub: Subsample, x0: float) -> bool:
    return x0 <= sub.x[0]


def mse_bandwidth(sub: Subsample, x0, kernel=KernelSpec()) -> float:
    """Pointwise MSE-optimal bandwidth, b proportional to n^(-1/5).

    Uses one-sided constants and a boundary-corrected density when the
    subsample lies entirely on one side of x0.
    """
    x0 = float(x0)
    n = len(sub)
    if n < MIN_PILOT_N:
        return _fallback_span(sub)
    pilot = _pilot_fit(sub)
    mu2_sq = float(pilot.mu2_squared_debiased(x0))
    f = density_estimate(sub, x0, pilot.kde_bandwidth, kernel)
    mom = moments(kernel)
    if _is_left_data_boundary(sub, x0) or _is_right_data_boundary(sub, x0):
        c_bias, rough = _boundary_linear_constants(kernel.family)
        f = 2.0 * f
    else:
        c_bias, rough = mom.pi[2], mom.roughness
    denom = c_bias**2 * mu2_sq * max(f, 0.0)
    if denom < _CURVATURE_FLOOR:
        raw = np.inf
    else:
        raw = (pilot.sigma2 * rough / denom) ** 0.2 * n ** (-0.2)
    return _clamp(sub, raw, (x0,))


def imse_bandwidth(sub: Subsample, interval, kernel=KernelSpec()) -> float:
    """Interval IMSE-optimal bandwidth; degenerate intervals reduce to the MSE rule."""
    lo, hi = float(interval[0]), float(interval[1])
    if hi < lo:
        raise ValueError("interval must satisfy lo <= hi")
    x_lo, x_hi = sub.x_range
    if lo < x_lo or hi > x_hi:
        raise ValueError(
            f"interval [{lo:g}, {hi:g}] is outside the subsample x range [{x_lo:g}, {x_hi:g}]"
        )
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        return mse_bandwidth(sub, 0.5 * (lo + hi), kernel)
    n = len(sub)
    if n < MIN_PILOT_N:
        return _fallback_span(sub)
    pilot = _pilot_fit(sub)
    nodes, weights = np.polynomial.legendre.leggauss(_QUAD_NODES)
    xg = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    wg = 0.5 * (hi - lo) * weights
    mu2_sq = pilot.mu2_squared_debiased(xg)
    fg = np.array([density_estimate(sub, p, pilot.kde_bandwidth, kernel) for p in xg])
    mom = moments(kernel)
    bias_integral = float(np.sum(wg * mu2_sq * fg))
    denom = mom.pi[2] ** 2 * bias_integral
    if denom < _CURVATURE_FLOOR:
        raw = np.inf
    else:
        raw = (mom.roughness * pilot.sigma2 * (hi - lo) / denom) ** 0.2 * n ** (-0.2)
    return _clamp(sub, raw, (lo, hi))
