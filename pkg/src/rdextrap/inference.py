"""Pointwise and uniform inference for the bound curves.

The uniform band perturbs every component fit with two-point multiplier
weights, rebuilds both bound curves as local quadratic fits under the fixed
first-stage bandwidths, and takes empirical quantiles of the studentized
maximum deviations over the grid, one per side. Positivity of the weights
keeps every weighted normal matrix comparable to the unweighted one, which
is why the two-point multiplier is used instead of a Gaussian one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from . import bounds as _bounds
from . import fuzzy as _fuzzy
from .bounds import BoundsCurve, CutoffPair, DIRECTION_INCREASING, DIRECTIONS
from .data import RdData
from .errors import BootstrapInstabilityError, InvalidVarianceError
from .kernels import KernelSpec
from .locpoly import bootstrap_intercepts
from .rng import stream
from .validation import check_interval

MAMMEN_LOW = (1.0 - np.sqrt(5.0)) / 2.0
MAMMEN_HIGH = (1.0 + np.sqrt(5.0)) / 2.0
MAMMEN_P_LOW = (1.0 + np.sqrt(5.0)) / (2.0 * np.sqrt(5.0))

MIN_REPLICATIONS = 100
MAX_DISCARD_SHARE = 0.05


def mammen_draws(rng: np.random.Generator, size) -> np.ndarray:
    """Two-point multiplier draws with mean zero, unit variance, and value + 1 > 0."""
    u = rng.random(size)
    return np.where(u < MAMMEN_P_LOW, MAMMEN_LOW, MAMMEN_HIGH)


@dataclass(frozen=True)
class PointwiseCI:
    """Wald intervals per bound and the set interval for the effect itself."""

    x0: float
    alpha: float
    ci_lower_bound: tuple
    ci_upper_bound: tuple
    ci_set: tuple
    crit_set: float


def imbens_manski_critical(delta: float, sigma_lower: float, sigma_upper: float,
                           alpha: float = 0.05) -> float:
    """Critical value that adapts to the estimated width of the identified set.

    Solves Phi(c + delta / max(sigma)) - Phi(-c) = 1 - alpha by bisection;
    the root always lies between the one-sided and two-sided normal critical
    values.
    """
    z_two = norm.ppf(1.0 - alpha / 2.0)
    z_one = norm.ppf(1.0 - alpha)
    delta = max(float(delta), 0.0)
    sigma = max(float(sigma_lower), float(sigma_upper))
    if sigma <= 0.0:
        return z_one if delta > 0 else z_two
    ratio = delta / sigma
    if ratio > 40.0:
        return z_one

    def g(c):
        return norm.cdf(c + ratio) - norm.cdf(-c) - (1.0 - alpha)

    if g(z_one) >= 0.0:
        return z_one
    return float(brentq(g, z_one, z_two, xtol=1e-12))


def pointwise_cis(curve: BoundsCurve, x0, alpha: float = 0.05) -> PointwiseCI:
    """Pointwise intervals at a grid point of an estimated curve."""
    grid = np.asarray(curve.grid)
    idx = np.flatnonzero(np.isclose(grid, float(x0), rtol=0.0, atol=1e-12))
    if idx.size == 0:
        raise ValueError(f"x0={x0:g} is not on the curve grid")
    i = int(idx[0])
    vl, vu = float(curve.var_lower[i]), float(curve.var_upper[i])
    if not (np.isfinite(vl) and np.isfinite(vu)):
        raise InvalidVarianceError(f"nonfinite variance at x0={x0:g}")
    lo_est, up_est = float(curve.lower[i]), float(curve.upper[i])
    z = norm.ppf(1.0 - alpha / 2.0)
    sl, su = np.sqrt(vl), np.sqrt(vu)
    crit = imbens_manski_critical(up_est - lo_est, sl, su, alpha)
    return PointwiseCI(
        x0=float(x0),
        alpha=float(alpha),
        ci_lower_bound=(lo_est - z * sl, lo_est + z * sl),
        ci_upper_bound=(up_est - z * su, up_est + z * su),
        ci_set=(lo_est - crit * sl, up_est + crit * su),
        crit_set=crit,
    )


@dataclass(frozen=True)
class UniformBand:
    """Simultaneous band for the bound pair over a grid."""

    grid: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    alpha: float
    crit_lower: float
    crit_upper: float
    replications: int
    seed: int
    n_discarded: int


def excludes_zero(band: UniformBand) -> bool:
    """True when no grid point's band segment contains zero."""
    return bool(np.all((band.lo > 0.0) | (band.hi < 0.0)))


def band_grid(interval, size: int) -> np.ndarray:
    """Evaluation grid for the supremum: equispaced points plus the endpoints."""
    lo, hi = float(interval[0]), float(interval[1])
    return np.union1d(np.linspace(lo, hi, int(size)), np.asarray([lo, hi]))


def _xi_plus_one(seed: int, n_parent: int, n_boot: int) -> np.ndarray:
    """Multiplier matrix keyed by (seed, replication); rows are observations."""
    out = np.empty((n_parent, n_boot))
    for m in range(n_boot):
        out[:, m] = mammen_draws(stream(seed, m), n_parent) + 1.0
    return out


def _studentize(dev: np.ndarray, var: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Deviation over standard deviation, floored so noiseless fits give zero."""
    sd = np.maximum(np.sqrt(var), 1e-12 * (1.0 + np.abs(scale)))
    return dev / sd[:, None]


def _sup_stats(dev_over_sd: np.ndarray) -> np.ndarray:
    """Per-replication maxima of the studentized deviation over the grid."""
    return np.max(dev_over_sd, axis=0)


def _critical_values(s_down, s_up, n_boot, alpha):
    """Order-statistic quantiles of the sup deviations, one per side.

    Each critical value is floored at the pointwise normal quantile: the sup
    of the limiting centered field is stochastically no smaller than any
    single coordinate, so the floor only removes finite-sample bootstrap
    dips. It also guarantees the band contains every pointwise interval at
    the same level.
    """
    bad = ~(np.isfinite(s_down) & np.isfinite(s_up))
    n_bad = int(np.count_nonzero(bad))
    if n_bad > MAX_DISCARD_SHARE * n_boot:
        raise BootstrapInstabilityError(
            f"{n_bad} of {n_boot} bootstrap replications discarded"
        )
    q = 1.0 - alpha / 2.0
    floor = float(norm.ppf(q))
    crit_down = max(float(np.quantile(s_down[~bad], q, method="higher")), floor)
    crit_up = max(float(np.quantile(s_up[~bad], q, method="higher")), floor)
    return crit_down, crit_up, n_bad


def _band_from_sharp_parts(parts, n_boot: int, alpha: float, seed: int,
                           direction=DIRECTION_INCREASING) -> UniformBand:
    xi = _xi_plus_one(seed, parts.n_parent, n_boot)
    k, plan = parts.kernel, parts.plan
    boot_1l = bootstrap_intercepts(parts.sub_1l, parts.grid, plan.b_1l, xi, k)
    boot_0h = bootstrap_intercepts(parts.sub_0h, parts.grid, plan.b_0h, xi, k)
    boot_0l = bootstrap_intercepts(parts.sub_0l, np.array([parts.pair.l]), plan.b_0l, xi, k)

    down_star = boot_1l - boot_0h
    up_star = boot_1l - boot_0l
    s_down = _sup_stats(_studentize(
        down_star - parts.contrast_down[:, None], parts.var_down, parts.contrast_down
    ))
    s_up = _sup_stats(_studentize(
        up_star - parts.contrast_up[:, None],
        np.broadcast_to(parts.var_up, parts.grid.shape),
        parts.contrast_up,
    ))
    crit_down, crit_up, n_bad = _critical_values(s_down, s_up, n_boot, alpha)

    if direction == DIRECTION_INCREASING:
        lo = parts.contrast_down - crit_down * np.sqrt(parts.var_down)
        hi = parts.contrast_up + crit_up * np.sqrt(parts.var_up)
        crit_lower, crit_upper = crit_down, crit_up
    else:
        lo = parts.contrast_up - crit_up * np.sqrt(parts.var_up)
        hi = parts.contrast_down + crit_down * np.sqrt(parts.var_down)
        crit_lower, crit_upper = crit_up, crit_down

    return UniformBand(
        grid=parts.grid, lo=lo, hi=hi, alpha=float(alpha),
        crit_lower=crit_lower, crit_upper=crit_upper,
        replications=int(n_boot), seed=int(seed), n_discarded=n_bad,
    )


def uniform_band_sharp(data: RdData, pair: CutoffPair, interval, plan=None,
                       kernel=KernelSpec(), n_boot: int = 1000, alpha: float = 0.05,
                       seed: int = 0, grid=None, grid_size: int = 50,
                       direction=DIRECTION_INCREASING) -> UniformBand:
    """Multiplier-bootstrap uniform band for the sharp-design bound pair.

    Bandwidths are selected once and reused in every replication; the
    supremum is approximated by the maximum over the grid.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    if n_boot < MIN_REPLICATIONS:
        raise ValueError(f"need at least {MIN_REPLICATIONS} bootstrap replications")
    interval = check_interval(interval, pair)
    if grid is None:
        grid = band_grid(interval, grid_size)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if plan is None:
        plan = _bounds.select_sharp_plan(data, pair, interval, kernel)
    parts = _bounds.sharp_parts(data, pair, grid, plan, kernel)
    return _band_from_sharp_parts(parts, n_boot, alpha, seed, direction)


def _band_from_fuzzy_parts(parts, n_boot: int, alpha: float, seed: int) -> UniformBand:
    xi = _xi_plus_one(seed, parts.n_parent, n_boot)
    k, plan = parts.kernel, parts.plan
    boot_l = bootstrap_intercepts(parts.sub_plus, parts.grid, plan.b_1l, xi, k)
    boot_h = bootstrap_intercepts(parts.sub_h, parts.grid, plan.b_0h, xi, k)
    boot_minus = bootstrap_intercepts(
        parts.sub_minus, np.array([parts.pair.l]), plan.b_0l, xi, k
    )
    # Same multiplier rows as boot_l by construction: identical observations.
    boot_p = bootstrap_intercepts(parts.sub_plus_d, parts.grid, plan.b_1l, xi, k)
    boot_p = np.clip(boot_p, parts.p_min, 1.0)

    lower_star = (boot_l - boot_h) / boot_p
    upper_star = (boot_l - boot_minus) / boot_p
    s_lower = _sup_stats(_studentize(
        lower_star - parts.lower[:, None], parts.var_lower, parts.lower
    ))
    s_upper = _sup_stats(_studentize(
        upper_star - parts.upper[:, None], parts.var_upper, parts.upper
    ))
    crit_lower, crit_upper, n_bad = _critical_values(s_lower, s_upper, n_boot, alpha)

    lo = parts.lower - crit_lower * np.sqrt(parts.var_lower)
    hi = parts.upper + crit_upper * np.sqrt(parts.var_upper)
    return UniformBand(
        grid=parts.grid, lo=lo, hi=hi, alpha=float(alpha),
        crit_lower=crit_lower, crit_upper=crit_upper,
        replications=int(n_boot), seed=int(seed), n_discarded=n_bad,
    )


def uniform_band_fuzzy(data: RdData, pair: CutoffPair, interval, plan=None,
                       kernel=KernelSpec(), n_boot: int = 1000, alpha: float = 0.05,
                       seed: int = 0, grid=None, grid_size: int = 50,
                       p_min=_fuzzy.P_MIN_DEFAULT) -> UniformBand:
    """Uniform band for the fuzzy bound pair.

    The multipliers for the outcome fit and the take-up fit are identical
    within a replication because both use the same observations.
    """
    if n_boot < MIN_REPLICATIONS:
        raise ValueError(f"need at least {MIN_REPLICATIONS} bootstrap replications")
    interval = check_interval(interval, pair)
    if grid is None:
        grid = band_grid(interval, grid_size)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if plan is None:
        plan = _fuzzy.select_fuzzy_plan(data, pair, interval, kernel)
    parts = _fuzzy.fuzzy_parts(data, pair, grid, plan, kernel, p_min)
    return _band_from_fuzzy_parts(parts, n_boot, alpha, seed)
