"""Agent effort-choice engine and regression-curve diagnostics.

Agents pick effort to trade a short-run payoff and effort cost against a
discounted future outcome plus, when the running variable responds to
effort, the believed benefit of crossing their threshold times the chance
of doing so. The module solves that problem in closed form for the worked
two-cutoff parameterization, numerically for arbitrary specifications, and
simulates the induced outcome-by-score curves per group to quantify how far
the between-group gap drifts from constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import stats

from .errors import InvalidSpecError
from .kernels import KernelSpec, eval_kernel
from .rng import stream

GRID_POINTS = 501
GOLDEN_TOL = 1e-10

GROUP_LOW = "l"
GROUP_HIGH = "h"


class PeriodicSineDensity:
    """Density proportional to 1 + sin(2 pi z / period) on a bounded support.

    The support span must be an integer number of periods so the density
    integrates to one.
    """

    def __init__(self, period: float = 2.0, support=(-5.0, 5.0)):
        a, b = float(support[0]), float(support[1])
        period = float(period)
        if period <= 0 or b <= a:
            raise ValueError("need a positive period and a nonempty support")
        cycles = (b - a) / period
        if abs(cycles - round(cycles)) > 1e-9:
            raise ValueError("support span must be an integer number of periods")
        self.period = period
        self.support = (a, b)

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        a, b = self.support
        inside = (z >= a) & (z <= b)
        vals = (1.0 + np.sin(2.0 * np.pi * z / self.period)) / (b - a)
        out = np.where(inside, vals, 0.0)
        return out if out.ndim else float(out)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        a, b = self.support
        zc = np.clip(z, a, b)
        t = self.period / (2.0 * np.pi)
        raw = (zc - a) + t * (np.cos(2.0 * np.pi * a / self.period)
                              - np.cos(2.0 * np.pi * zc / self.period))
        out = raw / (b - a)
        return out if out.ndim else float(out)

    def rvs(self, size, random_state: np.random.Generator):
        a, b = self.support
        peak = 2.0 / (b - a)
        out = np.empty(size, dtype=float)
        filled = 0
        while filled < size:
            m = 2 * (size - filled) + 16
            z = random_state.uniform(a, b, m)
            keep = z[random_state.uniform(0.0, peak, m) < self.pdf(z)]
            take = min(keep.size, size - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
        return out


def triangular_noise():
    """Unit triangular score noise: density (1 - |z|) on [-1, 1]."""
    return stats.triang(c=0.5, loc=-1.0, scale=2.0)


def uniform_noise(half_width: float = 4.0):
    return stats.uniform(loc=-half_width, scale=2.0 * half_width)


def gaussian_noise(sd: float = 1.0):
    return stats.norm(scale=sd)


@dataclass(frozen=True)
class DecisionModelSpec:
    """Structural pieces of the effort problem.

    ``ability`` is a single distribution shared by both groups or a mapping
    with keys "l" and "h". ``closed_form`` optionally supplies a vectorized
    (epsilon, cutoff) -> effort shortcut used by the simulators.
    """

    utility: Callable
    score: Callable
    future: Callable
    cost: Callable
    noise: object
    ability: object
    cutoffs: tuple
    beta: float = 1.0
    tau_belief: float = 1.0
    gamma: float = 0.0
    manipulable: bool = True
    e_max: float = 10.0
    outcome_noise_sd: float = 1.0
    closed_form: Optional[Callable] = None

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise InvalidSpecError("discount factor must lie in (0, 1]")
        l, h = self.cutoffs
        if not float(l) < float(h):
            raise InvalidSpecError("cutoffs must satisfy l < h")

    def ability_for(self, group: str):
        if isinstance(self.ability, Mapping):
            return self.ability[group]
        return self.ability


@dataclass(frozen=True)
class EffortSolution:
    epsilon: float
    cutoff: float
    effort: float
    objective: float
    branch: Optional[int] = None


def objective(spec: DecisionModelSpec, e, epsilon, cutoff):
    """Expected payoff of effort ``e``; vectorized over broadcastable inputs."""
    e = np.asarray(e, dtype=float)
    s = spec.score(e)
    val = spec.utility(s) - spec.cost(e, epsilon) + spec.beta * spec.future(e)
    if spec.manipulable:
        val = val + spec.beta * spec.tau_belief * (1.0 - spec.noise.cdf(cutoff - s))
    return val


def _check_cost_convexity(spec: DecisionModelSpec, epsilon):
    grid = np.linspace(0.0, spec.e_max, 101)
    cost = np.asarray(spec.cost(grid, epsilon), dtype=float)
    if not np.isfinite(cost).all():
        raise InvalidSpecError("cost is non-finite on the effort range")
    second = np.diff(cost, 2)
    if second.size and second.min() < -1e-8:
        raise InvalidSpecError("cost is not convex in effort on the evaluation range")


def _golden_max_vec(f, lo, hi, tol=GOLDEN_TOL, max_iter=200):
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a = np.asarray(lo, dtype=float).copy()
    b = np.asarray(hi, dtype=float).copy()
    for _ in range(max_iter):
        if float(np.max(b - a)) <= tol:
            break
        x1 = b - phi * (b - a)
        x2 = a + phi * (b - a)
        keep_left = f(x1) >= f(x2)
        b = np.where(keep_left, x2, b)
        a = np.where(keep_left, a, x1)
    return 0.5 * (a + b)


def solve_effort_numeric(spec: DecisionModelSpec, epsilon, cutoff, e_range=None) -> EffortSolution:
    """Grid-bracketed golden-section maximization of the effort objective.

    For non-manipulable specifications the objective never references the
    cutoff, so the solution is cutoff-invariant by construction.
    """
    _check_cost_convexity(spec, epsilon)
    lo, hi = e_range if e_range is not None else (0.0, spec.e_max)
    if not hi > lo:
        raise InvalidSpecError("effort range must have positive length")
    grid = np.linspace(lo, hi, GRID_POINTS)
    vals = objective(spec, grid, epsilon, cutoff)
    if not np.isfinite(vals).all():
        raise InvalidSpecError("objective is non-finite on the effort grid")
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, grid.size - 1)]
    e_star = float(_golden_max_vec(
        lambda e: objective(spec, e, epsilon, cutoff), np.array([a]), np.array([b])
    )[0])
    return EffortSolution(
        epsilon=float(epsilon), cutoff=float(cutoff), effort=e_star,
        objective=float(objective(spec, e_star, epsilon, cutoff)),
    )


def solve_effort_batch(spec: DecisionModelSpec, epsilons, cutoff, chunk=65536) -> np.ndarray:
    """Vectorized effort solutions for many agents at one cutoff."""
    epsilons = np.asarray(epsilons, dtype=float)
    if spec.closed_form is not None:
        return np.asarray(spec.closed_form(epsilons, float(cutoff)), dtype=float)
    if epsilons.size:
        _check_cost_convexity(spec, float(epsilons.min()))
        _check_cost_convexity(spec, float(epsilons.max()))
    grid = np.linspace(0.0, spec.e_max, GRID_POINTS)
    out = np.empty(epsilons.size, dtype=float)
    for start in range(0, epsilons.size, chunk):
        eps = epsilons[start:start + chunk]
        vals = objective(spec, grid[None, :], eps[:, None], cutoff)
        if not np.isfinite(vals).all():
            raise InvalidSpecError("objective is non-finite on the effort grid")
        k = np.argmax(vals, axis=1)
        a = grid[np.maximum(k - 1, 0)]
        b = grid[np.minimum(k + 1, grid.size - 1)]
        out[start:start + chunk] = _golden_max_vec(
            lambda e: objective(spec, e, eps, cutoff), a, b
        )
    return out


# Worked two-cutoff parameterization: square-root production, linear cost in
# effort with ability-scaled slope, unit triangular score noise.

def _example_structural():
    return dict(
        utility=lambda s: s,
        score=lambda e: 5.0 * np.sqrt(np.maximum(e, 0.0)),
        future=lambda e: 10.0 * np.sqrt(np.maximum(e, 0.0)),
        cost=lambda e, eps: 15.0 * (2.0 - eps) * e,
    )


def example1_effort_values(epsilon, cutoff):
    """Closed-form optimal effort of the worked parameterization (vectorized)."""
    eps = np.asarray(epsilon, dtype=float)
    c = float(cutoff)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.float64(4.0 * c - 9.0) / np.float64(2.0 * (c - 1.0))
        t2 = np.float64(6.0 * c - 10.0) / np.float64(3.0 * c)
        t3 = np.float64(4.0 * c - 1.0) / np.float64(2.0 * (c + 1.0))
        flat = 1.0 / (4.0 * (2.0 - eps) ** 2)
        chasing = (4.0 + c) ** 2 / (17.0 - 6.0 * eps) ** 2
        settling = (4.0 - c) ** 2 / (7.0 - 6.0 * eps) ** 2
    in1 = (eps <= t1) | (eps > t3)
    in2 = (t2 < eps) & (eps <= t3)
    effort = np.where(in1, flat, np.where(in2, chasing, settling))
    branch = np.where(in1, 1, np.where(in2, 2, 3))
    return effort, branch


def example1_effort(epsilon, cutoff) -> EffortSolution:
    """Closed-form branch solution, with the branch index recorded."""
    effort, branch = example1_effort_values(epsilon, cutoff)
    spec = example1_spec()
    return EffortSolution(
        epsilon=float(epsilon), cutoff=float(cutoff), effort=float(effort),
        objective=float(objective(spec, float(effort), float(epsilon), float(cutoff))),
        branch=int(branch),
    )


def example1_spec(manipulable: bool = True) -> DecisionModelSpec:
    """Worked parameterization; both groups draw ability from Uniform(0, 1)."""
    return DecisionModelSpec(
        noise=triangular_noise(),
        ability=stats.uniform(loc=0.0, scale=1.0),
        cutoffs=(2.0, 3.0),
        beta=1.0,
        tau_belief=1.0,
        gamma=0.0,
        manipulable=manipulable,
        e_max=10.0,
        closed_form=(lambda eps, c: example1_effort_values(eps, c)[0]) if manipulable else None,
        **_example_structural(),
    )


def example2_spec() -> DecisionModelSpec:
    """Same structure with an advantaged high-cutoff group: ability Uniform(2/3, 5/3)."""
    return DecisionModelSpec(
        noise=triangular_noise(),
        ability={
            GROUP_LOW: stats.uniform(loc=0.0, scale=1.0),
            GROUP_HIGH: stats.uniform(loc=2.0 / 3.0, scale=1.0),
        },
        cutoffs=(2.0, 3.0),
        beta=1.0,
        tau_belief=1.0,
        gamma=0.0,
        manipulable=True,
        e_max=10.0,
        closed_form=lambda eps, c: example1_effort_values(eps, c)[0],
        **_example_structural(),
    )


def _local_linear_curve(x, y, grid, bandwidth, kernel=KernelSpec()):
    """Local linear curve with heteroskedasticity-robust pointwise SEs."""
    order = np.argsort(x)
    x, y = x[order], y[order]
    est = np.full(grid.size, np.nan)
    se = np.full(grid.size, np.nan)
    for i, x0 in enumerate(grid):
        lo = np.searchsorted(x, x0 - bandwidth)
        hi = np.searchsorted(x, x0 + bandwidth, side="right")
        if hi - lo < 5:
            continue
        z = (x[lo:hi] - x0) / bandwidth
        w = eval_kernel(kernel, z)
        yy = y[lo:hi]
        m0, m1, m2 = w.sum(), (w * z).sum(), (w * z * z).sum()
        t0, t1 = (w * yy).sum(), (w * z * yy).sum()
        det = m0 * m2 - m1 * m1
        if det <= 0:
            continue
        beta0 = (m2 * t0 - m1 * t1) / det
        beta1 = (-m1 * t0 + m0 * t1) / det
        resid = yy - beta0 - beta1 * z
        a0 = m2 / det
        a1 = -m1 / det
        infl = (a0 + a1 * z) * w
        est[i] = beta0
        se[i] = np.sqrt(np.sum(infl**2 * resid**2))
    return est, se


@dataclass(frozen=True)
class RegressionCurves:
    """Simulated outcome-by-score curves per group and their gap."""

    grid: np.ndarray
    curve_low: np.ndarray
    se_low: np.ndarray
    curve_high: np.ndarray
    se_high: np.ndarray
    gap: np.ndarray
    gap_se: np.ndarray
    bandwidth: float
    n_agents: int
    seed: int


def regression_curves(spec: DecisionModelSpec, grid_x, n_agents: int = 100_000,
                      seed: int = 0, bandwidth=None) -> RegressionCurves:
    """Simulate both groups and smooth the untreated outcome on the score.

    Per agent: draw ability, solve for effort at the group cutoff, then draw
    the score and outcome shocks. The gap column is the high-group curve
    minus the low-group curve with independent-fit standard errors.
    """
    grid_x = np.asarray(grid_x, dtype=float)
    l, h = spec.cutoffs
    draws = {}
    for gi, (group, cutoff) in enumerate(((GROUP_LOW, l), (GROUP_HIGH, h))):
        rng = stream(seed, gi)
        eps = np.asarray(spec.ability_for(group).rvs(size=n_agents, random_state=rng), float)
        effort = solve_effort_batch(spec, eps, cutoff)
        score = np.asarray(spec.score(effort), dtype=float)
        x = score + np.asarray(spec.noise.rvs(size=n_agents, random_state=rng), float)
        y0 = (np.asarray(spec.future(effort), dtype=float)
              + (spec.gamma if group == GROUP_HIGH else 0.0)
              + rng.normal(0.0, spec.outcome_noise_sd, n_agents))
        draws[group] = (x, y0)
    if bandwidth is None:
        pooled_sd = float(np.std(np.concatenate([draws[GROUP_LOW][0], draws[GROUP_HIGH][0]])))
        bandwidth = 1.06 * pooled_sd * n_agents ** (-0.2)
    est_l, se_l = _local_linear_curve(*draws[GROUP_LOW], grid_x, bandwidth)
    est_h, se_h = _local_linear_curve(*draws[GROUP_HIGH], grid_x, bandwidth)
    return RegressionCurves(
        grid=grid_x,
        curve_low=est_l, se_low=se_l,
        curve_high=est_h, se_high=se_h,
        gap=est_h - est_l,
        gap_se=np.sqrt(se_l**2 + se_h**2),
        bandwidth=float(bandwidth),
        n_agents=int(n_agents),
        seed=int(seed),
    )


@dataclass(frozen=True)
class PeriodicityCheck:
    max_effort_gap: float
    periodic_verdict: bool


def periodicity_check(spec: DecisionModelSpec, epsilon_grid) -> PeriodicityCheck:
    """Compare optimal effort across the two cutoffs over an ability grid.

    Effort is cutoff-invariant exactly when the score-noise density repeats
    with period h - l over the range the optima reach, so a gap below
    tolerance is the operational signature of that periodicity.
    """
    if not spec.manipulable:
        raise InvalidSpecError("periodicity check applies to manipulable specifications")
    eps = np.asarray(epsilon_grid, dtype=float)
    l, h = spec.cutoffs
    e_l = solve_effort_batch(spec, eps, l)
    e_h = solve_effort_batch(spec, eps, h)
    gap = float(np.max(np.abs(e_l - e_h))) if eps.size else 0.0
    return PeriodicityCheck(max_effort_gap=gap, periodic_verdict=gap < 1e-6)
