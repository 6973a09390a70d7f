import numpy as np
import pytest

from rdextrap.bandwidth import BandwidthPlan
from rdextrap.bounds import (
    CutoffPair,
    DIRECTION_DECREASING,
    MultiCutoffPlan,
    constant_bias_extrapolation,
    default_grid,
    dominance_diagnostic,
    multi_cutoff_bounds,
    select_sharp_plan,
    sharp_bounds,
)
from rdextrap.data import RdData
from rdextrap.errors import MissingArmError
from rdextrap.kernels import eval_kernel, KernelSpec
from rdextrap.rng import stream
from rdextrap.simulation import (
    control_curve_high,
    control_curve_low,
    population_lower,
    population_upper,
)

PAIR = CutoffPair(1.0, 2.25)
PTS = np.array([1.25, 1.5, 1.75, 2.0])


def two_group_data(f_low, f_high, n=400, noise=0.0, seed=0, l=1.0, h=2.25,
                   lo=0.5, hi=3.0):
    """Sharp two-group sample with chosen control curves and effect 1.5."""
    rng = stream(9000, seed)
    xl = np.sort(rng.uniform(lo, hi, n))
    xh = np.sort(rng.uniform(lo, hi, n))
    dl = (xl >= l).astype(int)
    dh = (xh >= h).astype(int)
    yl = f_low(xl) + 1.5 * dl + noise * rng.normal(0, 1, n)
    yh = f_high(xh) + 1.5 * dh + noise * rng.normal(0, 1, n)
    return RdData(
        y=np.concatenate([yl, yh]),
        x=np.concatenate([xl, xh]),
        c=np.concatenate([np.full(n, l), np.full(n, h)]),
        d=np.concatenate([dl, dh]),
    )


def test_cutoff_pair_validation():
    with pytest.raises(ValueError):
        CutoffPair(2.0, 2.0)


def test_default_grid_trims_five_percent():
    grid = default_grid(PAIR, 50)
    width = PAIR.h - PAIR.l
    assert grid[0] == pytest.approx(PAIR.l + 0.05 * width)
    assert grid[-1] == pytest.approx(PAIR.h - 0.05 * width)
    assert grid.size == 50


def test_definitional_arithmetic_with_constant_arms():
    # mu_1l = 2.0, mu_0h = 0.5, mu_0l(l) = 0.3  ->  lower 1.5, upper 1.7.
    rng = stream(9100, 0)
    n = 300
    xl = np.sort(rng.uniform(0.5, 3.0, n))
    xh = np.sort(rng.uniform(0.5, 3.0, n))
    dl = (xl >= 1.0).astype(int)
    dh = (xh >= 2.25).astype(int)
    yl = np.where(dl == 1, 2.0, 0.3)
    yh = np.where(dh == 1, 2.0, 0.5)
    data = RdData(
        y=np.concatenate([yl, yh]), x=np.concatenate([xl, xh]),
        c=np.concatenate([np.full(n, 1.0), np.full(n, 2.25)]),
        d=np.concatenate([dl, dh]),
    )
    plan = BandwidthPlan(0.5, 0.5, 0.25)
    curve = sharp_bounds(data, PAIR, grid=PTS, plan=plan)
    assert np.allclose(curve.lower, 1.5, atol=1e-10)
    assert np.allclose(curve.upper, 1.7, atol=1e-10)
    assert not curve.crossed.any()


def test_population_bounds_on_noiseless_dgp_curves():
    # Noiseless draws from the simulation curves recover the published
    # population bound values at the four evaluation points.
    data = two_group_data(control_curve_low, control_curve_high, n=4000, seed=1)
    plan = BandwidthPlan(0.25, 0.25, 0.2)
    curve = sharp_bounds(data, PAIR, grid=PTS, plan=plan)
    assert np.allclose(curve.lower, population_lower(PTS), atol=5e-3)
    assert np.allclose(curve.upper, population_upper(PTS), atol=5e-3)
    assert np.allclose(curve.lower, [1.093, 0.840, 0.563, 0.307], atol=5e-3)
    assert np.allclose(curve.upper, [1.887, 2.235, 2.539, 2.794], atol=5e-3)


def test_outcome_translation_cancels():
    data = two_group_data(control_curve_low, control_curve_high, n=500, noise=0.5, seed=2)
    shifted = RdData(y=data.y + 11.0, x=data.x, c=data.c, d=data.d)
    plan = BandwidthPlan(0.5, 0.5, 0.25)
    a = sharp_bounds(data, PAIR, grid=PTS, plan=plan)
    b = sharp_bounds(shifted, PAIR, grid=PTS, plan=plan)
    assert np.allclose(a.lower, b.lower, atol=1e-12)
    assert np.allclose(a.upper, b.upper, atol=1e-12)


def test_direction_reversal_matches_negated_outcome():
    data = two_group_data(control_curve_low, control_curve_high, n=500, noise=0.5, seed=3)
    negated = RdData(y=-data.y, x=data.x, c=data.c, d=data.d)
    plan = BandwidthPlan(0.5, 0.5, 0.25)
    reversed_curve = sharp_bounds(data, PAIR, grid=PTS, plan=plan,
                                  direction=DIRECTION_DECREASING)
    negated_curve = sharp_bounds(negated, PAIR, grid=PTS, plan=plan)
    assert np.allclose(reversed_curve.lower, -negated_curve.upper, atol=1e-12)
    assert np.allclose(reversed_curve.upper, -negated_curve.lower, atol=1e-12)
    assert np.allclose(reversed_curve.var_lower, negated_curve.var_upper, atol=1e-15)


def test_missing_arm_is_named():
    data = two_group_data(control_curve_low, control_curve_high, n=200, seed=4)
    keep = ~((data.d == 0) & (data.c == 2.25))
    broken = RdData(y=data.y[keep], x=data.x[keep], c=data.c[keep], d=data.d[keep])
    with pytest.raises(MissingArmError) as err:
        sharp_bounds(broken, PAIR, grid=PTS, plan=BandwidthPlan(0.5, 0.5, 0.25))
    assert err.value.d == 0 and err.value.c == 2.25


def test_grid_outside_open_interval_rejected():
    data = two_group_data(control_curve_low, control_curve_high, n=300, seed=5)
    with pytest.raises(ValueError):
        sharp_bounds(data, PAIR, grid=np.array([1.0, 1.5]), plan=BandwidthPlan(0.5, 0.5, 0.25))
    with pytest.raises(ValueError):
        sharp_bounds(data, PAIR, grid=np.array([2.3]), plan=BandwidthPlan(0.5, 0.5, 0.25))


def test_constant_bias_extrapolation_identity_and_arithmetic():
    # Definitional identity: the extrapolation is the lower curve plus the
    # estimated control gap at l, uniformly over the grid.
    from rdextrap.locpoly import fit_local_quadratic
    from rdextrap.data import subsample

    data = two_group_data(control_curve_low, control_curve_low, n=2000, seed=6)
    plan = BandwidthPlan(0.4, 0.4, 0.25)
    curve = sharp_bounds(data, PAIR, grid=PTS, plan=plan)
    cb = constant_bias_extrapolation(data, PAIR, grid=PTS, plan=plan)
    sub_0h = subsample(data, d=0, c=PAIR.h, side="left_of_c")
    sub_0l = subsample(data, d=0, c=PAIR.l, side="left_of_c")
    gap_hat = (fit_local_quadratic(sub_0h, PAIR.l, plan.b_0h)
               - fit_local_quadratic(sub_0l, PAIR.l, plan.b_0l))
    assert np.allclose(cb - curve.lower, gap_hat, atol=1e-12)
    # identical control curves: the estimated gap at l is numerically zero
    assert np.allclose(cb, curve.lower, atol=2e-3)

    # A 0.2 control gap shifts the extrapolation 0.2 above the lower curve.
    data2 = two_group_data(control_curve_low, lambda x: control_curve_low(x) + 0.2,
                           n=4000, seed=7)
    curve2 = sharp_bounds(data2, PAIR, grid=PTS, plan=plan)
    cb2 = constant_bias_extrapolation(data2, PAIR, grid=PTS, plan=plan)
    assert np.allclose(cb2 - curve2.lower, 0.2, atol=5e-3)
    # population sandwich: lower <= cb <= upper under the shape restrictions
    assert np.all(cb2 >= curve2.lower - 1e-9)
    assert np.all(cb2 <= curve2.upper + 1e-9)


def three_group_data(n=600, seed=8):
    rng = stream(9200, seed)
    cutoffs = (1.0, 1.6, 2.25)
    curves = (control_curve_low,
              lambda x: control_curve_low(x) + 0.3 * (x - 0.5),
              control_curve_high)
    xs, ys, cs, ds = [], [], [], []
    for c, f in zip(cutoffs, curves):
        x = np.sort(rng.uniform(0.5, 3.0, n))
        d = (x >= c).astype(int)
        xs.append(x)
        ys.append(f(x) + 1.5 * d)
        cs.append(np.full(n, c))
        ds.append(d)
    return RdData(y=np.concatenate(ys), x=np.concatenate(xs),
                  c=np.concatenate(cs), d=np.concatenate(ds)), cutoffs, curves


def test_multi_cutoff_reduces_to_sharp_with_two_cutoffs():
    data = two_group_data(control_curve_low, control_curve_high, n=500, noise=0.4, seed=9)
    grid = np.linspace(1.2, 2.0, 9)
    a = sharp_bounds(data, PAIR, grid=grid)
    b = multi_cutoff_bounds(data, (1.0, 2.25), grid=grid)
    assert np.array_equal(a.lower, b.lower)
    assert np.array_equal(a.upper, b.upper)
    assert np.array_equal(a.var_lower, b.var_lower)
    assert np.array_equal(a.var_upper, b.var_upper)


def test_multi_cutoff_bracketing_matches_direct_oracle():
    data, cutoffs, curves = three_group_data()
    grid = np.array([1.2, 1.4, 1.8, 2.1])
    plans = MultiCutoffPlan(b_treated=0.4, b_boundary=0.25,
                            b_control={1.6: 0.4, 2.25: 0.4})
    curve = multi_cutoff_bounds(data, cutoffs, grid=grid, plans=plans)

    # Direct oracle: raw weighted least squares per bracketing arm.
    def wls(x, y, x0, b, degree=2):
        w = eval_kernel(KernelSpec(), (x - x0) / b)
        keep = w > 0
        design = np.vander(x[keep] - x0, N=degree + 1, increasing=True)
        sw = np.sqrt(w[keep])
        beta, *_ = np.linalg.lstsq(design * sw[:, None], y[keep] * sw, rcond=None)
        return beta[0]

    treated = data.x[(data.c == 1.0) & (data.d == 1)]
    treated_y = data.y[(data.c == 1.0) & (data.d == 1)]
    for j, x0 in enumerate(grid):
        bracket = cutoffs[int(np.searchsorted(cutoffs, x0, side="right"))]
        arm = (data.c == bracket) & (data.d == 0) & (data.x < bracket)
        want = (wls(treated, treated_y, x0, 0.4)
                - wls(data.x[arm], data.y[arm], x0, 0.4))
        assert curve.lower[j] == pytest.approx(want, abs=1e-10)


def test_multi_cutoff_tightens_lower_bound():
    data, cutoffs, _ = three_group_data()
    grid = np.linspace(1.05, 1.55, 7)  # inside (c0, c1)
    plans = MultiCutoffPlan(b_treated=0.4, b_boundary=0.25,
                            b_control={1.6: 0.4, 2.25: 0.4})
    tight = multi_cutoff_bounds(data, cutoffs, grid=grid, plans=plans)
    wide = sharp_bounds(data, CutoffPair(1.0, 2.25), grid=grid,
                        plan=BandwidthPlan(0.4, 0.4, 0.25))
    assert np.all(tight.lower >= wide.lower - 1e-9)
    assert np.allclose(tight.upper, wide.upper, atol=1e-12)


def test_dominance_diagnostic_flags():
    same = two_group_data(control_curve_low, control_curve_low, n=2000, noise=1.0, seed=10)
    diag = dominance_diagnostic(same, PAIR)
    assert diag.flag == "consistent"
    assert abs(diag.statistic) < 4.0 * diag.std_error

    shifted_up = two_group_data(lambda x: control_curve_low(x) + 1.0,
                                control_curve_low, n=2000, noise=1.0, seed=11)
    assert dominance_diagnostic(shifted_up, PAIR).flag == "refuted"

    shifted_down = two_group_data(lambda x: control_curve_low(x) - 1.0,
                                  control_curve_low, n=2000, noise=1.0, seed=12)
    assert dominance_diagnostic(shifted_down, PAIR).flag == "consistent"


def test_dominance_refutation_frequency():
    hits = 0
    for seed in range(40):
        data = two_group_data(lambda x: control_curve_low(x) + 1.0,
                              control_curve_low, n=3000, noise=1.0, seed=100 + seed)
        hits += dominance_diagnostic(data, PAIR).flag == "refuted"
    assert hits >= 38  # > 95% rejection under a one-unit violation


def test_crossing_flagged_not_reordered():
    # A comparison-group curve far below the low group's own boundary level
    # pushes the estimated lower bound above the upper bound everywhere.
    data = two_group_data(control_curve_low, lambda x: control_curve_low(x) - 3.0,
                          n=2000, seed=13)
    curve = sharp_bounds(data, PAIR, grid=PTS, plan=BandwidthPlan(0.4, 0.4, 0.25))
    assert curve.crossed.all()
    assert np.all(curve.lower > curve.upper)


def test_selected_plan_is_positive_and_finite():
    data = two_group_data(control_curve_low, control_curve_high, n=500, noise=1.0, seed=14)
    plan = select_sharp_plan(data, PAIR, (1.25, 2.0))
    for b in (plan.b_1l, plan.b_0h, plan.b_0l):
        assert np.isfinite(b) and b > 0
    manual = select_sharp_plan(data, PAIR, (1.25, 2.0), b_1l=0.7)
    assert manual.b_1l == 0.7 and manual.b_0h == plan.b_0h
