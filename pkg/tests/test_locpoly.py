import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdextrap.data import RdData, subsample
from rdextrap.errors import DegenerateDensityError, InsufficientLocalDataError
from rdextrap.inference import mammen_draws
from rdextrap.kernels import KernelSpec, eval_kernel
from rdextrap.locpoly import (
    bias_corrected_fit,
    corrected_residuals,
    density_estimate,
    fit_local_linear,
    fit_local_quadratic,
    variance_estimate,
)
from rdextrap.rng import stream

TRI = KernelSpec("triangular")


def make_sub(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    data = RdData(y=y, x=x, c=np.zeros_like(x), d=np.ones(x.size, dtype=int))
    return subsample(data, d=1, c=0.0)


def wls_intercept_oracle(x, y, x0, bandwidth, degree, multipliers=None):
    """Independent route: lstsq on the square-root-weighted raw design."""
    w = eval_kernel(TRI, (x - x0) / bandwidth)
    if multipliers is not None:
        w = w * multipliers
    keep = w > 0
    design = np.vander(x[keep] - x0, N=degree + 1, increasing=True)
    sw = np.sqrt(w[keep])
    beta, *_ = np.linalg.lstsq(design * sw[:, None], y[keep] * sw, rcond=None)
    return float(beta[0])


def test_constant_reproduction():
    x = np.linspace(-1, 4, 37)
    sub = make_sub(x, np.full(37, 3.7))
    assert fit_local_linear(sub, 1.3, 0.8) == pytest.approx(3.7, abs=1e-12)


def test_linear_reproduction_exact():
    x = np.linspace(0, 2, 61)
    sub = make_sub(x, 2 * x + 1)
    for x0 in (0.3, 1.0, 1.7):
        assert abs(fit_local_linear(sub, x0, 0.4) - (2 * x0 + 1)) < 1e-10


def test_quadratic_reproduction_exact():
    x = np.linspace(-1, 1, 81)
    sub = make_sub(x, x**2)
    for x0 in (-0.4, 0.0, 0.55):
        assert abs(fit_local_quadratic(sub, x0, 0.35) - x0**2) < 1e-9


def test_matches_bruteforce_oracle_12_points():
    rng = stream(7022, 0)
    x = np.sort(rng.uniform(0, 1, 12))
    y = rng.normal(0, 1, 12)
    sub = make_sub(x, y)
    for degree, fit in ((1, fit_local_linear), (2, fit_local_quadratic)):
        got = fit(sub, 0.5, 0.45)
        want = wls_intercept_oracle(x, y, 0.5, 0.45, degree)
        assert abs(got - want) < 1e-10


@pytest.mark.parametrize("seed", range(6))
def test_matches_bruteforce_oracle_random_instances(seed):
    rng = stream(555, seed)
    n = int(rng.integers(10, 51))
    x = np.sort(rng.uniform(-2, 2, n))
    y = rng.normal(0, 2, n)
    x0 = float(rng.uniform(-1, 1))
    b = float(rng.uniform(0.5, 1.5))
    sub = make_sub(x, y)
    assert abs(fit_local_linear(sub, x0, b) - wls_intercept_oracle(x, y, x0, b, 1)) < 1e-10
    assert abs(fit_local_quadratic(sub, x0, b) - wls_intercept_oracle(x, y, x0, b, 2)) < 1e-10


def test_mammen_multiplier_fit_matches_oracle():
    rng = stream(321, 0)
    x = np.sort(rng.uniform(0, 1, 12))
    y = rng.normal(0, 1, 12)
    mult = mammen_draws(stream(321, 1), 12) + 1.0
    sub = make_sub(x, y)
    got = fit_local_quadratic(sub, 0.5, 0.6, multipliers=mult)
    want = wls_intercept_oracle(x, y, 0.5, 0.6, 2, multipliers=mult)
    assert abs(got - want) < 1e-10


def test_unit_multipliers_equal_bias_corrected_fit():
    rng = stream(99, 0)
    x = np.sort(rng.uniform(0, 2, 40))
    y = rng.normal(0, 1, 40)
    sub = make_sub(x, y)
    plain = bias_corrected_fit(sub, 1.0, 0.7).corrected
    weighted = fit_local_quadratic(sub, 1.0, 0.7, multipliers=np.ones(40))
    assert abs(plain - weighted) < 1e-10


def test_classical_bias_correction_identity():
    # Subtracting the quadratic-coefficient bias estimate from the linear fit
    # (equal bandwidths) must reproduce the quadratic intercept exactly.
    rng = stream(1234, 0)
    x = np.sort(rng.uniform(0, 2, 35))
    y = rng.normal(0, 1, 35)
    sub = make_sub(x, y)
    x0, b = 1.1, 0.6
    w = eval_kernel(TRI, (x - x0) / b)
    keep = w > 0
    design1 = np.vander(x[keep] - x0, N=2, increasing=True)
    design2 = np.vander(x[keep] - x0, N=3, increasing=True)
    sw = np.sqrt(w[keep])
    beta2, *_ = np.linalg.lstsq(design2 * sw[:, None], y[keep] * sw, rcond=None)
    curv = beta2[2]
    gram1 = design1.T @ (design1 * w[keep][:, None])
    moment = design1.T @ (w[keep] * (x[keep] - x0) ** 2)
    bias_hat = curv * np.linalg.solve(gram1, moment)[0]
    linear = fit_local_linear(sub, x0, b)
    corrected = fit_local_quadratic(sub, x0, b)
    assert abs((linear - bias_hat) - corrected) < 1e-10
    fit = bias_corrected_fit(sub, x0, b)
    assert fit.corrected == pytest.approx(fit.estimate - fit.bias, abs=1e-12)


def test_bias_corrected_fit_on_line_and_parabola():
    x = np.linspace(0, 2, 101)
    lin = bias_corrected_fit(make_sub(x, 2 * x + 1), 1.0, 0.5)
    assert abs(lin.bias) < 1e-9
    assert lin.corrected == pytest.approx(3.0, abs=1e-9)
    quad = bias_corrected_fit(make_sub(x, x**2), 1.0, 0.5)
    assert quad.corrected == pytest.approx(1.0, abs=1e-9)


def test_bias_corrected_fit_near_truth_on_cubic_dgp():
    from rdextrap.simulation import control_curve_low, generate_sharp
    from rdextrap.bounds import CutoffPair, select_sharp_plan

    data = generate_sharp(500, seed=2024)
    sub = subsample(data, d=1, c=1.0, side="right_of_c")
    plan = select_sharp_plan(data, CutoffPair(1.0, 2.25), (1.25, 2.0))
    fit = bias_corrected_fit(sub, 1.5, plan.b_1l)
    truth = control_curve_low(1.5) + 1.5
    assert abs(fit.corrected - truth) <= 3.0 * np.sqrt(fit.variance)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3),
    b=st.floats(-10, 10),
    seed=st.integers(0, 10_000),
)
def test_affine_equivariance_in_y(a, b, seed):
    rng = stream(777, seed)
    x = np.sort(rng.uniform(0, 1, 25))
    y = rng.normal(0, 1, 25)
    base = fit_local_linear(make_sub(x, y), 0.5, 0.4)
    scaled = fit_local_linear(make_sub(x, a * y + b), 0.5, 0.4)
    assert scaled == pytest.approx(a * base + b, rel=1e-9, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(-50, 50), seed=st.integers(0, 10_000))
def test_translation_equivariance_in_x(shift, seed):
    rng = stream(778, seed)
    x = np.sort(rng.uniform(0, 1, 30))
    y = rng.normal(0, 1, 30)
    base = fit_local_quadratic(make_sub(x, y), 0.5, 0.4)
    moved = fit_local_quadratic(make_sub(x + shift, y), 0.5 + shift, 0.4)
    assert moved == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_insufficient_data_errors():
    sub = make_sub([0.0, 0.0, 0.0], [1.0, 2.0, 3.0])
    with pytest.raises(InsufficientLocalDataError) as err:
        fit_local_linear(sub, 0.0, 0.5)
    assert err.value.x0 == 0.0 and err.value.bandwidth == 0.5
    with pytest.raises(InsufficientLocalDataError):
        fit_local_quadratic(make_sub([0.0, 0.1], [1.0, 2.0]), 0.05, 0.5)
    with pytest.raises(ValueError):
        fit_local_linear(make_sub([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]), 1.0, -0.1)


def test_density_estimate_contract():
    x = np.linspace(0, 1, 50)
    sub = make_sub(x, np.zeros(50))
    assert density_estimate(sub, 5.0, 0.2) == 0.0
    clustered = make_sub(np.full(8, 0.3), np.zeros(8))
    assert density_estimate(clustered, 0.3, 0.25) == pytest.approx(1.0 / 0.25, rel=1e-12)
    big = make_sub(stream(3, 0).uniform(0, 1, 10_000), np.zeros(10_000))
    assert density_estimate(big, 0.5, 0.05) == pytest.approx(1.0, abs=0.1)


def test_variance_zero_on_noiseless_line():
    x = np.linspace(0, 1, 60)
    sub = make_sub(x, 3 * x - 2)
    assert variance_estimate(sub, 0.5, 0.3) <= 1e-12


def test_variance_scales_inversely_with_n():
    # Doubling n at fixed bandwidth should halve the variance estimate.
    ratios = []
    for seed in range(30):
        rng = stream(42, seed)
        x1 = np.sort(rng.uniform(0, 1, 300))
        y1 = rng.normal(0, 1, 300)
        x2 = np.sort(rng.uniform(0, 1, 600))
        y2 = rng.normal(0, 1, 600)
        v1 = variance_estimate(make_sub(x1, y1), 0.5, 0.25)
        v2 = variance_estimate(make_sub(x2, y2), 0.5, 0.25)
        ratios.append(v2 / v1)
    assert 0.4 < float(np.mean(ratios)) < 0.6


def test_variance_boundary_flag():
    rng = stream(11, 0)
    x = np.sort(rng.uniform(-1, 0, 200))
    y = rng.normal(0, 1, 200)
    sub = make_sub(x, y)
    v = variance_estimate(sub, 0.0, 0.3, boundary=True)
    assert np.isfinite(v) and v > 0


def test_variance_degenerate_density():
    x = np.linspace(0, 1, 50)
    sub = make_sub(x, np.zeros(50))
    with pytest.raises(DegenerateDensityError):
        variance_estimate(sub, 10.0, 0.1, residuals=np.zeros(50))


def test_residual_fallback_uses_nearest_valid_fit():
    # One far-away point cannot support its own quadratic fit; its residual
    # must reuse the nearest valid location instead of propagating NaN.
    x = np.concatenate([np.linspace(0, 1, 30), [10.0]])
    y = np.concatenate([np.linspace(0, 1, 30) * 2, [3.0]])
    res = corrected_residuals(make_sub(x, y), 0.3)
    assert np.isfinite(res).all()
