import numpy as np
import pytest

from rdextrap.bandwidth import (
    _boundary_linear_constants,
    imse_bandwidth,
    mse_bandwidth,
    silverman_bandwidth,
)
from rdextrap.data import RdData, subsample
from rdextrap.kernels import KernelSpec, eval_kernel, moments
from rdextrap.rng import stream

TRI = KernelSpec("triangular")


def make_sub(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    data = RdData(y=y, x=x, c=np.zeros_like(x), d=np.ones(x.size, dtype=int))
    return subsample(data, d=1, c=0.0)


def cubic_sample(rng, n, scale=1.0):
    x = np.sort(rng.uniform(0.0, 2.0, n)) * scale
    y = 0.4 * (x / scale) ** 3 - 0.8 * (x / scale) ** 2 + (x / scale) + rng.normal(0, 0.5, n)
    return x, y


def plugin_oracle(x, y, x0):
    """Hand-computed mirror of the documented pointwise plug-in formula."""
    n = x.size
    lo, hi = x.min(), x.max()
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    design = np.vander((x - mid) / half, N=5, increasing=True)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    sigma2 = float(resid @ resid) / (n - 5)
    cov = sigma2 * np.linalg.inv(design.T @ design)
    t0 = (x0 - mid) / half
    basis = np.array([0.0, 0.0, 2.0, 6.0 * t0, 12.0 * t0 * t0]) / half**2
    mu2 = float(basis @ coef)
    mu2_sq = max(mu2**2 - 4.0 * float(basis @ cov @ basis), 0.0)
    sd = np.std(x)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    h_kde = 0.9 * min(sd, iqr / 1.34) * n ** (-0.2)
    f = float(np.sum(eval_kernel(TRI, (x - x0) / h_kde))) / (n * h_kde)
    boundary = x0 >= x.max() or x0 <= x.min()
    if boundary:
        c_bias, rough = _boundary_linear_constants("triangular")
        f = 2.0 * f
    else:
        mom = moments(TRI)
        c_bias, rough = mom.pi[2], mom.roughness
    raw = (sigma2 * rough / (c_bias**2 * mu2_sq * f)) ** 0.2 * n ** (-0.2)
    nn10 = np.sort(np.abs(x - x0))[9]
    return max(min(raw, (hi - lo) / 2.0), nn10)


@pytest.mark.parametrize("x0_kind", ["interior", "boundary"])
def test_matches_hand_computed_plugin_on_fixed_dataset(x0_kind):
    rng = stream(4040, 0)
    x, y = cubic_sample(rng, 40)
    sub = make_sub(x, y)
    x0 = 1.0 if x0_kind == "interior" else float(x.max())
    assert mse_bandwidth(sub, x0) == pytest.approx(plugin_oracle(x, y, x0), abs=1e-8)


def test_scale_equivariance_within_two_percent():
    rng = stream(4041, 0)
    x, y = cubic_sample(rng, 200)
    b1 = mse_bandwidth(make_sub(x, y), 1.0)
    b10 = mse_bandwidth(make_sub(10.0 * x, y), 10.0)
    assert b10 / b1 == pytest.approx(10.0, rel=0.02)


def test_y_translation_invariance():
    rng = stream(4042, 0)
    x, y = cubic_sample(rng, 150)
    b = mse_bandwidth(make_sub(x, y), 1.0)
    assert mse_bandwidth(make_sub(x, y + 100.0), 1.0) == pytest.approx(b, rel=1e-12)


def curved_sample(rng, n):
    # Strong, well-identified curvature so the selector stays off its clamps.
    x = np.sort(rng.uniform(0.0, 2.0, n))
    y = 2.0 * np.sin(2.0 * x) + rng.normal(0, 0.5, n)
    return x, y


def test_rate_in_n_close_to_fifth_root():
    # Median over repeated draws: doubling n scales b by about 2^(-1/5).
    ratios = []
    for seed in range(50):
        rng = stream(4043, seed)
        x1, y1 = curved_sample(rng, 400)
        x2, y2 = curved_sample(rng, 800)
        ratios.append(mse_bandwidth(make_sub(x2, y2), 1.0) / mse_bandwidth(make_sub(x1, y1), 1.0))
    assert float(np.median(ratios)) == pytest.approx(2 ** (-0.2), rel=0.10)


def test_deterministic_given_data():
    rng = stream(4044, 0)
    x, y = cubic_sample(rng, 120)
    sub = make_sub(x, y)
    assert mse_bandwidth(sub, 0.9) == mse_bandwidth(sub, 0.9)


def test_linear_truth_hits_upper_clamp():
    rng = stream(4045, 0)
    x = np.sort(rng.uniform(0, 2, 300))
    y = 1.5 * x - 0.3 + rng.normal(0, 0.3, 300)
    sub = make_sub(x, y)
    span = x.max() - x.min()
    assert mse_bandwidth(sub, 1.0) == pytest.approx(span / 2.0)
    assert imse_bandwidth(sub, (0.5, 1.5)) == pytest.approx(span / 2.0)


def test_small_sample_fallback_is_half_span():
    rng = stream(4046, 0)
    x = np.sort(rng.uniform(0, 1, 12))
    y = rng.normal(0, 1, 12)
    sub = make_sub(x, y)
    assert mse_bandwidth(sub, 0.5) == pytest.approx((x.max() - x.min()) / 2.0)


def test_degenerate_interval_reduces_to_pointwise():
    rng = stream(4047, 0)
    x, y = cubic_sample(rng, 250)
    sub = make_sub(x, y)
    assert imse_bandwidth(sub, (0.9, 0.9)) == pytest.approx(mse_bandwidth(sub, 0.9), abs=1e-8)


def test_interval_outside_range_rejected():
    rng = stream(4048, 0)
    x, y = cubic_sample(rng, 100)
    with pytest.raises(ValueError):
        imse_bandwidth(make_sub(x, y), (-1.0, 1.0))


def test_silverman_positive():
    assert silverman_bandwidth(np.linspace(0, 1, 50)) > 0
