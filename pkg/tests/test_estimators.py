import numpy as np
import pytest
from sklearn.base import clone

from rdextrap.estimators import FuzzyRdBounds, NotFittedError, SharpRdBounds
from rdextrap.simulation import generate_fuzzy, generate_sharp


def design_matrix(data, with_d=True):
    cols = [data.x, data.c] + ([data.d] if with_d else [])
    return np.column_stack(cols)


def test_sharp_fit_populates_attributes():
    data = generate_sharp(400, seed=1)
    est = SharpRdBounds(cutoffs=(1.0, 2.25), n_boot=150, seed=2, grid_size=15)
    est.fit(design_matrix(data), data.y)
    assert est.grid_.size >= 15
    for name in ("lower_", "upper_", "var_lower_", "var_upper_", "cb_point_",
                 "band_lo_", "band_hi_"):
        assert getattr(est, name).shape == est.grid_.shape
    assert est.bandwidths_.b_1l > 0
    assert est.diagnostics_.flag in ("consistent", "refuted")
    assert est.band_.replications == 150


def test_cutoffs_inferred_from_labels():
    data = generate_sharp(300, seed=2)
    est = SharpRdBounds(n_boot=0, grid_size=10).fit(design_matrix(data, with_d=False), data.y)
    assert est._pair.l == 1.0 and est._pair.h == 2.25
    assert est.band_ is None


def test_sklearn_protocol_round_trip():
    est = SharpRdBounds(cutoffs=(1.0, 2.25), alpha=0.1, n_boot=0)
    params = est.get_params()
    assert params["alpha"] == 0.1
    cloned = clone(est)
    assert cloned.get_params() == params
    cloned.set_params(alpha=0.05)
    assert cloned.alpha == 0.05 and est.alpha == 0.1


def test_predict_requires_fit_and_matches_refit_values():
    data = generate_sharp(400, seed=3)
    est = SharpRdBounds(cutoffs=(1.0, 2.25), n_boot=0, grid_size=12)
    with pytest.raises(NotFittedError):
        est.predict([1.5])
    est.fit(design_matrix(data), data.y)
    idx = 5
    x0 = est.grid_[idx]
    pred = est.predict([x0])
    assert pred.shape == (1, 2)
    assert pred[0, 0] == pytest.approx(est.lower_[idx], abs=1e-12)
    assert pred[0, 1] == pytest.approx(est.upper_[idx], abs=1e-12)


def test_sharp_rule_violations_rejected():
    data = generate_sharp(300, seed=4)
    X = design_matrix(data)
    X[0, 2] = 1 - X[0, 2]
    with pytest.raises(ValueError, match="sharp rule"):
        SharpRdBounds(cutoffs=(1.0, 2.25), n_boot=0).fit(X, data.y)


def test_unknown_cutoff_labels_rejected():
    data = generate_sharp(300, seed=5)
    with pytest.raises(ValueError, match="cutoff labels"):
        SharpRdBounds(cutoffs=(1.1, 2.25), n_boot=0).fit(design_matrix(data), data.y)


def test_fuzzy_requires_treatment_column():
    data = generate_fuzzy(300, seed=6)
    with pytest.raises(ValueError, match="treatment column"):
        FuzzyRdBounds(cutoffs=(1.0, 2.25), n_boot=0).fit(design_matrix(data, with_d=False), data.y)


def test_fuzzy_one_sided_compliance_enforced():
    data = generate_fuzzy(300, seed=7)
    X = design_matrix(data)
    below = np.flatnonzero(X[:, 0] < X[:, 1])[0]
    X[below, 2] = 1.0
    with pytest.raises(ValueError, match="one-sided compliance"):
        FuzzyRdBounds(cutoffs=(1.0, 2.25), n_boot=0).fit(X, data.y)


def test_fuzzy_fit_and_predict():
    data = generate_fuzzy(400, seed=8)
    est = FuzzyRdBounds(cutoffs=(1.0, 2.25), n_boot=120, seed=4, grid_size=12)
    est.fit(design_matrix(data), data.y)
    assert np.all(est.p_hat_ >= est.p_min) and np.all(est.p_hat_ <= 1.0)
    pred = est.predict([est.grid_[3]])
    assert pred[0, 0] == pytest.approx(est.lower_[3], abs=1e-12)


def test_manual_bandwidths_accepted():
    data = generate_sharp(400, seed=9)
    est = SharpRdBounds(cutoffs=(1.0, 2.25), n_boot=0, bandwidths=(0.6, 0.5, 0.24))
    est.fit(design_matrix(data), data.y)
    assert est.bandwidths_.b_1l == 0.6
    assert est.bandwidths_.b_0l == 0.24
