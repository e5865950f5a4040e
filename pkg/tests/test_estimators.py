import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.linear_model import Lasso
from sklearn.pipeline import make_pipeline

from ctlbandit.estimators import CoordinateDescentLasso, IncrementalRidge, ThresholdedLasso
from oracles import batch_ridge


@pytest.fixture
def sparse_data():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((80, 20))
    theta = np.zeros(20)
    theta[[2, 7, 11]] = [1.5, -1.0, 0.8]
    return X, X @ theta + 0.05 * rng.standard_normal(80), theta


def test_matches_sklearn_lasso_at_half_alpha(sparse_data):
    X, y, _ = sparse_data
    ours = CoordinateDescentLasso(alpha=0.1).fit(X, y)
    ref = Lasso(alpha=0.05, fit_intercept=False, tol=1e-12, max_iter=100_000).fit(X, y)
    np.testing.assert_allclose(ours.coef_, ref.coef_, atol=1e-6)
    assert ours.converged_


def test_params_round_trip_and_clone():
    est = CoordinateDescentLasso(alpha=0.3, tol=1e-6)
    assert est.get_params() == {"alpha": 0.3, "tol": 1e-6, "max_iter": 10_000, "warm_start": False}
    twin = clone(est.set_params(alpha=0.2))
    assert twin.alpha == 0.2 and not hasattr(twin, "coef_")


def test_predict_requires_fit():
    with pytest.raises(NotFittedError):
        CoordinateDescentLasso().predict(np.ones((2, 3)))


def test_predict_checks_feature_count(sparse_data):
    X, y, _ = sparse_data
    est = CoordinateDescentLasso().fit(X, y)
    with pytest.raises(ValueError):
        est.predict(X[:, :5])


def test_thresholded_selector_recovers_support(sparse_data):
    X, y, theta = sparse_data
    sel = ThresholdedLasso(alpha=0.05, threshold=0.3).fit(X, y)
    np.testing.assert_array_equal(sel.get_support(indices=True), np.flatnonzero(theta))
    assert sel.transform(X).shape == (80, 3)


def test_selector_threshold_is_strict(sparse_data):
    X, y, _ = sparse_data
    sel = ThresholdedLasso(alpha=0.05, threshold=0.0).fit(X, y)
    np.testing.assert_array_equal(sel.get_support(indices=True), np.flatnonzero(sel.coef_))
    above = ThresholdedLasso(alpha=0.05, threshold=np.abs(sel.coef_).max()).fit(X, y)
    assert above.get_support(indices=True).size == 0


def test_selector_composes_in_pipeline(sparse_data):
    X, y, theta = sparse_data
    pipe = make_pipeline(ThresholdedLasso(alpha=0.05, threshold=0.3), IncrementalRidge()).fit(X, y)
    assert pipe.predict(X).shape == (80,)
    np.testing.assert_allclose(pipe[-1].coef_, theta[theta != 0], atol=0.05)


def test_incremental_ridge_partial_fit_equals_batch():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 4))
    y = rng.standard_normal(30)
    est = IncrementalRidge()
    for chunk in np.array_split(np.arange(30), 5):
        est.partial_fit(X[chunk], y[chunk])
    np.testing.assert_allclose(est.coef_, batch_ridge(X, y)[2], atol=1e-12)
    np.testing.assert_allclose(IncrementalRidge().fit(X, y).coef_, est.coef_, atol=1e-12)
    # fit resets
    np.testing.assert_allclose(est.fit(X[:5], y[:5]).coef_, batch_ridge(X[:5], y[:5])[2], atol=1e-12)
