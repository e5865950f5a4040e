"""scikit-learn compatible wrappers around the solver kernels."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .solvers import LassoConfig, RidgeState, lasso_fit, ridge_estimate


class CoordinateDescentLasso(RegressorMixin, BaseEstimator):
    """Lasso without intercept, objective ``(1/t)||y - Xw||^2 + alpha ||w||_1``.

    Note the factor: this is twice the penalty scale of
    :class:`sklearn.linear_model.Lasso`, i.e. ``alpha`` here equals
    ``2 * alpha`` there.

    With ``warm_start=True`` a refit starts from the previous ``coef_`` when the
    number of features is unchanged.
    """

    def __init__(self, alpha=0.1, tol=1e-7, max_iter=10_000, warm_start=False):
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter
        self.warm_start = warm_start

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        init = None
        if self.warm_start and getattr(self, "coef_", None) is not None and self.coef_.shape == (X.shape[1],):
            init = self.coef_
        cfg = LassoConfig(lam=self.alpha, max_iters=self.max_iter, tol=self.tol)
        result = lasso_fit(X, y, cfg, warm_start=init)
        self.coef_ = result.coef
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.coef_


class ThresholdedLasso(SelectorMixin, BaseEstimator):
    """Select features whose Lasso coefficient magnitude strictly exceeds ``threshold``."""

    def __init__(self, alpha=0.1, threshold=0.0, tol=1e-7, max_iter=10_000, warm_start=False):
        self.alpha = alpha
        self.threshold = threshold
        self.tol = tol
        self.max_iter = max_iter
        self.warm_start = warm_start

    def fit(self, X, y):
        lasso = getattr(self, "lasso_", None)
        if not (self.warm_start and lasso is not None):
            lasso = CoordinateDescentLasso(warm_start=self.warm_start)
        lasso.set_params(alpha=self.alpha, tol=self.tol, max_iter=self.max_iter)
        lasso.fit(X, y)
        self.lasso_ = lasso
        self.n_features_in_ = lasso.n_features_in_
        self.coef_ = lasso.coef_
        self.support_mask_ = np.abs(self.coef_) > self.threshold
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_mask_")
        return self.support_mask_


class IncrementalRidge(RegressorMixin, BaseEstimator):
    """Ridge regression with unit penalty, no intercept, updated one batch at a time.

    ``partial_fit`` adds rows to the running ``M = I + X^T X`` and ``b = X^T y``;
    ``fit`` starts from the identity.
    """

    def fit(self, X, y):
        if hasattr(self, "state_"):
            del self.state_
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        first = not hasattr(self, "state_")
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True, reset=first)
        if first:
            self.state_ = RidgeState.identity(np.arange(X.shape[1]))
        self.state_.M += X.T @ X
        self.state_.b += X.T @ y
        self.coef_ = ridge_estimate(self.state_)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.coef_
