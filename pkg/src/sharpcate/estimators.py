"""Scikit-learn style front ends for the interval estimator and the minimax policy."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bounds import interval_curve
from .data import ObsDataset
from .exceptions import ValidationError
from .kernels import KernelSpec, loocv_bandwidth
from .policy import minimax_rule, resolve_default
from .propensity import fit_logistic, predict_e1


def _check_treatment(T, n):
    T = np.asarray(T)
    if T.shape != (n,):
        raise ValidationError("T must have one entry per row of X")
    if not np.all((T == 0) | (T == 1)):
        raise ValidationError("treatment must be 0 or 1")
    return T.astype(np.int8)


class KernelCateBounds(BaseEstimator):
    """Interval estimates of the conditional treatment effect under unobserved confounding.

    Parameters
    ----------
    gamma : float, default=1.0
        Sensitivity level (odds-ratio bound between nominal and complete
        propensities). ``gamma=1`` reduces to IPW-weighted kernel regression.
    kernel : {"gaussian", "uniform"}, default="gaussian"
    bandwidth : "auto", float or array-like, default="auto"
        ``"auto"`` selects one bandwidth per arm by leave-one-out
        cross-validation of unweighted kernel regression within the arm.
    domain : array-like of shape (d, 2), optional
        Covariate box for boundary renormalization of the kernel.
    propensity : {"known", "logistic"}, default="known"
        ``"known"`` requires ``e1`` in :meth:`fit`.
    subset : sequence of int, optional
        Covariates the effect is conditioned on (partial CATE). The
        propensity always uses every column.
    bandwidth_candidates : array-like, optional
        Candidate grid for ``bandwidth="auto"``.
    loocv_max_eval : int, optional
        Cap on held-out points scored during bandwidth selection.

    Attributes
    ----------
    bandwidths_ : tuple of ndarray
        Selected ``(control, treated)`` bandwidths.
    e1_ : ndarray
        Nominal propensities of the training rows.
    propensity_model_ : LogisticModel or None
    """

    def __init__(self, gamma=1.0, kernel="gaussian", bandwidth="auto", domain=None, propensity="known",
                 subset=None, bandwidth_candidates=None, loocv_max_eval=None):
        self.gamma = gamma
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.domain = domain
        self.propensity = propensity
        self.subset = subset
        self.bandwidth_candidates = bandwidth_candidates
        self.loocv_max_eval = loocv_max_eval

    def fit(self, X, T, Y, e1=None):
        X, Y = check_X_y(X, Y, y_numeric=True)
        T = _check_treatment(T, len(Y))
        if self.propensity == "known":
            if e1 is None:
                raise ValidationError("propensity='known' requires e1")
            e1 = np.asarray(e1, dtype=float)
            self.propensity_model_ = None
        elif self.propensity == "logistic":
            self.propensity_model_ = fit_logistic(X, T)
            e1 = predict_e1(self.propensity_model_, X)
        else:
            raise ValidationError(f"unknown propensity mode {self.propensity!r}")
        self.data_ = ObsDataset(X, T, Y, e1)
        self.e1_ = self.data_.e1_known
        self.subset_ = np.arange(X.shape[1]) if self.subset is None else np.asarray(self.subset, dtype=int)
        self.n_features_in_ = X.shape[1]

        if isinstance(self.bandwidth, str):
            if self.bandwidth != "auto":
                raise ValidationError(f"bandwidth must be 'auto' or numeric, got {self.bandwidth!r}")
            kernel_data = ObsDataset(X[:, self.subset_], T, Y)
            self.bandwidths_ = tuple(
                loocv_bandwidth(kernel_data, t, self.bandwidth_candidates, self.kernel, self.domain,
                                max_eval=self.loocv_max_eval)
                for t in (0, 1))
        else:
            h = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (len(self.subset_),)).copy()
            self.bandwidths_ = (h, h)
        self.kernels_ = tuple(KernelSpec(self.kernel, h, self.domain) for h in self.bandwidths_)
        return self

    def _grid(self, X):
        X = check_array(np.asarray(X, dtype=float).reshape(len(X), -1) if np.ndim(X) == 1 else X)
        if X.shape[1] != len(self.subset_):
            raise ValidationError(f"expected {len(self.subset_)} columns, got {X.shape[1]}")
        return X

    def predict_curve(self, X, gammas=None):
        """Bounds at every row of ``X`` (kernel coordinates) for each ``gamma``."""
        check_is_fitted(self, "data_")
        gammas = self.gamma if gammas is None else gammas
        return interval_curve(self.data_, self._grid(X), gammas, self.kernels_, e1=self.e1_, subset=self.subset_)

    def predict(self, X):
        """``(n, 2)`` array of ``[tau_lo, tau_hi]`` at ``self.gamma``."""
        curve = self.predict_curve(X, [self.gamma])
        return np.column_stack([curve.tau_lo[:, 0], curve.tau_hi[:, 0]])


class MinimaxRegretPolicy(BaseEstimator):
    """Treatment rule minimizing worst-case regret relative to a default rule.

    Treats where the estimated effect interval lies at or below zero,
    withholds where it lies at or above zero, and otherwise follows
    ``default_rule`` (``"never"``, ``"always"`` or a callable on covariates).
    """

    def __init__(self, bounds=None, default_rule="never"):
        self.bounds = bounds
        self.default_rule = default_rule

    def fit(self, X, T, Y, e1=None):
        from sklearn.base import clone

        est = KernelCateBounds() if self.bounds is None else clone(self.bounds)
        self.bounds_ = est.fit(X, T, Y, e1=e1)
        return self

    def predict_interval(self, X):
        check_is_fitted(self, "bounds_")
        return self.bounds_.predict(X)

    def decision_table(self, X):
        iv = self.predict_interval(X)
        return minimax_rule(iv[:, 0], iv[:, 1], resolve_default(self.default_rule, X))

    def predict(self, X):
        return self.decision_table(X)[1]
