"""Nominal propensity scores P(T=1 | X) by ridge-stabilized logistic regression."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ConvergenceError, ValidationError

CLIP = 1e-6


@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    coef: np.ndarray

    def __post_init__(self):
        coef = np.atleast_1d(np.asarray(self.coef, dtype=float))
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "intercept", float(self.intercept))
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(coef))):
            raise ValidationError("logistic model parameters must be finite")


def fit_logistic(X, T, max_iter=100, tol=1e-8, ridge=1e-6) -> LogisticModel:
    """Maximize the ridge-penalized Bernoulli log-likelihood by IRLS.

    The ridge term ``ridge/2 * ||coef||^2`` leaves the intercept unpenalized
    and keeps the Newton system well-posed under (quasi-)separation.
    Converged when the largest absolute parameter update is below ``tol``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    T = np.asarray(T, dtype=float)
    n, d = X.shape
    if len(T) != n:
        raise ValidationError("X and T have different lengths")
    if not np.all((T == 0) | (T == 1)):
        raise ValidationError("treatment must be binary")
    if T.min() == T.max():
        raise ValidationError("logistic regression needs both treatment classes")
    if n < d + 1:
        raise ValidationError(f"need at least {d + 1} rows to fit {d} coefficients and an intercept")

    Z = np.hstack([np.ones((n, 1)), X])
    penalty = np.full(d + 1, ridge)
    penalty[0] = 0.0
    # ridge of at least 1e-10 on every coefficient keeps the Hessian invertible
    penalty[1:] = np.maximum(penalty[1:], 1e-10)
    beta = np.zeros(d + 1)
    p0 = T.mean()
    beta[0] = np.log(p0 / (1 - p0))
    for _ in range(max_iter):
        p = expit(Z @ beta)
        grad = Z.T @ (T - p) - penalty * beta
        w = p * (1 - p)
        hess = (Z * w[:, None]).T @ Z + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            return LogisticModel(beta[0], beta[1:])
    p = expit(Z @ beta)
    gnorm = float(np.linalg.norm(Z.T @ (T - p) - penalty * beta))
    raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations (gradient norm {gnorm:.3g})",
                           grad_norm=gnorm)


def predict_e1(model: LogisticModel, x) -> np.ndarray:
    """``sigmoid(intercept + coef . x)`` clamped to ``[1e-6, 1 - 1e-6]``; vectorized over rows."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim <= 1 and model.coef.size == x.size
    X = np.atleast_2d(x) if scalar or x.ndim == 2 else x[:, None]
    if X.shape[1] != model.coef.size:
        raise ValidationError(f"model has {model.coef.size} coefficients but x has {X.shape[1]} columns")
    p = np.clip(expit(model.intercept + X @ model.coef), CLIP, 1 - CLIP)
    return float(p[0]) if scalar else p


class LogisticPropensity(ClassifierMixin, BaseEstimator):
    """Scikit-learn wrapper around :func:`fit_logistic`."""

    def __init__(self, ridge=1e-6, max_iter=100, tol=1e-8):
        self.ridge = ridge
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, T):
        X, T = check_X_y(X, T)
        self.model_ = fit_logistic(X, T, max_iter=self.max_iter, tol=self.tol, ridge=self.ridge)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = predict_e1(self.model_, check_array(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
