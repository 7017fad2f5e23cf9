"""Marginal sensitivity model: inverse-propensity weight brackets and Gamma calibration."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import NumericalError, ValidationError
from .propensity import fit_logistic, predict_e1


@dataclass(frozen=True)
class MsmParams:
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 1:
            raise ValidationError(f"gamma must be >= 1, got {self.gamma}")


@dataclass(frozen=True)
class SensitivityBracket:
    """Bounds ``[alpha, beta]`` on the inverse complete propensity ``1 / e_t(x, y)``."""

    alpha: float
    beta: float


def bracket_arrays(e_t, gamma):
    """Vectorized weight bounds for nominal propensities ``e_t`` of the arm in question.

    ``alpha = 1/(gamma e) + 1 - 1/gamma`` and ``beta = gamma/e + 1 - gamma``.
    """
    e_t = np.asarray(e_t, dtype=float)
    if not np.all((e_t > 0) & (e_t < 1)):
        raise ValidationError("nominal propensities must lie strictly inside (0, 1)")
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma < 1:
        raise ValidationError(f"gamma must be >= 1, got {gamma}")
    alpha = 1.0 / (gamma * e_t) + 1.0 - 1.0 / gamma
    beta = gamma / e_t + 1.0 - gamma
    return alpha, beta


def bracket(e_t: float, params) -> SensitivityBracket:
    gamma = params.gamma if isinstance(params, MsmParams) else float(params)
    a, b = bracket_arrays(e_t, gamma)
    return SensitivityBracket(float(a), float(b))


def received_propensity(e1, T):
    """Probability of the treatment actually received: ``e1`` if ``T == 1`` else ``1 - e1``."""
    e1 = np.asarray(e1, dtype=float)
    return np.where(np.asarray(T) == 1, e1, 1.0 - e1)


def _logistic_fitter(X, T):
    model = fit_logistic(X, T)
    return lambda Z: predict_e1(model, Z)


@dataclass
class GammaCalibration:
    """Instance-wise odds ratios from dropping one covariate at a time.

    ``gamma`` is the raw ``(n, d)`` matrix, ``folded`` its ``max(g, 1/g)``
    version. ``column_max[j]`` is the largest folded value for covariate
    ``j``; ``quantiles`` maps ``"max", "q50", "q90", "q99"`` to raw-value
    summaries over all entries.
    """

    gamma: np.ndarray
    folded: np.ndarray
    column_max: np.ndarray
    quantiles: dict

    def table(self, names=None):
        """Rows ``(covariate, max, q50, q90, q99, folded_max)``; last row pools all covariates."""
        d = self.gamma.shape[1]
        names = names or [f"x{j}" for j in range(d)]
        rows = []
        for j in range(d):
            g = self.gamma[:, j]
            rows.append((names[j], g.max(), *np.quantile(g, [0.5, 0.9, 0.99]), self.column_max[j]))
        q = self.quantiles
        rows.append(("all", q["max"], q["q50"], q["q90"], q["q99"], float(self.folded.max())))
        return rows


def calibrate_gamma(data, propensity_fitter: Optional[Callable] = None) -> GammaCalibration:
    """Compare full-covariate propensities with drop-one-covariate refits.

    ``propensity_fitter(X, T)`` must return a callable mapping covariate rows
    to P(T=1 | X); it defaults to the package's logistic regression. For unit
    ``i`` and dropped covariate ``j``::

        gamma[i, j] = (1 - e(X_i)) e(X_{i,-j}) / (e(X_i) (1 - e(X_{i,-j})))

    with ``e`` the probability of the treatment unit ``i`` received.
    """
    fitter = propensity_fitter or _logistic_fitter
    X, T = data.X, data.T
    n, d = X.shape
    if d < 2:
        raise ValidationError("gamma calibration needs at least two covariates")

    def fit(cols, label):
        try:
            predictor = fitter(X[:, cols], T)
            return received_propensity(predictor(X[:, cols]), T)
        except NumericalError as exc:
            raise type(exc)(f"propensity fit failed for the {label}: {exc}") from exc

    full = fit(np.arange(d), "full model")
    odds_full = full / (1 - full)
    gamma = np.empty((n, d))
    for j in range(d):
        keep = np.delete(np.arange(d), j)
        drop = fit(keep, f"model without covariate {j}")
        gamma[:, j] = (drop / (1 - drop)) / odds_full
    folded = np.maximum(gamma, 1.0 / gamma)
    quantiles = {"max": float(gamma.max())}
    for q, key in ((0.5, "q50"), (0.9, "q90"), (0.99, "q99")):
        quantiles[key] = float(np.quantile(gamma, q))
    return GammaCalibration(gamma, folded, folded.max(axis=0), quantiles)
