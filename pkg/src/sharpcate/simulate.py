"""Synthetic confounded data with closed-form ground truth.

Three generators share a binary hidden confounder ``u ~ Bern(1/2)``:

``sin1d``
    ``X ~ Unif[-2, 2]``, nominal propensity ``e(x) = sigmoid(0.75 x + 0.5)``
    and complete propensity ``u / alpha_1(x) + (1 - u) / beta_1(x)`` at
    ``Gamma* = exp(log_gamma_star)``, so selection sits exactly on the edge
    of the sensitivity model.
``pcate3d``
    ``X ~ Unif[-1, 1]^3`` with the same construction around
    ``sigmoid(theta . x + 0.5)``; effect heterogeneity only through ``x_0``.
``appendix_logistic``
    ``X ~ Unif[-2, 2]`` and ``P(T=1 | x, u) = sigmoid(0.75 x + 2 (u - 0.5) + 0.5)``;
    the nominal propensity is not handed out and must be learned.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .data import ObsDataset, SimTruth
from .exceptions import ValidationError
from .msm import bracket_arrays
from .oracle import PopulationProblem

DGPS = ("sin1d", "pcate3d", "appendix_logistic")
_ALIASES = {"appendix": "appendix_logistic"}

SLOPE = 0.75
OFFSET = 0.5
THETA = np.array([0.75, -0.5, 0.5])
BETA_X = np.array([0.5, 0.5, 0.5])
TRUNCATION_SD = 8.0


def canonical_name(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in DGPS:
        raise ValidationError(f"unknown data generating process {name!r}; expected one of {DGPS}")
    return name


@dataclass(frozen=True)
class DgpSpec:
    name: str = "sin1d"
    log_gamma_star: float = 1.0
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "name", canonical_name(self.name))
        if not self.log_gamma_star >= 0:
            raise ValidationError("log_gamma_star must be >= 0")
        if int(self.n) < 1:
            raise ValidationError("n must be >= 1")


def _shape(x):
    return np.asarray(x, dtype=float)


def outcome_mean(x, t, u, name="sin1d"):
    """Mean of ``Y(t)`` given the effect-modifying covariate ``x`` and confounder ``u``.

    Excludes the ``beta_x . X`` shift of ``pcate3d``, which is common to both arms.
    """
    x, u = _shape(x), _shape(u)
    s = 2 * t - 1
    base = s * x + s - 2 * np.sin(2 * s * x)
    if canonical_name(name) == "appendix_logistic":
        return base - 2 * (u - 1) * (1 + 0.5 * x)
    return base - 2 * (2 * u - 1) * (1 + 0.5 * x)


def nominal_e1(x, name="sin1d"):
    """The nominal propensity handed to the estimator (``sin1d``/``pcate3d``)."""
    name = canonical_name(name)
    x = _shape(x)
    if name == "pcate3d":
        return expit(np.atleast_2d(x) @ THETA + OFFSET)
    if name == "sin1d":
        return expit(SLOPE * x + OFFSET)
    raise ValidationError("appendix_logistic has no fixed nominal propensity; it is learned from data")


def complete_e1(x, u, log_gamma_star, name="sin1d"):
    """``P(T=1 | X=x, u)``."""
    name = canonical_name(name)
    u = _shape(u)
    if name == "appendix_logistic":
        return expit(SLOPE * _shape(x) + 2 * (u - 0.5) + OFFSET)
    alpha, beta = bracket_arrays(nominal_e1(x, name), np.exp(log_gamma_star))
    return u / alpha + (1 - u) / beta


def marginal_e1(x, log_gamma_star, name="sin1d"):
    """``P(T=1 | X=x)`` after averaging over the confounder."""
    return 0.5 * (complete_e1(x, 1.0, log_gamma_star, name) + complete_e1(x, 0.0, log_gamma_star, name))


def generate(spec: DgpSpec) -> ObsDataset:
    """Draw a dataset. Deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n = int(spec.n)
    if spec.name == "pcate3d":
        X = rng.uniform(-1.0, 1.0, size=(n, 3))
        xs = X[:, 0]
    else:
        X = rng.uniform(-2.0, 2.0, size=(n, 1))
        xs = X[:, 0]
    u = rng.binomial(1, 0.5, size=n).astype(float)
    x_prop = X if spec.name == "pcate3d" else xs
    p = complete_e1(x_prop, u, spec.log_gamma_star, spec.name)
    T = (rng.random(n) < p).astype(np.int8)
    eps = rng.standard_normal(n)
    shift = X @ BETA_X if spec.name == "pcate3d" else 0.0
    Y0 = outcome_mean(xs, 0, u, spec.name) + shift + eps
    Y1 = outcome_mean(xs, 1, u, spec.name) + shift + eps
    Y = np.where(T == 1, Y1, Y0)
    e1 = None if spec.name == "appendix_logistic" else nominal_e1(x_prop, spec.name)
    return ObsDataset(X, T, Y, e1, SimTruth(Y0, Y1, u))


def true_cate(name, x):
    """``E[Y(1) - Y(0) | x] = 2 + 2x - 4 sin(2x)`` (``x`` is ``x_0`` for ``pcate3d``)."""
    canonical_name(name)
    x = _shape(x)
    return 2 + 2 * x - 4 * np.sin(2 * x)


def confounder_posterior(x, t, log_gamma_star, name="sin1d"):
    """``P(u=1 | X=x, T=t)`` by Bayes' rule with ``u ~ Bern(1/2)``."""
    p1 = complete_e1(x, 1.0, log_gamma_star, name)
    p0 = complete_e1(x, 0.0, log_gamma_star, name)
    if t == 1:
        return p1 / (p1 + p0)
    return (1 - p1) / ((1 - p1) + (1 - p0))


def confounded_cate(name, x, log_gamma_star):
    """``E[Y | X=x, T=1] - E[Y | X=x, T=0]``, the effect a confounded regression recovers."""
    name = canonical_name(name)
    if name == "pcate3d":
        raise ValidationError("confounded_cate is defined for the one-dimensional generators only")
    x = _shape(x)
    out = 0.0
    for t, sign in ((1, 1.0), (0, -1.0)):
        q = confounder_posterior(x, t, log_gamma_star, name)
        out = out + sign * (q * outcome_mean(x, t, 1.0, name) + (1 - q) * outcome_mean(x, t, 0.0, name))
    return out


def confounding_term(name, x, log_gamma_star):
    return confounded_cate(name, x, log_gamma_star) - true_cate(name, x)


def population_problem(name, log_gamma_star, gamma) -> PopulationProblem:
    """Closed-form outcome law of a one-dimensional generator for the population oracle.

    ``f_t(y | x) = sum_u P(u) P(T=t | x, u) phi(y - m_t(x, u))``. For
    ``appendix_logistic`` the brackets use the true marginal propensity.
    """
    name = canonical_name(name)
    if name == "pcate3d":
        raise ValidationError("population oracle covers the one-dimensional generators only")

    def arm_prob(x, t, u):
        p = complete_e1(x, u, log_gamma_star, name)
        return p if t == 1 else 1 - p

    def density(y, x, t):
        return sum(0.5 * arm_prob(x, t, u) * norm.pdf(y - outcome_mean(x, t, u, name)) for u in (0.0, 1.0))

    def y_range(x, t):
        means = [float(outcome_mean(x, t, u, name)) for u in (0.0, 1.0)]
        return min(means) - TRUNCATION_SD, max(means) + TRUNCATION_SD

    def arm_mass(x, t):
        return float(sum(0.5 * arm_prob(x, t, u) for u in (0.0, 1.0)))

    if name == "sin1d":
        e1 = lambda x: float(nominal_e1(x, name))
    else:
        e1 = lambda x: float(marginal_e1(x, log_gamma_star, name))
    return PopulationProblem(e1=e1, density=density, y_range=y_range, gamma=float(gamma), arm_mass=arm_mass)
