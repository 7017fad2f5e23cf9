"""Independent reference computations for the interval estimator.

``vertex_enumeration_bound`` solves the finite-sample problem by brute force
over every corner of the weight box. ``population_bounds`` computes the
infinite-sample bounds from a known outcome density by quadrature, searching
over monotone step functions of the outcome.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bounds import ArmProblem, CateInterval
from .exceptions import NumericalError, ValidationError
from .msm import bracket_arrays

MAX_ENUM = 20


def vertex_enumeration_bound(problem: ArmProblem, direction: str, chunk_bits: int = 16) -> float:
    """Exact max (``"upper"``) or min (``"lower"``) of the weighted ratio over ``{a_i, b_i}^m``."""
    if direction not in ("upper", "lower"):
        raise ValidationError(f"direction must be 'upper' or 'lower', got {direction!r}")
    y, a, b = (np.asarray(v, dtype=float) for v in (problem.yk, problem.a, problem.b))
    m = len(y)
    if m > MAX_ENUM:
        raise ValidationError(f"vertex enumeration refuses m={m} > {MAX_ENUM}")
    best = -np.inf if direction == "upper" else np.inf
    total = 1 << m
    step = 1 << min(m, chunk_bits)
    bits = np.arange(m)
    for start in range(0, total, step):
        codes = np.arange(start, min(start + step, total))
        pick_b = ((codes[:, None] >> bits) & 1).astype(bool)
        W = np.where(pick_b, b, a)
        vals = (W @ y) / W.sum(axis=1)
        best = max(best, vals.max()) if direction == "upper" else min(best, vals.min())
    return float(best)


@dataclass
class PopulationProblem:
    """Known population law for the bound computation.

    Attributes
    ----------
    e1 : callable
        ``x -> P(T=1 | X=x)`` (the nominal propensity defining the brackets).
    density : callable
        ``(y_grid, x, t) -> f_t(y | x)``, the density of ``(T=t, Y <= y)``
        given ``X=x``; it integrates to ``P(T=t | X=x)``.
    y_range : tuple or callable
        ``(y_lo, y_hi)`` or ``(x, t) -> (y_lo, y_hi)``.
    gamma : float
    arm_mass : callable, optional
        ``(x, t) -> P(T=t | X=x)`` used to check the density's normalization.
    """

    e1: Callable
    density: Callable
    y_range: object
    gamma: float
    arm_mass: Optional[Callable] = None

    def limits(self, x, t):
        return self.y_range(x, t) if callable(self.y_range) else self.y_range


def simpson_weights(G: int, lo: float, hi: float) -> np.ndarray:
    if G < 3 or G % 2 == 0:
        raise ValidationError("Simpson's rule needs an odd number (>= 3) of nodes")
    w = np.ones(G)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (hi - lo) / (3.0 * (G - 1))


def population_bounds(problem: PopulationProblem, x, t: int, G: int = 2001, mass_tol: float = 1e-6):
    """Population ``(mu_lo, mu_hi)`` for arm ``t`` at ``x``.

    The upper bound maximizes the weighted mean over weights
    ``alpha + (beta - alpha) u(y)`` with ``u`` a nondecreasing step
    ``1{y > y_g}`` through every grid node ``y_g`` (plus the two constant
    steps); the lower bound uses nonincreasing steps.
    """
    lo, hi = problem.limits(x, t)
    y = np.linspace(lo, hi, G)
    f = np.asarray(problem.density(y, x, t), dtype=float) * simpson_weights(G, lo, hi)
    if np.any(f < 0):
        raise NumericalError("density must be nonnegative")
    mass = f.sum()
    if problem.arm_mass is not None:
        expected = problem.arm_mass(x, t)
        if abs(mass - expected) > mass_tol:
            raise NumericalError(f"density integrates to {mass:.9f}, expected {expected:.9f}")
    if not mass > 0:
        raise NumericalError("density has no mass")
    e1 = float(problem.e1(x))
    alpha, beta = bracket_arrays(e1 if t == 1 else 1.0 - e1, problem.gamma)
    fy = f * y
    zero = np.zeros(1)
    # mass strictly above node g, for g = -1..G-1
    above_f = np.concatenate([np.cumsum(f[::-1])[::-1], zero])
    above_fy = np.concatenate([np.cumsum(fy[::-1])[::-1], zero])
    base_f, base_fy = alpha * mass, alpha * fy.sum()
    extra = beta - alpha
    up = (base_fy + extra * above_fy) / (base_f + extra * above_f)
    below_f = mass - above_f
    below_fy = fy.sum() - above_fy
    down = (base_fy + extra * below_fy) / (base_f + extra * below_f)
    return float(down.min()), float(up.max())


def population_cate_interval(problem: PopulationProblem, x, G: int = 2001) -> CateInterval:
    lo0, hi0 = population_bounds(problem, x, 0, G)
    lo1, hi1 = population_bounds(problem, x, 1, G)
    return CateInterval(lo0, hi0, lo1, hi1)


def population_curve(problem: PopulationProblem, grid, G: int = 2001):
    """``(tau_lo, tau_hi)`` arrays of population bounds along a 1-d grid."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    out = np.array([[iv.tau_lo, iv.tau_hi] for iv in (population_cate_interval(problem, x, G) for x in grid)])
    return out[:, 0], out[:, 1]
