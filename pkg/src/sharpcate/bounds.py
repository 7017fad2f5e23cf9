"""Adversarially weighted kernel regression bounds on conditional means and CATE.

For one treatment arm at one evaluation point the estimator is a ratio

    sum_i W_i K_i Y_i / sum_i W_i K_i,    alpha_i <= W_i <= beta_i,

maximized (or minimized) over the weight box. The optimum puts the low
weight ``alpha_i`` on every outcome below a threshold and the high weight
``beta_i`` above it (reversed for the minimum), and the objective is unimodal
in the threshold position. After sorting the outcomes, prefix sums evaluate
every threshold in O(m) and a line search stops at the first descent.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import IntervalCurve, ObsDataset
from .exceptions import EmptySampleError, ValidationError
from .kernels import KernelSpec, boundary_normalizer, kernel_weights
from .msm import MsmParams, bracket_arrays

_TINY = 1e-300


@dataclass(frozen=True)
class ArmProblem:
    """Sorted outcomes with their low-side and high-side coefficients.

    ``a[i] = alpha_i * K_i`` and ``b[i] = beta_i * K_i`` for the observations
    of one arm carrying positive kernel weight, ordered by ascending ``yk``.
    """

    yk: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        yk, a, b = (np.asarray(v, dtype=float) for v in (self.yk, self.a, self.b))
        if not (yk.ndim == a.ndim == b.ndim == 1) or not (len(yk) == len(a) == len(b)):
            raise ValidationError("yk, a and b must be 1-d arrays of equal length")
        if len(yk) == 0:
            raise ValidationError("an arm problem needs at least one observation")
        if np.any(np.diff(yk) < 0):
            raise ValidationError("outcomes must be sorted ascending")
        if not np.all(a > 0) or not np.all(b >= a):
            raise ValidationError("coefficients must satisfy 0 < a <= b")
        object.__setattr__(self, "yk", yk)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_unsorted(cls, y, a, b):
        order = np.argsort(y, kind="stable")
        return cls(np.asarray(y, dtype=float)[order], np.asarray(a, dtype=float)[order],
                   np.asarray(b, dtype=float)[order])

    @property
    def m(self) -> int:
        return len(self.yk)


def _split_sums(lead, trail, y):
    """Objective at every threshold k = 0..m.

    Units ``i <= k`` (1-based) take the ``lead`` coefficient, the rest the
    ``trail`` coefficient. Prefix sums run left to right; suffix sums are
    accumulated from the right rather than by subtraction from the total.
    """
    zero = np.zeros(1)
    pre_w = np.concatenate([zero, np.cumsum(lead)])
    pre_wy = np.concatenate([zero, np.cumsum(lead * y)])
    suf_w = np.concatenate([np.cumsum(trail[::-1])[::-1], zero])
    suf_wy = np.concatenate([np.cumsum((trail * y)[::-1])[::-1], zero])
    den = pre_w + suf_w
    if np.any(den <= _TINY):
        raise EmptySampleError("no effective sample: kernel-weighted mass underflows")
    return (pre_wy + suf_wy) / den


def threshold_path(problem: ArmProblem, direction: str) -> np.ndarray:
    """Objective values ``lambda(k)`` for ``k = 0..m``.

    For ``"upper"`` the first ``k`` units get ``a`` and the rest ``b``; for
    ``"lower"`` the roles swap. Index 0 is the all-``b`` (resp. all-``a``)
    assignment, index ``m`` the opposite one.
    """
    if direction == "upper":
        return _split_sums(problem.a, problem.b, problem.yk)
    if direction == "lower":
        return _split_sums(problem.b, problem.a, problem.yk)
    raise ValidationError(f"direction must be 'upper' or 'lower', got {direction!r}")


def _line_search(lam, y):
    """First k in 1..m-1 at which the objective stops improving; m if it never does.

    Moving unit k+1 across the threshold changes the objective in the
    direction of ``lam[k] - y[k+1]`` (upper) or ``y[k+1] - lam[k]`` (lower),
    so the stop condition ``lam[k] >= lam[k+1]`` (upper) or ``lam[k] <=
    lam[k+1]`` (lower) is equivalent to ``y[k+1] >= lam[k]`` in both cases.
    Testing the outcome against the running value keeps units with
    negligible kernel weight, whose moves leave ``lam`` unchanged in floating
    point, from ending the search early.
    """
    m = len(y)
    hits = np.flatnonzero(y[1:] >= lam[1:m])
    return int(hits[0]) + 1 if hits.size else m


def _clip(v, problem):
    # a weighted mean cannot leave the range of the data
    return float(min(max(v, problem.yk[0]), problem.yk[-1]))


def mu_upper(problem: ArmProblem, return_k: bool = False):
    lam = threshold_path(problem, "upper")
    k = _line_search(lam, problem.yk)
    value = _clip(lam[k], problem)
    return (value, k) if return_k else value


def mu_lower(problem: ArmProblem, return_k: bool = False):
    lam = threshold_path(problem, "lower")
    k = _line_search(lam, problem.yk)
    value = _clip(lam[k], problem)
    return (value, k) if return_k else value


def weighted_mu(indicators, kernel, W, Y) -> float:
    """Kernel- and weight-averaged outcome over the units flagged by ``indicators``."""
    ind = np.asarray(indicators, dtype=float)
    w = ind * np.asarray(kernel, dtype=float) * np.asarray(W, dtype=float)
    den = w.sum()
    if not den > _TINY:
        raise EmptySampleError("no effective sample at x")
    Y = np.asarray(Y, dtype=float)
    used = Y[w > 0]
    return float(np.clip(np.dot(w, Y) / den, used.min(), used.max()))


@dataclass(frozen=True)
class CateInterval:
    mu0_lo: float
    mu0_hi: float
    mu1_lo: float
    mu1_hi: float

    @property
    def tau_lo(self) -> float:
        return self.mu1_lo - self.mu0_hi

    @property
    def tau_hi(self) -> float:
        return self.mu1_hi - self.mu0_lo

    def arm(self, t):
        return (self.mu1_lo, self.mu1_hi) if t == 1 else (self.mu0_lo, self.mu0_hi)


def _arm_kernels(kernel):
    if isinstance(kernel, KernelSpec):
        return kernel, kernel
    spec0, spec1 = kernel
    return spec0, spec1


def _resolve_e1(data: ObsDataset, e1):
    if e1 is None:
        if data.e1_known is None:
            raise ValidationError("no propensities given and the dataset carries no known e1 column")
        return data.e1_known
    e1 = np.asarray(e1, dtype=float)
    if e1.shape != (data.n,):
        raise ValidationError("e1 must have one propensity per observation")
    return e1


def _resolve_subset(data, subset):
    if subset is None:
        return np.arange(data.d)
    S = np.asarray(list(subset), dtype=int)
    if S.size == 0:
        raise ValidationError("covariate subset must be nonempty")
    if np.any(S < 0) or np.any(S >= data.d) or len(np.unique(S)) != len(S):
        raise ValidationError(f"invalid covariate subset {list(S)} for d={data.d}")
    return S


def _coords(x):
    return [float(v) for v in x]


class _Arm:
    """One arm's observations pre-sorted by outcome, ready for repeated queries."""

    def __init__(self, data, t, spec, e1, S):
        mask = data.T == t
        order = np.argsort(data.Y[mask], kind="stable")
        self.t = t
        self.spec = spec
        self.Xk = data.X[mask][:, S][order]
        self.y = data.Y[mask][order]
        e_t = e1[mask][order] if t == 1 else 1.0 - e1[mask][order]
        self.e_t = e_t
        self.norm = boundary_normalizer(spec, self.Xk) if spec.domain is not None else None
        self._brackets = {}

    def brackets(self, gamma):
        if gamma not in self._brackets:
            self._brackets[gamma] = bracket_arrays(self.e_t, gamma)
        return self._brackets[gamma]

    def _weights(self, x):
        K = kernel_weights(self.spec, self.Xk, x, normalizer=self.norm)
        keep = K > 0
        if not np.any(keep):
            raise EmptySampleError(f"no arm-{self.t} observation has positive kernel weight at x={_coords(x)}",
                                   arm=self.t, point=x)
        return K, keep

    def problem(self, x, gamma):
        K, keep = self._weights(x)
        alpha, beta = self.brackets(gamma)
        return ArmProblem(self.y[keep], alpha[keep] * K[keep], beta[keep] * K[keep])

    def bounds(self, x, gammas):
        K, keep = self._weights(x)
        yk, Kk = self.y[keep], K[keep]
        out = np.empty((len(gammas), 2))
        for g, gamma in enumerate(gammas):
            alpha, beta = self.brackets(gamma)
            try:
                prob = ArmProblem(yk, alpha[keep] * Kk, beta[keep] * Kk)
                out[g] = mu_lower(prob), mu_upper(prob)
            except EmptySampleError as exc:
                raise EmptySampleError(f"arm {self.t} at x={_coords(x)}: {exc}", arm=self.t, point=x) from None
        return out


def _gammas(gamma):
    gs = np.atleast_1d(np.asarray([g.gamma if isinstance(g, MsmParams) else g for g in np.atleast_1d(gamma)],
                                  dtype=float))
    if gs.size == 0 or not np.all(gs >= 1):
        raise ValidationError("sensitivity levels must all be >= 1")
    return gs


def arm_problem(data: ObsDataset, x, t, gamma, kernel, e1=None, subset=None) -> ArmProblem:
    """The sorted fractional problem for arm ``t`` at point ``x``."""
    S = _resolve_subset(data, subset)
    spec = _arm_kernels(kernel)[t]
    arm = _Arm(data, t, spec, _resolve_e1(data, e1), S)
    return arm.problem(_point(x, len(S)), float(_gammas(gamma)[0]))


def _point(x, k):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != k:
        raise ValidationError(f"evaluation point has {x.size} coordinates, expected {k}")
    return x


def cate_interval(data: ObsDataset, x, gamma, kernel, e1=None, subset=None) -> CateInterval:
    """Sharp CATE interval estimate at ``x``.

    Parameters
    ----------
    data : ObsDataset
    x : array-like
        Evaluation point in the coordinates used by the kernel (all
        covariates, or the ``subset`` columns).
    gamma : float or MsmParams
    kernel : KernelSpec or (KernelSpec, KernelSpec)
        One spec for both arms, or a ``(control, treated)`` pair.
    e1 : array-like, optional
        Nominal P(T=1 | X_i) for every observation; defaults to
        ``data.e1_known``. Brackets always use the full-covariate propensity.
    subset : sequence of int, optional
        Covariate columns entering the kernel.
    """
    S = _resolve_subset(data, subset)
    e1 = _resolve_e1(data, e1)
    x = _point(x, len(S))
    g = _gammas(gamma)[:1]
    specs = _arm_kernels(kernel)
    b0 = _Arm(data, 0, specs[0], e1, S).bounds(x, g)[0]
    b1 = _Arm(data, 1, specs[1], e1, S).bounds(x, g)[0]
    return CateInterval(b0[0], b0[1], b1[0], b1[1])


def pcate_interval(data: ObsDataset, xS, S, gamma, kernel, e1=None) -> CateInterval:
    """Interval for the effect conditional on covariates ``S`` only.

    The kernel sees columns ``S``; the weight brackets still use the
    propensity computed from all covariates.
    """
    if S is None or len(list(S)) == 0:
        raise ValidationError("covariate subset must be nonempty")
    return cate_interval(data, xS, gamma, kernel, e1=e1, subset=S)


def interval_curve(data: ObsDataset, grid, gammas, kernel, e1=None, subset=None,
                   n_jobs: int = 1) -> IntervalCurve:
    """Evaluate the interval estimator over ``grid`` for every ``gamma``.

    Points are independent; ``n_jobs > 1`` evaluates them on a thread pool
    without changing the output. A point that fails is recorded in
    ``curve.errors`` (keyed by grid index) and left as NaN.
    """
    S = _resolve_subset(data, subset)
    e1 = _resolve_e1(data, e1)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None] if len(S) == 1 else grid[None, :]
    if grid.shape[0] == 0:
        raise ValidationError("evaluation grid is empty")
    if grid.shape[1] != len(S):
        raise ValidationError(f"grid has {grid.shape[1]} columns, expected {len(S)}")
    gs = np.sort(_gammas(gammas))
    specs = _arm_kernels(kernel)
    arms = [_Arm(data, t, specs[t], e1, S) for t in (0, 1)]
    for arm in arms:
        for g in gs:
            arm.brackets(float(g))

    def run(p):
        try:
            return p, arms[0].bounds(grid[p], gs), arms[1].bounds(grid[p], gs), None
        except EmptySampleError as exc:
            return p, None, None, str(exc)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, range(len(grid))))
    else:
        results = [run(p) for p in range(len(grid))]

    vals = np.full((len(grid), len(gs), 4), np.nan)
    errors = {}
    for p, b0, b1, err in results:
        if err is not None:
            errors[p] = err
            continue
        vals[p, :, 0], vals[p, :, 1] = b0[:, 0], b0[:, 1]
        vals[p, :, 2], vals[p, :, 3] = b1[:, 0], b1[:, 1]
    return IntervalCurve(grid, gs, vals[..., 0], vals[..., 1], vals[..., 2], vals[..., 3], errors=errors)


def ipw_kernel_regression(data: ObsDataset, x, t, kernel, e1=None, subset=None) -> float:
    """Kernel regression of Y on X in arm ``t`` weighted by ``1 / e_t(X_i)``."""
    S = _resolve_subset(data, subset)
    e1 = _resolve_e1(data, e1)
    spec = _arm_kernels(kernel)[t]
    x = _point(x, len(S))
    K = kernel_weights(spec, data.X[:, S], x)
    e_t = e1 if t == 1 else 1.0 - e1
    return weighted_mu(data.T == t, K, 1.0 / e_t, data.Y)
