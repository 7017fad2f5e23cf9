"""Product kernels with optional boundary renormalization, and LOOCV bandwidths.

Kernels are unnormalized: ``K(u) = exp(-u**2 / 2)`` (gaussian) and
``K(u) = 1{|u| <= 1/2}`` (uniform). Every estimator in this package is a
ratio of kernel sums, so normalizing constants cancel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erf, erfc

from .exceptions import ValidationError

FAMILIES = ("gaussian", "uniform")
_SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, per-dimension bandwidths and optional domain box.

    ``h`` may be a scalar, which broadcasts to every dimension when the
    kernel is evaluated. ``domain`` is a ``(d, 2)`` array of ``[lo, hi]``
    rows; when set, each observation's kernel is divided by its mass over the
    box (see :func:`boundary_normalizer`).
    """

    family: str = "gaussian"
    h: np.ndarray = 1.0
    domain: Optional[np.ndarray] = None

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if h.ndim != 1 or not np.all(np.isfinite(h)) or not np.all(h > 0):
            raise ValidationError("bandwidths must be positive and finite")
        object.__setattr__(self, "h", h)
        if self.domain is not None:
            dom = np.atleast_2d(np.asarray(self.domain, dtype=float))
            if dom.shape[1] != 2 or not np.all(dom[:, 0] < dom[:, 1]):
                raise ValidationError("domain rows must be [lo, hi] with lo < hi")
            object.__setattr__(self, "domain", dom)

    def bandwidths(self, d: int) -> np.ndarray:
        if self.h.size == 1:
            return np.full(d, self.h[0])
        if self.h.size != d:
            raise ValidationError(f"kernel has {self.h.size} bandwidths but data has {d} dimensions")
        return self.h

    def box(self, d: int) -> Optional[np.ndarray]:
        if self.domain is None:
            return None
        if len(self.domain) == 1 and d > 1:
            return np.repeat(self.domain, d, axis=0)
        if len(self.domain) != d:
            raise ValidationError(f"domain has {len(self.domain)} rows but data has {d} dimensions")
        return self.domain

    def with_h(self, h) -> "KernelSpec":
        return KernelSpec(self.family, h, self.domain)


def _profile(family, u):
    if family == "gaussian":
        return np.exp(-0.5 * u * u)
    return (np.abs(u) <= 0.5).astype(float)


def _as_rows(A, d=None):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None] if d == 1 or d is None else A[None, :]
    return A


def boundary_normalizer(spec: KernelSpec, Xi) -> np.ndarray:
    """Kernel mass of each observation over the domain box.

    Returns ``prod_j integral_{lo_j}^{hi_j} K((Xi_j - x') / h_j) dx'`` for every
    row of ``Xi``, in closed form. The integral is taken in ``x'`` units, so an
    interior point's uniform-kernel mass is ``h`` and its gaussian mass is
    ``h * sqrt(2 pi)``; the factor is common to all observations and cancels.
    """
    if spec.domain is None:
        raise ValidationError("boundary_normalizer needs a kernel domain")
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    d = Xi.shape[1]
    h = spec.bandwidths(d)
    box = spec.box(d)
    lo, hi = box[:, 0], box[:, 1]
    if spec.family == "uniform":
        mass = np.minimum(hi, Xi + h / 2) - np.maximum(lo, Xi - h / 2)
        mass = np.clip(mass, 0.0, None)
    else:
        a = (lo - Xi) / (h * np.sqrt(2.0))
        b = (hi - Xi) / (h * np.sqrt(2.0))
        # erfc differences keep precision when both limits sit in one tail
        upper_tail = erfc(a) - erfc(b)
        lower_tail = erfc(-b) - erfc(-a)
        central = erf(b) - erf(a)
        diff = np.where(a > 0, upper_tail, np.where(b < 0, lower_tail, central))
        mass = h * _SQRT_HALF_PI * diff
    out = np.prod(mass, axis=1)
    if np.any(out <= 0):
        raise ValidationError("observation lies outside the kernel domain (zero kernel mass)")
    return out


def kernel_weights(spec: KernelSpec, Xi, x, normalizer=None) -> np.ndarray:
    """Vectorized product-kernel weights ``K((Xi - x) / h)`` for all rows of ``Xi``.

    ``normalizer`` may carry precomputed :func:`boundary_normalizer` values.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Xi = np.asarray(Xi, dtype=float)
    if Xi.ndim == 1:
        Xi = Xi[:, None] if x.size == 1 else Xi[None, :]
    if Xi.shape[1] != x.size:
        raise ValidationError(f"dimension mismatch: observations have {Xi.shape[1]} columns, point has {x.size}")
    h = spec.bandwidths(x.size)
    U = (Xi - x) / h
    if spec.family == "gaussian":
        w = np.exp(-0.5 * np.einsum("ij,ij->i", U, U))
    else:
        w = np.all(np.abs(U) <= 0.5, axis=1).astype(float)
    if spec.domain is not None:
        if normalizer is None:
            normalizer = boundary_normalizer(spec, Xi)
        w = w / normalizer
    return w


def kernel_weight(spec: KernelSpec, xi, x) -> float:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if xi.shape != x.shape:
        raise ValidationError(f"dimension mismatch: {xi.size} vs {x.size}")
    return float(kernel_weights(spec, xi[None, :], x)[0])


def default_bandwidth_grid(X, num=20, lo=0.05, hi=1.0) -> np.ndarray:
    """``num`` log-spaced bandwidth vectors from ``lo`` to ``hi`` times each covariate's range."""
    X = _as_rows(X, 1 if np.ndim(X) == 1 else None)
    span = X.max(axis=0) - X.min(axis=0)
    span = np.where(span > 0, span, 1.0)
    return np.geomspace(lo, hi, num)[:, None] * span[None, :]


def _loo_scores(X, Y, H, family, domain, eval_idx, chunk):
    m = len(Y)
    # candidates proportional to one base vector share scaled distances
    base = H[0]
    scale = H[:, 0] / base[0]
    shared = np.allclose(H, scale[:, None] * base[None, :], rtol=1e-12, atol=0.0)
    norms = [boundary_normalizer(KernelSpec(family, h, domain), X) if domain is not None else None for h in H]
    sse = np.zeros(len(H))
    for start in range(0, len(eval_idx), chunk):
        rows = eval_idx[start:start + chunk]
        diag = (np.arange(len(rows)), rows)
        if shared:
            U = (X[rows, None, :] - X[None, :, :]) / base
            R = np.einsum("ijk,ijk->ij", U, U) if family == "gaussian" else np.max(np.abs(U), axis=2)
        for c, h in enumerate(H):
            if not np.isfinite(sse[c]):
                continue
            if shared:
                K = np.exp(R * (-0.5 / scale[c] ** 2)) if family == "gaussian" else (R <= 0.5 * scale[c]) * 1.0
            else:
                U = (X[rows, None, :] - X[None, :, :]) / h
                if family == "gaussian":
                    K = np.exp(-0.5 * np.einsum("ijk,ijk->ij", U, U))
                else:
                    K = np.all(np.abs(U) <= 0.5, axis=2).astype(float)
            if norms[c] is not None:
                K /= norms[c]
            K[diag] = 0.0
            mass = K.sum(axis=1)
            if np.any(mass <= 0):
                sse[c] = np.inf
                continue
            pred = (K @ Y) / mass
            sse[c] += float(np.sum((Y[rows] - pred) ** 2))
    return sse / len(eval_idx)


def loocv_bandwidth(data, arm, candidates=None, family="gaussian", domain=None,
                    max_eval=None, chunk=512, return_scores=False):
    """Pick the bandwidth minimizing leave-one-out error of unweighted kernel regression.

    Parameters
    ----------
    data : ObsDataset
    arm : {0, 1}
        Only observations with ``T == arm`` are used.
    candidates : array-like, optional
        Shape ``(k,)`` (scalar bandwidths) or ``(k, d)``. Defaults to
        :func:`default_bandwidth_grid` of the arm's covariates.
    max_eval : int, optional
        Score the leave-one-out error on at most this many held-out points
        (chosen by a permutation-invariant rule); each prediction still uses
        every other observation. ``None`` scores all points.

    Returns
    -------
    h : ndarray of shape (d,)
        Selected bandwidths. Exact ties go to the larger candidate. Candidates
        leaving some held-out point with zero kernel mass score ``inf``.
    """
    Xa, Ya, _ = data.arm(arm)
    m, d = Xa.shape
    if m < 3:
        raise ValidationError(f"arm {arm} has {m} observations; bandwidth selection needs at least 3")
    H = default_bandwidth_grid(Xa) if candidates is None else np.asarray(candidates, dtype=float)
    if H.ndim == 1:
        H = np.repeat(H[:, None], d, axis=1)
    if H.size == 0:
        raise ValidationError("no bandwidth candidates")
    if H.shape[1] != d or not np.all(H > 0):
        raise ValidationError("bandwidth candidates must be positive with one column per covariate")
    eval_idx = np.arange(m)
    if max_eval is not None and max_eval < m:
        order = np.lexsort((Ya, *Xa.T[::-1]))
        eval_idx = np.sort(order[np.linspace(0, m - 1, max_eval).round().astype(int)])
    scores = _loo_scores(Xa, Ya, H, family, domain, eval_idx, chunk)
    if not np.any(np.isfinite(scores)):
        raise ValidationError(f"every bandwidth candidate leaves an arm-{arm} point with zero kernel mass")
    best = scores == np.min(scores)
    pick = int(np.flatnonzero(best)[np.argmax(H[best].sum(axis=1))])
    if return_scores:
        return H[pick], scores
    return H[pick]
