"""Observational datasets, interval curves and their CSV interchange."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import ParseError, SchemaError, ValidationError

_XCOL = re.compile(r"^x(\d+)$")

INTERVAL_FIELDS = ("mu0_lo", "mu0_hi", "mu1_lo", "mu1_hi", "tau_lo", "tau_hi")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SimTruth:
    """Simulation ground truth: potential outcomes and the hidden confounder."""

    Y0: np.ndarray
    Y1: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        for name in ("Y0", "Y1", "U"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (self.Y0.shape == self.Y1.shape == self.U.shape) or self.Y0.ndim != 1:
            raise ValidationError("Y0, Y1 and U must be 1-d arrays of equal length")


@dataclass(frozen=True)
class ObsDataset:
    """Immutable table of (covariates, binary treatment, outcome).

    ``e1_known`` holds P(T=1 | X_i) when it is known (simulations), and
    ``truth`` the potential outcomes when they are known.
    """

    X: np.ndarray
    T: np.ndarray
    Y: np.ndarray
    e1_known: Optional[np.ndarray] = None
    truth: Optional[SimTruth] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValidationError("X must be a 2-d array")
        object.__setattr__(self, "X", _frozen(X))
        T = np.asarray(self.T)
        Y = _frozen(self.Y)
        if T.ndim != 1 or Y.ndim != 1 or len(T) != len(X) or len(Y) != len(X):
            raise ValidationError("X, T and Y must have the same number of rows")
        if not np.all((T == 0) | (T == 1)):
            bad = int(np.flatnonzero((T != 0) & (T != 1))[0])
            raise ValidationError(f"treatment must be 0 or 1 (row {bad + 1})")
        object.__setattr__(self, "T", _frozen(T, dtype=np.int8))
        object.__setattr__(self, "Y", Y)
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
            raise ValidationError("covariates and outcomes must be finite")
        if not np.any(self.T == 0):
            raise ValidationError("empty control arm")
        if not np.any(self.T == 1):
            raise ValidationError("empty treated arm")
        if self.e1_known is not None:
            e1 = _frozen(self.e1_known)
            if e1.shape != Y.shape:
                raise ValidationError("e1_known must have one entry per row")
            if not np.all((e1 > 0) & (e1 < 1)):
                raise ValidationError("known propensities must lie strictly inside (0, 1)")
            object.__setattr__(self, "e1_known", e1)
        if self.truth is not None:
            tr = self.truth
            if tr.Y0.shape != Y.shape:
                raise ValidationError("truth arrays must have one entry per row")
            observed = np.where(self.T == 1, tr.Y1, tr.Y0)
            if not np.array_equal(observed, Y):
                raise ValidationError("observed outcome must equal the potential outcome of the received arm")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def arm(self, t: int):
        """Return ``(X, Y, mask)`` for treatment arm ``t``."""
        mask = self.T == t
        return self.X[mask], self.Y[mask], mask

    def take(self, idx) -> "ObsDataset":
        idx = np.asarray(idx)
        truth = None
        if self.truth is not None:
            truth = SimTruth(self.truth.Y0[idx], self.truth.Y1[idx], self.truth.U[idx])
        e1 = None if self.e1_known is None else self.e1_known[idx]
        return ObsDataset(self.X[idx], self.T[idx], self.Y[idx], e1, truth)


@dataclass(frozen=True)
class Schema:
    """Column names. ``x=None`` means auto-detect ``x0, x1, ...``."""

    x: Optional[Sequence[str]] = None
    t: str = "t"
    y: str = "y"
    e1: str = "e1"
    y0: str = "y0"
    y1: str = "y1"
    u: str = "u"


def _data_lines(fh):
    for line in fh:
        if line.lstrip().startswith("#") or not line.strip():
            continue
        yield line


def _read_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(_data_lines(fh))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: no header row") from None
        rows = [row for row in reader]
    return header, rows


def _detect_x(header):
    idx = sorted(int(m.group(1)) for h in header if (m := _XCOL.match(h)))
    if not idx:
        raise SchemaError("x0")
    for k, j in enumerate(idx):
        if k != j:
            raise SchemaError(f"x{k}")
    return [f"x{j}" for j in idx]


def _parse_float(text, row, column):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(row, f"column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise ParseError(row, f"column {column!r}: non-finite value {text!r}")
    return v


def load_csv(path, schema: Optional[Schema] = None) -> ObsDataset:
    """Read an observational dataset from CSV.

    Required columns are the covariates (``x0..x{d-1}`` unless the schema
    names them), ``t`` and ``y``. Optional columns ``e1`` (known propensity)
    and ``y0, y1, u`` (simulation truth) are picked up when present. Lines
    starting with ``#`` are ignored. Row order is preserved.
    """
    schema = schema or Schema()
    header, rows = _read_table(path)
    xcols = list(schema.x) if schema.x is not None else _detect_x(header)
    pos = {h: k for k, h in enumerate(header)}
    for col in [*xcols, schema.t, schema.y]:
        if col not in pos:
            raise SchemaError(col)
    has_e1 = schema.e1 in pos
    has_truth = all(c in pos for c in (schema.y0, schema.y1, schema.u))

    n = len(rows)
    X = np.empty((n, len(xcols)))
    T = np.empty(n, dtype=np.int8)
    Y = np.empty(n)
    e1 = np.empty(n) if has_e1 else None
    truth = np.empty((n, 3)) if has_truth else None
    for i, row in enumerate(rows):
        r = i + 1
        if len(row) != len(header):
            raise ParseError(r, f"expected {len(header)} fields, found {len(row)}")
        for j, c in enumerate(xcols):
            X[i, j] = _parse_float(row[pos[c]], r, c)
        t_text = row[pos[schema.t]].strip()
        tv = _parse_float(t_text, r, schema.t)
        if tv not in (0.0, 1.0):
            raise ParseError(r, f"column {schema.t!r}: treatment must be 0 or 1, got {t_text!r}")
        T[i] = int(tv)
        Y[i] = _parse_float(row[pos[schema.y]], r, schema.y)
        if has_e1:
            e1[i] = _parse_float(row[pos[schema.e1]], r, schema.e1)
            if not 0.0 < e1[i] < 1.0:
                raise ParseError(r, f"column {schema.e1!r}: propensity must lie in (0, 1)")
        if has_truth:
            for k, c in enumerate((schema.y0, schema.y1, schema.u)):
                truth[i, k] = _parse_float(row[pos[c]], r, c)
    sim = SimTruth(truth[:, 0], truth[:, 1], truth[:, 2]) if has_truth else None
    return ObsDataset(X, T, Y, e1, sim)


def _fmt(v) -> str:
    v = float(v)
    return repr(v) if math.isfinite(v) else ""


def write_dataset_csv(data: ObsDataset, path) -> None:
    """Write a dataset in the format read by :func:`load_csv`."""
    cols = [f"x{j}" for j in range(data.d)] + ["t", "y"]
    if data.e1_known is not None:
        cols.append("e1")
    if data.truth is not None:
        cols += ["y0", "y1", "u"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(data.n):
            row = [_fmt(v) for v in data.X[i]] + [str(int(data.T[i])), _fmt(data.Y[i])]
            if data.e1_known is not None:
                row.append(_fmt(data.e1_known[i]))
            if data.truth is not None:
                row += [_fmt(data.truth.Y0[i]), _fmt(data.truth.Y1[i]), _fmt(data.truth.U[i])]
            w.writerow(row)


@dataclass
class IntervalCurve:
    """Bounds on a grid of points for several sensitivity levels.

    Every value array has shape ``(n_points, n_gammas)``. Points at which the
    estimator failed hold NaN and their error message is kept in ``errors``.
    """

    grid: np.ndarray
    gammas: np.ndarray
    mu0_lo: np.ndarray
    mu0_hi: np.ndarray
    mu1_lo: np.ndarray
    mu1_hi: np.ndarray
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.atleast_2d(np.asarray(self.grid, dtype=float))
        self.gammas = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        for name in INTERVAL_FIELDS[:4]:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(len(self.grid), len(self.gammas)))

    @property
    def tau_lo(self) -> np.ndarray:
        return self.mu1_lo - self.mu0_hi

    @property
    def tau_hi(self) -> np.ndarray:
        return self.mu1_hi - self.mu0_lo

    def __len__(self):
        return len(self.grid)

    def gamma_index(self, gamma, rtol=1e-9) -> int:
        hit = np.flatnonzero(np.isclose(self.gammas, gamma, rtol=rtol, atol=0.0))
        if hit.size == 0:
            raise ValidationError(f"gamma={gamma} is not in the curve (have {list(self.gammas)})")
        return int(hit[0])

    def at_gamma(self, gamma):
        """Return ``(tau_lo, tau_hi)`` arrays over the grid for one gamma."""
        k = self.gamma_index(gamma)
        return self.tau_lo[:, k], self.tau_hi[:, k]


def write_interval_csv(curve: IntervalCurve, path) -> None:
    """One row per (grid point, gamma), grid-major with gamma ascending.

    Absent points (failed evaluations) keep their row with empty value fields.
    """
    if len(curve) == 0 or len(curve.gammas) == 0:
        raise ValidationError("cannot write an empty interval curve")
    k = curve.grid.shape[1]
    order = np.argsort(curve.gammas, kind="stable")
    values = {name: getattr(curve, name) for name in INTERVAL_FIELDS}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(k)] + ["gamma", *INTERVAL_FIELDS])
        for p in range(len(curve)):
            for g in order:
                w.writerow(
                    [_fmt(v) for v in curve.grid[p]]
                    + [_fmt(curve.gammas[g])]
                    + [_fmt(values[name][p, g]) for name in INTERVAL_FIELDS]
                )


def read_interval_csv(path) -> IntervalCurve:
    header, rows = _read_table(path)
    for col in ("gamma", *INTERVAL_FIELDS):
        if col not in header:
            raise SchemaError(col)
    xcols = _detect_x(header)
    pos = {h: k for k, h in enumerate(header)}
    points, gammas = [], []
    cells = {}
    for i, row in enumerate(rows):
        r = i + 1
        pt = tuple(_parse_float(row[pos[c]], r, c) for c in xcols)
        g = _parse_float(row[pos["gamma"]], r, "gamma")
        if pt not in cells:
            points.append(pt)
            cells[pt] = {}
        if g not in gammas:
            gammas.append(g)
        cells[pt][g] = [float(row[pos[c]]) if row[pos[c]].strip() else np.nan for c in INTERVAL_FIELDS[:4]]
    gammas = sorted(gammas)
    arr = np.full((len(points), len(gammas), 4), np.nan)
    for p, pt in enumerate(points):
        for g, gv in enumerate(gammas):
            if gv in cells[pt]:
                arr[p, g] = cells[pt][gv]
    return IntervalCurve(np.array(points), np.array(gammas), *(arr[..., j] for j in range(4)))
