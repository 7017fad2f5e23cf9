"""Minimax-regret treatment rules from CATE intervals, and their evaluation.

Outcomes are losses: lower is better, so treating is unambiguously right
where the whole interval is at or below zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .data import IntervalCurve, _detect_x, _fmt, _parse_float, _read_table
from .exceptions import SchemaError, ValidationError

TREAT, CONTROL, DEFAULT = "treat", "control", "default"


def never_treat(X):
    return np.zeros(len(np.atleast_1d(X)), dtype=int)


def always_treat(X):
    return np.ones(len(np.atleast_1d(X)), dtype=int)


DEFAULT_RULES = {"never": never_treat, "always": always_treat}


def resolve_default(default_rule, X) -> np.ndarray:
    """Evaluate a default rule (``"never"``, ``"always"``, callable or array) at ``X``."""
    n = len(np.atleast_1d(X)) if np.ndim(X) <= 1 else len(X)
    if isinstance(default_rule, str):
        if default_rule not in DEFAULT_RULES:
            raise ValidationError(f"unknown default rule {default_rule!r}")
        out = DEFAULT_RULES[default_rule](np.empty(n))
    elif callable(default_rule):
        out = np.asarray(default_rule(X))
    else:
        out = np.asarray(default_rule)
    out = np.broadcast_to(out, (n,)).astype(int)
    if not np.all((out == 0) | (out == 1)):
        raise ValidationError("default rule must return 0 or 1")
    return out


def minimax_rule(tau_lo, tau_hi, default):
    """Plug-in minimax-regret rule.

    Treat when ``tau_hi <= 0``, withhold when ``tau_lo >= 0`` (and not
    already treated), otherwise defer to ``default``.
    """
    tau_lo, tau_hi = np.asarray(tau_lo, dtype=float), np.asarray(tau_hi, dtype=float)
    default = np.asarray(default, dtype=int)
    treat = tau_hi <= 0
    control = ~treat & (tau_lo >= 0)
    action = np.where(treat, TREAT, np.where(control, CONTROL, DEFAULT))
    resolved = np.where(treat, 1, np.where(control, 0, default)).astype(int)
    return action, resolved


@dataclass
class PolicyTable:
    """Actions on a grid. Calling the table on new points uses the nearest grid point."""

    grid: np.ndarray
    gamma: float
    action: np.ndarray
    resolved: np.ndarray
    tau_lo: np.ndarray
    tau_hi: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim == 1:
            self.grid = self.grid[:, None]
        self.resolved = np.asarray(self.resolved, dtype=int)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.grid.shape[1] == 1 else X[None, :]
        if self.grid.shape[1] == 1:
            g = self.grid[:, 0]
            order = np.argsort(g)
            gs = g[order]
            pos = np.clip(np.searchsorted(gs, X[:, 0]), 1, len(gs) - 1) if len(gs) > 1 else np.zeros(len(X), int)
            if len(gs) > 1:
                left_closer = (X[:, 0] - gs[pos - 1]) <= (gs[pos] - X[:, 0])
                pos = np.where(left_closer, pos - 1, pos)
            return self.resolved[order][pos]
        d2 = ((X[:, None, :] - self.grid[None, :, :]) ** 2).sum(axis=2)
        return self.resolved[np.argmin(d2, axis=1)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            k = self.grid.shape[1]
            w.writerow([f"x{j}" for j in range(k)] + ["gamma", "tau_lo", "tau_hi", "action", "treat"])
            for p in range(len(self.grid)):
                w.writerow([_fmt(v) for v in self.grid[p]]
                           + [_fmt(self.gamma), _fmt(self.tau_lo[p]), _fmt(self.tau_hi[p]),
                              self.action[p], str(int(self.resolved[p]))])


def read_policy_csv(path) -> PolicyTable:
    header, rows = _read_table(path)
    for col in ("gamma", "tau_lo", "tau_hi", "action", "treat"):
        if col not in header:
            raise SchemaError(col)
    xcols = _detect_x(header)
    pos = {h: k for k, h in enumerate(header)}
    grid = np.array([[_parse_float(r[pos[c]], i + 1, c) for c in xcols] for i, r in enumerate(rows)])
    num = lambda c, blank=np.nan: np.array([float(r[pos[c]]) if r[pos[c]].strip() else blank for r in rows])
    gamma = float(rows[0][pos["gamma"]]) if rows else np.nan
    return PolicyTable(grid, gamma, np.array([r[pos["action"]] for r in rows]),
                       num("treat").astype(int), num("tau_lo"), num("tau_hi"))


def minimax_policy(curve: IntervalCurve, gamma, default_rule="never") -> PolicyTable:
    """Apply :func:`minimax_rule` at every grid point of ``curve`` for one ``gamma``.

    Grid points where the curve has no interval (failed evaluation) fall back
    to the default rule.
    """
    tau_lo, tau_hi = curve.at_gamma(gamma)
    default = resolve_default(default_rule, curve.grid if curve.grid.shape[1] > 1 else curve.grid[:, 0])
    action, resolved = minimax_rule(np.nan_to_num(tau_lo, nan=-np.inf), np.nan_to_num(tau_hi, nan=np.inf), default)
    return PolicyTable(curve.grid, float(curve.gammas[curve.gamma_index(gamma)]), action, resolved, tau_lo, tau_hi)


def uniform_sampler(lo=-2.0, hi=2.0, d=1):
    def sample(rng, M):
        X = rng.uniform(lo, hi, size=(M, d))
        return X[:, 0] if d == 1 else X
    return sample


def worst_case_regret(policy: Callable, default_rule, intervals: Callable, sampler: Optional[Callable] = None,
                      M: int = 100_000, seed: int = 0) -> float:
    """Worst-case regret of ``policy`` relative to ``default_rule`` over the identified set.

    The supremum over CATE functions inside ``[tau_lo(x), tau_hi(x)]`` is
    attained pointwise, at ``max(d tau_lo, d tau_hi)`` with
    ``d = policy(x) - default(x)``; the expectation over X is a Monte Carlo
    average of ``M`` draws from ``sampler`` (default ``Unif[-2, 2]``).
    """
    sampler = sampler or uniform_sampler()
    X = sampler(np.random.default_rng(seed), M)
    lo, hi = intervals(X)
    diff = np.asarray(policy(X), dtype=float) - resolve_default(default_rule, X)
    return float(np.mean(np.maximum(diff * lo, diff * hi)))


def interpolated_intervals(grid, tau_lo, tau_hi):
    """Linear interpolation of tabulated 1-d intervals, for :func:`worst_case_regret`."""
    grid = np.asarray(grid, dtype=float).ravel()
    order = np.argsort(grid)
    g, lo, hi = grid[order], np.asarray(tau_lo)[order], np.asarray(tau_hi)[order]

    def intervals(X):
        x = np.asarray(X, dtype=float).reshape(len(X), -1)[:, 0]
        return np.interp(x, g, lo), np.interp(x, g, hi)
    return intervals


def interval_policy(intervals: Callable, default_rule="never"):
    """Policy that applies :func:`minimax_rule` to ``intervals(X)`` pointwise."""
    def policy(X):
        lo, hi = intervals(X)
        return minimax_rule(lo, hi, resolve_default(default_rule, X))[1]
    return policy


def policy_risk_mc(policy: Callable, dgp, M: int = 100_000, seed: int = 0, log_gamma_star: float = 1.0):
    """Monte Carlo risk ``E[pi(X) Y(1) + (1 - pi(X)) Y(0)]`` on fresh simulator draws.

    ``dgp`` is a generator name or a :class:`~sharpcate.simulate.DgpSpec`
    (whose ``n`` and ``seed`` are replaced by ``M`` and ``seed``). Returns
    ``(value, half_width)`` of a normal-approximation 95% interval. A policy
    over a covariate subset should be wrapped to select its columns.
    """
    from .simulate import DgpSpec, generate

    if M < 1000:
        raise ValidationError("policy risk needs at least 1000 Monte Carlo draws")
    if isinstance(dgp, DgpSpec):
        spec = DgpSpec(dgp.name, dgp.log_gamma_star, M, seed)
    else:
        spec = DgpSpec(dgp, log_gamma_star, M, seed)
    sim = generate(spec)
    X = sim.X[:, 0] if sim.d == 1 else sim.X
    pi = np.asarray(policy(X), dtype=float)
    loss = pi * sim.truth.Y1 + (1 - pi) * sim.truth.Y0
    return float(loss.mean()), float(1.96 * loss.std(ddof=1) / np.sqrt(M))
