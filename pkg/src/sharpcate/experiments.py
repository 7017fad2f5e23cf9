"""Simulation studies: bound sharpness, policy risk and regret on the synthetic generators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import interval_curve
from .kernels import KernelSpec, loocv_bandwidth
from .oracle import population_curve
from .policy import (CONTROL, TREAT, PolicyTable, interpolated_intervals, interval_policy, minimax_policy,
                     policy_risk_mc, worst_case_regret)
from .simulate import DgpSpec, generate, population_problem

DOMAIN_1D = np.array([[-2.0, 2.0]])
FIG1_GRID = np.linspace(-2.0, 2.0, 101)
SHARPNESS_GRID = np.linspace(-1.8, 1.8, 21)
# multipliers of the covariate range for LOOCV
WIDE_BANDWIDTHS = np.geomspace(0.01, 0.5, 20)


def arm_kernels(data, family="gaussian", domain=DOMAIN_1D, multipliers=None, max_eval=2000):
    """LOOCV bandwidth per arm; returns the ``(control, treated)`` kernel pair."""
    span = np.ptp(data.X, axis=0)
    cands = None if multipliers is None else np.asarray(multipliers)[:, None] * span[None, :]
    return tuple(KernelSpec(family, loocv_bandwidth(data, t, cands, family, domain, max_eval=max_eval), domain)
                 for t in (0, 1))


def estimated_curve(data, gammas, grid=FIG1_GRID, family="gaussian", domain=DOMAIN_1D, multipliers=None,
                    max_eval=2000, e1=None):
    kernels = arm_kernels(data, family, domain, multipliers, max_eval)
    return interval_curve(data, grid, gammas, kernels, e1=e1), kernels


def sharpness_gaps(ns=(500, 2000, 8000, 32000), seeds=range(10), log_gamma_star=1.0, gamma=np.e,
                   grid=SHARPNESS_GRID, multipliers=WIDE_BANDWIDTHS, max_eval=2000):
    """Median absolute gap between estimated and population bounds.

    Returns an array of shape ``(len(ns), len(seeds))``; each entry is the
    median over grid points and over the two endpoints of the CATE interval.
    """
    prob = population_problem("sin1d", log_gamma_star, gamma)
    pop_lo, pop_hi = population_curve(prob, grid)
    gaps = np.empty((len(ns), len(seeds)))
    for a, n in enumerate(ns):
        for b, seed in enumerate(seeds):
            data = generate(DgpSpec("sin1d", log_gamma_star, n, 1000 * a + seed))
            curve, _ = estimated_curve(data, [gamma], grid, multipliers=multipliers, max_eval=max_eval)
            err = np.concatenate([np.abs(curve.tau_lo[:, 0] - pop_lo), np.abs(curve.tau_hi[:, 0] - pop_hi)])
            gaps[a, b] = np.median(err)
    return gaps


def confounded_policy(curve) -> PolicyTable:
    """Treat where the unadjusted (``gamma = 1``) effect estimate is negative."""
    tau, _ = curve.at_gamma(1.0)
    treat = (tau < 0).astype(int)
    return PolicyTable(curve.grid, 1.0, np.where(treat == 1, TREAT, CONTROL), treat, tau, tau)


@dataclass
class RiskCell:
    values: list = field(default_factory=list)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def half_width(self):
        v = np.asarray(self.values)
        return float(1.96 * v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0


def policy_risk_table(log_gamma_stars=(0.5, 1.0, 1.5), log_gammas=(0.5, 1.0, 1.5), n=1000, reps=20,
                      M=100_000, grid=FIG1_GRID, default_rule="never", seed0=0):
    """Risk of plug-in minimax policies, the confounded thresholding policy and the oracle policy.

    Returns ``{log_gamma_star: {label: RiskCell}}`` with labels
    ``"gamma=<log gamma>"``, ``"confounded"`` and ``"oracle"``. Within a
    replication every policy is scored on the same Monte Carlo draws.
    """
    from .simulate import true_cate

    table = {}
    for lgs in log_gamma_stars:
        cells = {f"gamma={lg:g}": RiskCell() for lg in log_gammas}
        cells["confounded"] = RiskCell()
        cells["oracle"] = RiskCell()
        for r in range(reps):
            data = generate(DgpSpec("sin1d", lgs, n, seed0 + r))
            gammas = [1.0] + [float(np.exp(lg)) for lg in log_gammas]
            curve, _ = estimated_curve(data, gammas, grid)
            eval_seed = 10_000 + seed0 + r
            for lg in log_gammas:
                pol = minimax_policy(curve, float(np.exp(lg)), default_rule)
                cells[f"gamma={lg:g}"].values.append(policy_risk_mc(pol, "sin1d", M, eval_seed, lgs)[0])
            cells["confounded"].values.append(policy_risk_mc(confounded_policy(curve), "sin1d", M, eval_seed, lgs)[0])
            oracle = lambda X: (true_cate("sin1d", X) < 0).astype(int)
            cells["oracle"].values.append(policy_risk_mc(oracle, "sin1d", M, eval_seed, lgs)[0])
        table[lgs] = cells
    return table


def population_regret(log_gamma_star=1.0, gamma=np.e, grid=None, default_rule="never", M=100_000, seed=0):
    """Worst-case regret of the population minimax policy, plus the interval function used."""
    grid = np.linspace(-2.0, 2.0, 401) if grid is None else grid
    prob = population_problem("sin1d", log_gamma_star, gamma)
    lo, hi = population_curve(prob, grid)
    intervals = interpolated_intervals(grid, lo, hi)
    star = interval_policy(intervals, default_rule)
    return worst_case_regret(star, default_rule, intervals, M=M, seed=seed), intervals


def plugin_regrets(ns=(500, 2000, 8000), seeds=range(10), log_gamma_star=1.0, gamma=np.e, intervals=None,
                   default_rule="never", M=100_000, grid=FIG1_GRID):
    """Worst-case regret of plug-in policies estimated at each sample size; shape ``(len(ns), len(seeds))``."""
    if intervals is None:
        intervals = population_regret(log_gamma_star, gamma, default_rule=default_rule, M=M)[1]
    out = np.empty((len(ns), len(seeds)))
    for a, n in enumerate(ns):
        for b, seed in enumerate(seeds):
            data = generate(DgpSpec("sin1d", log_gamma_star, n, 5000 + 1000 * a + seed))
            curve, _ = estimated_curve(data, [gamma], grid, multipliers=WIDE_BANDWIDTHS)
            pol = minimax_policy(curve, gamma, default_rule)
            out[a, b] = worst_case_regret(pol, default_rule, intervals, M=M, seed=0)
    return out
