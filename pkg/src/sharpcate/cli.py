"""Command-line front end.

Subcommands: ``simulate``, ``bounds``, ``policy``, ``evaluate`` and
``calibrate-gamma``. Every run that writes ``--out`` also writes
``<out>.meta.json`` holding the fully resolved configuration. Exit codes:
0 on success, 1 on invalid input or usage, 2 on numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .bounds import arm_problem, interval_curve
from .data import IntervalCurve, _detect_x, _parse_float, _read_table, load_csv, read_interval_csv, \
    write_dataset_csv, write_interval_csv
from .exceptions import NumericalError, SchemaError, ValidationError
from .kernels import FAMILIES, KernelSpec, loocv_bandwidth
from .msm import calibrate_gamma
from .oracle import vertex_enumeration_bound
from .policy import PolicyTable, minimax_policy, policy_risk_mc, read_policy_csv
from .propensity import fit_logistic, predict_e1
from .simulate import DgpSpec, generate

AUTO_GRID_POINTS = 100


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    """Parsed flags plus everything resolved while running (seeds, bandwidths, paths)."""

    subcommand: str
    flags: dict
    seed: Optional[int] = None
    outputs: list = field(default_factory=list)
    resolved: dict = field(default_factory=dict)

    def write(self, out):
        payload = {"version": __version__, "subcommand": self.subcommand, "flags": self.flags,
                   "seed": self.seed, "outputs": self.outputs, "resolved": self.resolved}
        with open(f"{out}.meta.json", "w") as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _floats(text, what):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals or not np.all(np.isfinite(vals)):
        raise ValidationError(f"{what}: expected finite numbers, got {text!r}")
    return vals


def _ints(text, what):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"{what}: expected comma-separated integers, got {text!r}") from None


def _domain(text):
    if text is None:
        return None
    rows = []
    for part in text.split(","):
        bits = part.split(":")
        if len(bits) != 2:
            raise ValidationError(f"--domain: expected lo:hi[,lo:hi...], got {text!r}")
        rows.append(_floats(",".join(bits), "--domain"))
    return np.array(rows)


def _gamma_levels(args, single=False):
    if args.gamma is not None:
        gs = _floats(args.gamma, "--gamma")
    else:
        gs = list(np.exp(_floats(args.log_gamma, "--log-gamma")))
    if any(g < 1 for g in gs):
        raise ValidationError("sensitivity levels must be >= 1")
    if single and len(gs) != 1:
        raise ValidationError("exactly one sensitivity level is required")
    return gs


def _grid_points(path):
    header, rows = _read_table(path)
    cols = _detect_x(header)
    pos = {h: k for k, h in enumerate(header)}
    if not rows:
        raise ValidationError(f"grid file {path} has no rows")
    return np.array([[_parse_float(r[pos[c]], i + 1, c) for c in cols] for i, r in enumerate(rows)])


def auto_grid(Xs, num=AUTO_GRID_POINTS):
    """``num`` equispaced points over the empirical range (a square lattice of ``num`` points in 2-d)."""
    d = Xs.shape[1]
    lo, hi = Xs.min(axis=0), Xs.max(axis=0)
    if d == 1:
        return np.linspace(lo[0], hi[0], num)[:, None]
    if d == 2:
        side = int(round(np.sqrt(num)))
        g0, g1 = np.meshgrid(np.linspace(lo[0], hi[0], side), np.linspace(lo[1], hi[1], side), indexing="ij")
        return np.column_stack([g0.ravel(), g1.ravel()])
    raise ValidationError("--grid auto supports one or two kernel covariates; pass a grid CSV instead")


def _oracle_curve(data, grid, gammas, kernels, e1, subset):
    """Bounds by exhaustive vertex enumeration; only for small arms."""
    vals = np.full((len(grid), len(gammas), 4), np.nan)
    for p, x in enumerate(grid):
        for g, gamma in enumerate(gammas):
            for t in (0, 1):
                prob = arm_problem(data, x, t, gamma, kernels, e1=e1, subset=subset)
                vals[p, g, 2 * t] = vertex_enumeration_bound(prob, "lower")
                vals[p, g, 2 * t + 1] = vertex_enumeration_bound(prob, "upper")
    return IntervalCurve(grid, gammas, *(vals[..., j] for j in range(4)))


def cmd_simulate(args, cfg):
    spec = DgpSpec(args.dgp, args.log_gamma_star, args.n, args.seed)
    data = generate(spec)
    write_dataset_csv(data, args.out)
    cfg.seed = args.seed
    cfg.resolved.update(dgp=spec.name, n=spec.n, log_gamma_star=spec.log_gamma_star, d=data.d,
                        has_e1=data.e1_known is not None)
    return args.out


def cmd_bounds(args, cfg):
    data = load_csv(args.data)
    gammas = _gamma_levels(args)
    subset = list(range(data.d)) if args.subset is None else _ints(args.subset, "--subset")
    if not subset or min(subset) < 0 or max(subset) >= data.d or len(set(subset)) != len(subset):
        raise ValidationError(f"--subset {args.subset!r} is invalid for {data.d} covariates")
    domain = _domain(args.domain)

    if args.propensity == "known":
        if data.e1_known is None:
            raise SchemaError("e1", "--propensity known requires an 'e1' column in the data")
        e1 = data.e1_known
    else:
        model = fit_logistic(data.X, data.T)
        e1 = predict_e1(model, data.X)
        cfg.resolved["propensity_model"] = {"intercept": model.intercept, "coef": model.coef}

    Xs = data.X[:, subset]
    if args.bandwidth == "auto":
        kdata = type(data)(Xs, data.T, data.Y)
        hs = [loocv_bandwidth(kdata, t, None, args.kernel, domain, max_eval=args.loocv_max_eval) for t in (0, 1)]
    else:
        h = np.broadcast_to(np.asarray(_floats(args.bandwidth, "--bandwidth")), (len(subset),))
        hs = [h, h]
    kernels = tuple(KernelSpec(args.kernel, h, domain) for h in hs)

    grid = auto_grid(Xs) if args.grid == "auto" else _grid_points(args.grid)
    if grid.shape[1] != len(subset):
        raise ValidationError(f"grid has {grid.shape[1]} columns, expected {len(subset)}")

    if args.oracle:
        curve = _oracle_curve(data, grid, sorted(gammas), kernels, e1, subset)
    else:
        curve = interval_curve(data, grid, gammas, kernels, e1=e1, subset=subset, n_jobs=args.threads)
    for p in sorted(curve.errors):
        print(f"warning: grid point {p}: {curve.errors[p]}", file=sys.stderr)
    write_interval_csv(curve, args.out)
    cfg.resolved.update(gammas=curve.gammas, subset=subset, bandwidths={"control": hs[0], "treated": hs[1]},
                        domain=domain, grid_points=len(grid), failed_points=sorted(curve.errors),
                        engine="vertex_enumeration" if args.oracle else "threshold_search")
    return args.out


def _default_rule(text):
    if text in ("never", "always"):
        return text
    header, rows = _read_table(text)
    for col in ("treat",):
        if col not in header:
            raise SchemaError(col, f"default-rule CSV {text} needs a 'treat' column")
    pos = {h: k for k, h in enumerate(header)}
    cols = _detect_x(header)
    grid = np.array([[_parse_float(r[pos[c]], i + 1, c) for c in cols] for i, r in enumerate(rows)])
    treat = np.array([_parse_float(r[pos["treat"]], i + 1, "treat") for i, r in enumerate(rows)])
    if not np.all((treat == 0) | (treat == 1)):
        raise ValidationError("default-rule 'treat' column must hold 0 or 1")
    table = PolicyTable(grid, np.nan, np.full(len(grid), "default"), treat.astype(int),
                        np.full(len(grid), np.nan), np.full(len(grid), np.nan))
    return lambda X: table(X)


def cmd_policy(args, cfg):
    curve = read_interval_csv(args.bounds)
    gamma = _gamma_levels(args, single=True)[0]
    rule = _default_rule(args.default)
    table = minimax_policy(curve, gamma, rule)
    table.write_csv(args.out)
    counts = {a: int(np.sum(table.action == a)) for a in ("treat", "control", "default")}
    cfg.resolved.update(gamma=table.gamma, actions=counts)
    return args.out


def cmd_evaluate(args, cfg):
    table = read_policy_csv(args.policy)
    spec = DgpSpec(args.dgp, args.log_gamma_star, args.mc, args.seed)
    k = table.grid.shape[1]

    def policy(X):
        X = np.asarray(X, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        if X.shape[1] < k:
            raise ValidationError(f"policy uses {k} covariates but the generator has {X.shape[1]}")
        return table(X[:, :k])

    value, half = policy_risk_mc(policy, spec, args.mc, args.seed)
    print(f"risk {value:.6f} +/- {half:.6f} (95% CI, M={args.mc}, seed={args.seed})")
    cfg.seed = args.seed
    cfg.resolved.update(dgp=spec.name, risk=value, half_width=half)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["risk", "half_width", "mc", "seed"])
            w.writerow([repr(value), repr(half), args.mc, args.seed])
    return args.out


def cmd_calibrate(args, cfg):
    data = load_csv(args.data)
    cal = calibrate_gamma(data)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["covariate", "max", "q50", "q90", "q99", "folded_max"])
    for row in cal.table():
        w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
    cfg.resolved.update(folded_max=float(cal.folded.max()))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["covariate", "max", "q50", "q90", "q99", "folded_max"])
            for row in cal.table():
                w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
    return args.out


def build_parser():
    p = _Parser(prog="sharpcate", description="Sharp CATE bounds under the marginal sensitivity model.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw a synthetic confounded dataset")
    s.add_argument("--dgp", required=True, choices=("sin1d", "pcate3d", "appendix", "appendix_logistic"))
    s.add_argument("--n", required=True, type=int)
    s.add_argument("--log-gamma-star", type=float, default=1.0)
    s.add_argument("--seed", required=True, type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="interval estimates on a grid")
    b.add_argument("--data", required=True)
    lev = b.add_mutually_exclusive_group(required=True)
    lev.add_argument("--gamma", help="comma-separated sensitivity levels")
    lev.add_argument("--log-gamma", help="comma-separated log sensitivity levels")
    b.add_argument("--grid", default="auto", help="'auto' or a CSV of evaluation points")
    b.add_argument("--kernel", default="gaussian", choices=FAMILIES)
    b.add_argument("--bandwidth", default="auto", help="'auto' (per-arm LOOCV) or number(s)")
    b.add_argument("--loocv-max-eval", type=int, default=2000)
    b.add_argument("--domain", help="covariate box lo:hi[,lo:hi...] for boundary correction")
    b.add_argument("--propensity", default="known", choices=("known", "logistic"))
    b.add_argument("--subset", help="comma-separated covariate indices for the kernel")
    b.add_argument("--oracle", action="store_true", help="use exhaustive vertex enumeration (small arms only)")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bounds)

    q = sub.add_parser("policy", help="minimax-regret policy from a bounds table")
    q.add_argument("--bounds", required=True)
    lev = q.add_mutually_exclusive_group(required=True)
    lev.add_argument("--gamma")
    lev.add_argument("--log-gamma")
    q.add_argument("--default", default="never", help="never, always or a CSV with x columns and 'treat'")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_policy)

    e = sub.add_parser("evaluate", help="Monte Carlo risk of a policy table on a generator")
    e.add_argument("--policy", required=True)
    e.add_argument("--dgp", required=True, choices=("sin1d", "pcate3d", "appendix", "appendix_logistic"))
    e.add_argument("--log-gamma-star", type=float, default=1.0)
    e.add_argument("--mc", type=int, default=100_000)
    e.add_argument("--seed", required=True, type=int)
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("calibrate-gamma", help="drop-one-covariate odds-ratio table")
    c.add_argument("--data", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)
    return p


def _attach_values(argv):
    # "--domain -2:2" would otherwise read the box as an option
    argv = list(sys.argv[1:] if argv is None else argv)
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--domain" and i + 1 < len(argv):
            out.append(f"--domain={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(_attach_values(argv))
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    cfg = RunConfig(args.command, flags)
    try:
        if getattr(args, "threads", 1) < 1:
            raise ValidationError("--threads must be >= 1")
        out = args.func(args, cfg)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    if out:
        cfg.outputs.append(out)
        cfg.write(out)
    return 0


def main():
    sys.exit(run())
