"""Command-line interface: ``structvar {simulate,estimate,diagnose,bench}``.

Exit status is 0 on success, 2 on a usage or input error and 3 on a
numerical failure.  Output files go to ``--out``, else to the directory
named by ``STRUCTVAR_OUTPUT_DIR``, else to the working directory.
"""

from __future__ import annotations

import argparse
import inspect
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .evaluation import SUITES, evaluate
from .estimator import ESTIMATOR_MODELS, StructuredVAR
from .exceptions import NumericalError, ParameterError, StabilityError, StructVARError
from .model import GroupPartition, StructuredTransition, VarSample, make_transition, simulate_var
from .stability import DEFAULT_GRID, diagnose
from .tuning import write_score_table

OUTPUT_ENV = "STRUCTVAR_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _outdir(args):
    d = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _print_json(obj):
    print(io.dumps(obj))


# -- simulate -------------------------------------------------------------------------


def cmd_simulate(args):
    if not 0 < args.rho < 1:
        raise UsageError(f"--rho must lie in (0, 1) for a stable process, got {args.rho}")
    if args.rank > args.p:
        raise UsageError(f"--rank {args.rank} exceeds --p {args.p}")
    T = make_transition(args.p, rank=args.rank, edge_prob=args.sparsity, n_hubs=args.hubs,
                        rho=args.rho, weights=tuple(args.weights), seed=args.seed)
    sample = simulate_var(T, args.n, sigma_eps=args.sigma, burn_in=args.burn_in,
                          seed=None if args.seed is None else args.seed + 1)
    out = _outdir(args)
    tag = f"p{args.p}_N{args.n}_seed{args.seed}"
    truth_path = out / f"truth_{tag}.json"
    series_path = out / f"series_{tag}.csv"
    io.write_transition(truth_path, T)
    io.write_series(series_path, sample.series)
    report = diagnose(T).to_dict()
    _print_json({"truth": str(truth_path), "series": str(series_path), "stability": report,
                 "rank": T.r, "nonzeros_S": T.s, "nonzero_groups_G": T.g})


# -- estimate --------------------------------------------------------------------------


def _partition(spec, p):
    if spec is None or spec == "columns":
        return None
    if spec == "rows":
        return GroupPartition.rows(p)
    with open(spec) as fh:
        return GroupPartition(p, json.load(fh))


def cmd_estimate(args):
    series, header = io.read_series(args.input)
    p = series.shape[1]
    holdout = None
    if args.holdout:
        train, holdout = VarSample(series).split(args.holdout)
        fit_series = train.series
    else:
        fit_series = series
    tune = None if args.tune is None else args.tune.replace("-", "_")
    est = StructuredVAR(
        model=args.model, lam=args.lam, mu=args.mu, nu=args.nu, alpha=args.alpha,
        alpha_div=args.alpha_div, beta=args.beta, gamma=args.gamma,
        partition=_partition(args.groups, p), group_box=args.group_box, tune=tune,
        n_grid=args.n_grid, grid_spacing=args.grid_spacing, cv_window=args.window,
        cv_val=args.val, cv_stride=args.stride, tol=args.tol, max_iter=args.max_iter,
    )
    est.fit(fit_series)
    out = _outdir(args)
    base = f"{Path(args.input).stem}_{args.model.replace('+', '_')}"
    comps = StructuredTransition(est.L_, est.S_, est.G_, _partition(args.groups, p))
    files = {"components": out / f"{base}_components.json", "edges": out / f"{base}_edges.csv"}
    io.write_transition(files["components"], comps)
    network = est.S_ + est.G_ if np.any(est.S_ + est.G_) else est.coef_
    io.write_edge_list(files["edges"], network, args.threshold, header)
    if est.trace_ is not None:
        files["trace"] = out / f"{base}_trace.csv"
        est.trace_.to_csv(files["trace"])
    if est.scores_:
        files["scores"] = out / f"{base}_scores.csv"
        write_score_table(files["scores"], est.scores_)
    summary = {"model": args.model, "selected": est.selected_, "rank": est.rank_,
               "nonzeros": int(np.count_nonzero(network))}
    if args.truth:
        truth = io.read_transition(args.truth)
        if truth.p != p:
            raise UsageError(f"truth has p={truth.p} but the series has {p} columns")
        sup = None if args.model in ("ols",) else network
        rep = evaluate(truth, est.coef_, support_of=sup, holdout=holdout,
                       L_hat=est.L_ if np.any(est.L_) else None).to_dict()
        files["report"] = out / f"{base}_report.json"
        io.write_json(files["report"], rep)
        summary["report"] = rep
    summary["files"] = {k: str(v) for k, v in files.items()}
    _print_json(summary)


# -- diagnose --------------------------------------------------------------------------


def cmd_diagnose(args):
    if args.truth:
        T = io.read_transition(args.truth)
        name = Path(args.truth).stem
    else:
        B, _ = io.read_series(args.matrix)
        if B.shape[0] != B.shape[1]:
            raise UsageError(f"transition matrix must be square, got {B.shape}")
        T = B
        name = Path(args.matrix).stem
    report = diagnose(T, grid=args.grid).to_dict()
    path = _outdir(args) / f"{name}_stability.json"
    io.write_json(path, report)
    _print_json(report)


# -- bench ---------------------------------------------------------------------------------


def cmd_bench(args):
    fn = SUITES[args.suite]
    params = inspect.signature(fn).parameters
    kw = {"seed": args.seed, "jobs": args.jobs}
    if args.reps is not None:
        kw["reps"] = args.reps
    if args.p is not None:
        if args.suite == "error-scaling":
            kw["p"] = tuple(args.p)
        elif len(args.p) != 1:
            raise UsageError(f"suite {args.suite} takes a single --p")
        else:
            kw["p"] = args.p[0]
    if args.n is not None:
        if args.suite in ("error-scaling",):
            kw["N"] = list(args.n)
        elif args.suite == "deviation-mc":
            kw["N_grid"] = list(args.n)
        elif len(args.n) != 1:
            raise UsageError(f"suite {args.suite} takes a single --n")
        else:
            kw["N"] = args.n[0]
    if args.large:
        if "large" not in params:
            raise UsageError("--large only applies to sparse-large")
        kw["large"] = True
    if args.alpha_div is not None:
        if args.suite not in ("l+s", "l+s+g"):
            raise UsageError("--alpha-div applies to the l+s and l+s+g suites")
        if args.alpha_div <= 0:
            raise UsageError("--alpha-div must be positive")
        kw["alpha"] = kw.get("p", 50) / args.alpha_div
    res = fn(**kw)
    csv_path, json_path = res.write(_outdir(args))
    _print_json({"suite": res.name, "csv": csv_path, "json": json_path, "summary": res.summary})


# -- parser ------------------------------------------------------------------------------


def _nonneg(x):
    v = float(x)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {x}")
    return v


def _posint(x):
    v = int(x)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {x}")
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="structvar",
                                 description="Structured VAR(1) network estimation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or .)")
        sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")

    sp = sub.add_parser("simulate", help="draw a structured transition and a series")
    common(sp)
    sp.add_argument("--p", type=_posint, required=True)
    sp.add_argument("--n", type=_posint, required=True, help="number of transitions")
    sp.add_argument("--rank", type=int, default=0)
    sp.add_argument("--sparsity", type=_nonneg, default=0.0, help="edge probability of S")
    sp.add_argument("--hubs", type=int, default=0, help="number of dense groups in G")
    sp.add_argument("--rho", type=float, default=0.7)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--burn-in", type=int, default=500)
    sp.add_argument("--weights", type=float, nargs=3, default=(1.0, 1.0, 1.0),
                    metavar=("WL", "WS", "WG"))
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="fit a structured VAR(1) to a series CSV")
    common(sp)
    sp.add_argument("input", help="series CSV (rows are time points)")
    sp.add_argument("--model", choices=ESTIMATOR_MODELS, default="sparse")
    sp.add_argument("--lambda", dest="lam", type=_nonneg, default=0.0)
    sp.add_argument("--mu", type=_nonneg, default=0.0)
    sp.add_argument("--nu", type=_nonneg, default=0.0)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--alpha-div", type=float, help="set alpha = p / ALPHA_DIV")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--groups", help="columns (default), rows, or a JSON file of index lists")
    sp.add_argument("--group-box", action="store_true")
    sp.add_argument("--tune", choices=("aic", "bic", "forward-cv"))
    sp.add_argument("--n-grid", type=_posint)
    sp.add_argument("--grid-spacing", choices=("linear", "log"), default="linear")
    sp.add_argument("--window", type=_posint, default=500)
    sp.add_argument("--val", type=_posint, default=50)
    sp.add_argument("--stride", type=_posint, default=25)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=_posint, default=2000)
    sp.add_argument("--truth", help="truth JSON; adds an evaluation report")
    sp.add_argument("--holdout", type=int, default=0, help="transitions held out for PE")
    sp.add_argument("--threshold", type=_nonneg, default=0.0, help="edge reporting threshold")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("diagnose", help="stability report of a transition")
    common(sp)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--truth", help="transition JSON")
    g.add_argument("--matrix", help="p x p matrix CSV")
    sp.add_argument("--grid", type=_posint, default=DEFAULT_GRID, help="frequency grid size")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("bench", help="run a replication suite")
    common(sp)
    sp.add_argument("suite", choices=sorted(SUITES))
    sp.add_argument("--p", type=_posint, nargs="+")
    sp.add_argument("--n", type=_posint, nargs="+")
    sp.add_argument("--reps", type=_posint)
    sp.add_argument("--jobs", type=_posint, default=os.cpu_count() or 1)
    sp.add_argument("--alpha-div", type=float)
    sp.add_argument("--large", action="store_true", help="full-size sparse suite (slow)")
    sp.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except (UsageError, ParameterError, StabilityError, FileNotFoundError) as exc:
        print(f"structvar {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, StructVARError, np.linalg.LinAlgError) as exc:
        print(f"structvar {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
