"""Accuracy metrics, replication suites and Monte Carlo checks.

Every suite draws its replications from seeds derived from one master
seed, so a suite is a deterministic function of its arguments.  Suites
return a :class:`SuiteResult` holding one row per (replication, method) and
an aggregate summary; :meth:`SuiteResult.write` stores both as CSV and JSON.
"""

from __future__ import annotations

import copy
import csv
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed

from .afnsl import ols_solve
from .exceptions import ParameterError, StabilityError
from .io import write_json
from .fnsl import Block, Design, SolverConfig, fnsl_solve
from .model import (
    GroupPartition,
    StructuredTransition,
    VarSample,
    make_transition,
    numerical_rank,
    simulate_var,
)
from .reference import fista_solve
from .stability import mu_extremes, spectral_radius
from .tuning import TuningGrid, fit_point, grid_search, oracle_select, select_ic

ZERO_TOL = 1e-10


# -- metrics -----------------------------------------------------------------


def support(M, tol=ZERO_TOL):
    return np.abs(np.asarray(M, dtype=float)) > tol


def metrics(truth, estimate, tol=ZERO_TOL):
    """``(tpr, far, ee)``; rates in percent.

    FAR is reported as 0 when the truth has no zero entries.
    """
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise ParameterError(f"shape mismatch {truth.shape} vs {estimate.shape}")
    t = support(truth, tol)
    if not t.any():
        raise ParameterError("true positive rate is undefined for an all-zero truth")
    e = support(estimate, tol)
    tpr = 100.0 * np.count_nonzero(e & t) / np.count_nonzero(t)
    n_zero = np.count_nonzero(~t)
    far = 100.0 * np.count_nonzero(e & ~t) / n_zero if n_zero else 0.0
    ee = float(np.linalg.norm(estimate - truth) / np.linalg.norm(truth))
    return float(tpr), float(far), ee


def prediction_error(B_hat, holdout: VarSample):
    """``||X B_hat - Y||_F^2 / ||Y||_F^2`` over the holdout transitions."""
    Y, X = holdout.Y, holdout.X
    if Y.size == 0:
        raise ParameterError("empty holdout")
    den = float(np.sum(Y * Y))
    if den == 0:
        raise ParameterError("holdout responses are identically zero")
    R = X @ np.asarray(B_hat, dtype=float) - Y
    return float(np.sum(R * R) / den)


def summarize(values):
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"mean": float("nan"), "sd": float("nan"), "median": float("nan")}
    return {
        "mean": float(v.mean()),
        "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
        "median": float(np.median(v)),
    }


@dataclass
class EvalReport:
    """Accuracy of one fit, or aggregates over replications."""

    tpr: Optional[float]
    far: Optional[float]
    ee: float
    pe: Optional[float] = None
    r_hat: Optional[int] = None
    replications: int = 1
    aggregates: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_rows(cls, rows):
        keys = ("tpr", "far", "ee", "pe", "r_hat")
        agg = {k: summarize([r.get(k) for r in rows]) for k in keys}
        med = {k: agg[k]["median"] for k in keys}
        r_hat = med["r_hat"]
        return cls(
            tpr=med["tpr"],
            far=med["far"],
            ee=med["ee"],
            pe=med["pe"],
            r_hat=None if not np.isfinite(r_hat) else int(round(r_hat)),
            replications=len(rows),
            aggregates=agg,
        )


def evaluate(truth: StructuredTransition, B_hat, support_of=None, holdout=None, L_hat=None):
    """:class:`EvalReport` for one estimate.

    ``support_of`` is the matrix whose nonzeros are scored against the true
    structured sparse part ``S + G`` (defaults to ``B_hat``); when the truth
    has no sparse part, the support of ``B`` is used instead.
    """
    B_hat = np.asarray(B_hat, dtype=float)
    target = truth.R if np.any(truth.R) else truth.B
    est = B_hat if support_of is None else support_of
    tpr, far, _ = metrics(target, est)
    ee = float(np.linalg.norm(B_hat - truth.B) / np.linalg.norm(truth.B))
    pe = prediction_error(B_hat, holdout) if holdout is not None else None
    r_hat = numerical_rank(L_hat) if L_hat is not None else None
    return EvalReport(tpr, far, ee, pe, r_hat)


# -- seeds and results ----------------------------------------------------------


def derive_seed(master, index, stream=0):
    """Seed of replication ``index`` (and sub-stream) of a master seed."""
    ss = np.random.SeedSequence([int(master), int(index), int(stream)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class SuiteResult:
    name: str
    params: dict
    rows: List[dict]
    summary: dict

    def tag(self):
        p = self.params.get("p", "na")
        n = self.params.get("N", "na")
        if isinstance(p, (list, tuple)):
            p = "-".join(str(x) for x in p)
        if isinstance(n, (list, tuple)):
            n = f"{min(n)}-{max(n)}"
        return f"{self.name}_p{p}_N{n}_seed{self.params.get('seed', 'na')}"

    def write(self, outdir):
        """Write ``<tag>.csv`` (rows) and ``<tag>.json`` (params and summary)."""
        os.makedirs(outdir, exist_ok=True)
        base = os.path.join(outdir, self.tag())
        if self.rows:
            fields = list(dict.fromkeys(k for r in self.rows for k in r))
            with open(base + ".csv", "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=fields)
                w.writeheader()
                for r in self.rows:
                    w.writerow({k: _fmt(v) for k, v in r.items()})
        write_json(base + ".json", {"name": self.name, "params": self.params,
                                    "summary": self.summary})
        return base + ".csv", base + ".json"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _run(fn, jobs, tasks):
    if jobs == 1:
        out = [fn(*t) for t in tasks]
    else:
        out = Parallel(n_jobs=jobs)(delayed(fn)(*t) for t in tasks)
    rows = [r for chunk in out for r in chunk]
    # order-independent reduction: sort by replication then method
    rows.sort(key=lambda r: (r.get("rep", 0), str(r.get("method", "")), r.get("alpha", 0),
                             r.get("p", 0), r.get("N", 0)))
    return rows


def _method_summary(rows, keys=("tpr", "far", "ee", "pe", "r_hat")):
    out = {}
    for m in dict.fromkeys(r["method"] for r in rows):
        sub = [r for r in rows if r["method"] == m]
        out[m] = {k: summarize([r.get(k) for r in sub]) for k in keys}
    return out


def _sample_with_holdout(T, N, holdout, seed):
    full = simulate_var(T, N + holdout, seed=seed)
    if holdout:
        return full.split(holdout)
    return full, None


def _composite_defaults(p):
    return {"alpha": p / 2.0}


# -- composite replication (L+S, L+S+G, S+G) ---------------------------------------


def _fit_row(rep, method, truth, fit, holdout, extra=None):
    B = fit.B
    if method in ("ols",):
        ev = evaluate(truth, B, holdout=holdout)
        row = {"tpr": None, "far": None}
    else:
        sup = fit.S + fit.G if method not in ("lasso", "sparse") else B
        ev = evaluate(truth, B, support_of=sup, holdout=holdout,
                      L_hat=fit.L if np.any(fit.L) or method.startswith("l+") else None)
        row = {"tpr": ev.tpr, "far": ev.far}
    row.update({"rep": rep, "method": method, "ee": ev.ee, "pe": ev.pe, "r_hat": ev.r_hat})
    if fit is not None and hasattr(fit, "lam"):
        row.update({"lambda": fit.lam, "mu": fit.mu, "nu": fit.nu,
                    "fallback": bool(fit.extras.get("fallback", False))})
    if extra:
        row.update(extra)
    return row


class _OLSFit:
    def __init__(self, B):
        p = B.shape[0]
        self.L = np.zeros((p, p))
        self.S = B
        self.G = np.zeros((p, p))
        self.B = B


def _local_axis(values, center, n):
    """Geometric axis spanning one coarse step on each side of ``center``."""
    v = np.asarray(values)
    if center == 0 or v.size < 2 or n < 2:
        return (center,)
    step = float(v[1] / v[0]) if v[0] > 0 else 2.0
    return tuple(np.geomspace(center / step, center * step, n))


def oracle_fit(design, truth, model, n_grid=10, low=1e-2, refine=0, config=None, sweep_tol=1e-6,
               **composite):
    """Oracle-selected fit from a log grid.

    The grid is swept with warm starts at the looser tolerance ``sweep_tol``;
    the chosen point is then refitted from zero with ``config``.  With
    ``refine > 1`` a second ``refine``-point geometric grid per axis is
    searched around the coarse choice, spanning one coarse step each way.
    """
    config = config if config is not None else SolverConfig()
    sweep = replace(config, tol=max(config.tol, sweep_tol))
    grid = TuningGrid.for_design(design, model, n=n_grid, spacing="log", low=low,
                                 partition=composite.get("partition"), criterion="oracle")
    match = dict(match_rank=model in ("lowrank", "l+s", "l+g", "l+s+g"),
                 match_groups=bool(truth.g) and model in ("group", "l+g", "s+g", "l+s+g"))
    fits = grid_search(design, model, grid, sweep, True, **composite)
    best, fallback = oracle_select(truth, fits, **match)
    if refine > 1:
        local = TuningGrid(_local_axis(grid.lambda_values, best.lam, refine),
                           _local_axis(grid.mu_values, best.mu, refine),
                           _local_axis(grid.nu_values, best.nu, refine), "oracle")
        fits += grid_search(design, model, local, sweep, True, **composite)
        best, fallback = oracle_select(truth, fits, **match)
    final = fit_point(design, model, best.lam, best.mu, best.nu, config, **composite)
    final.extras["fallback"] = fallback
    return final


def _composite_rep(rep, seed, p, N, rank, edge_prob, n_hubs, rho, holdout, methods, n_grid, low,
                   refine, alpha, gamma, weights, normalize):
    T = make_transition(p, rank=rank, edge_prob=edge_prob, n_hubs=n_hubs, rho=rho,
                        weights=weights, normalize=normalize, seed=derive_seed(seed, rep, 0))
    train, hold = _sample_with_holdout(T, N, holdout, derive_seed(seed, rep, 1))
    design = Design.from_sample(train)
    rows = []
    for m in methods:
        if m == "ols":
            fit = _OLSFit(ols_solve(design))
        elif m == "lasso":
            fit = oracle_fit(design, T, "sparse", n_grid=2 * n_grid, low=low, refine=refine)
        else:
            kw = {"alpha": alpha} if "l" in m else {}
            if m == "s+g":
                kw["gamma"] = gamma
            fit = oracle_fit(design, T, m, n_grid=n_grid, low=low, refine=refine, **kw)
        rows.append(_fit_row(rep, m, T, fit, hold))
    return rows


def suite_composite(name, p, N, *, rank, edge_prob, n_hubs=0, rho=0.7, holdout=10,
                    methods=("ols", "lasso", "l+s"), reps=50, seed=0, n_grid=10, low=1e-2, refine=0,
                    alpha=None, gamma=None, weights=(1.0, 1.0, 1.0), normalize=True, jobs=1):
    alpha = alpha if alpha is not None else p / 2.0
    gamma = gamma if gamma is not None else p / 2.0
    tasks = [(r, seed, p, N, rank, edge_prob, n_hubs, rho, holdout, methods, n_grid, low, refine, alpha,
              gamma, weights, normalize) for r in range(reps)]
    rows = _run(_composite_rep, jobs, tasks)
    summary = _method_summary(rows)
    if "l+s" in methods and "lasso" in methods:
        by_rep = {}
        for r in rows:
            by_rep.setdefault(r["rep"], {})[r["method"]] = r["ee"]
        wins = [d["l+s"] < d["lasso"] for d in by_rep.values() if "l+s" in d and "lasso" in d]
        summary["l+s_beats_lasso_fraction"] = float(np.mean(wins)) if wins else float("nan")
    params = dict(p=p, N=N, rank=rank, edge_prob=edge_prob, n_hubs=n_hubs, rho=rho,
                  holdout=holdout, methods=list(methods), reps=reps, seed=seed, n_grid=n_grid,
                  low=low, refine=refine, alpha=alpha, gamma=gamma, weights=list(weights), normalize=normalize)
    return SuiteResult(name, params, rows, summary)


def suite_ls(p=50, N=200, reps=50, seed=0, **kw):
    kw.setdefault("rank", p // 25 + 1)
    kw.setdefault("edge_prob", 0.04)
    kw.setdefault("n_grid", 12)
    return suite_composite("l+s", p, N, reps=reps, seed=seed, **kw)


def suite_lsg(p=50, N=300, reps=50, seed=0, **kw):
    kw.setdefault("rank", p // 25 + 1)
    kw.setdefault("edge_prob", 0.03)
    kw.setdefault("n_hubs", 2)
    kw.setdefault("methods", ("s+g", "l+s", "l+s+g"))
    return suite_composite("l+s+g", p, N, reps=reps, seed=seed, **kw)


def suite_sg(p=50, N=200, reps=50, seed=0, **kw):
    kw.setdefault("rank", 0)
    kw.setdefault("edge_prob", 0.05)
    kw.setdefault("n_hubs", 2)
    kw.setdefault("holdout", 0)
    kw.setdefault("methods", ("lasso", "s+g"))
    return suite_composite("s+g", p, N, reps=reps, seed=seed, **kw)


# -- alpha sweep ------------------------------------------------------------------


ALPHA_FACTORS = (1 / 8, 1 / 4, 1 / 2, 1, 2, 4, 8)


def _alpha_rep(rep, seed, p, N, rank, edge_prob, rho, factors, n_grid, low, refine, weights,
               normalize):
    T = make_transition(p, rank=rank, edge_prob=edge_prob, rho=rho, weights=weights,
                        normalize=normalize, seed=derive_seed(seed, rep, 0))
    train = simulate_var(T, N, seed=derive_seed(seed, rep, 1))
    design = Design.from_sample(train)
    config = SolverConfig()
    sweep = replace(config, tol=1e-6)
    points = TuningGrid.for_design(design, "l+s", n=n_grid, spacing="log", low=low).points("l+s")
    rows = []
    prev = None
    # loosest box first: a fit already inside a tighter box is also optimal under it
    for f in sorted(factors, reverse=True):
        a = f * p
        fits = []
        for k, (lam, mu, nu) in enumerate(points):
            if prev is not None and np.abs(prev[k].L).max() <= a / p:
                fits.append(prev[k])
            else:
                init = fits[-1] if fits else None
                fits.append(fit_point(design, "l+s", lam, mu, nu, sweep, init, alpha=a))
        prev = fits
        best, fallback = oracle_select(T, fits)
        final = fit_point(design, "l+s", best.lam, best.mu, best.nu, config, alpha=a)
        final.extras["fallback"] = fallback
        rows.append(_fit_row(rep, "l+s", T, final, None, {"alpha": a, "alpha_factor": f}))
    return rows


def suite_alpha(p=50, N=200, reps=20, seed=0, *, rank=None, edge_prob=0.04, rho=0.7,
                factors=ALPHA_FACTORS, n_grid=12, low=1e-2, refine=0, weights=(1.0, 1.0, 1.0),
                normalize=True, jobs=1):
    rank = rank if rank is not None else p // 25 + 1
    tasks = [(r, seed, p, N, rank, edge_prob, rho, factors, n_grid, low, refine, weights, normalize)
             for r in range(reps)]
    rows = _run(_alpha_rep, jobs, tasks)
    table = []
    for f in factors:
        sub = [r for r in rows if r["alpha_factor"] == f]
        table.append({
            "alpha_factor": f,
            "tpr": summarize([r["tpr"] for r in sub])["median"],
            "far": summarize([r["far"] for r in sub])["median"],
            "ee": summarize([r["ee"] for r in sub])["median"],
        })
    tprs = [t["tpr"] for t in table]
    fars = [t["far"] for t in table]
    summary = {
        "table": table,
        "tpr_inversions": int(sum(b > a for a, b in zip(tprs, tprs[1:]))),
        "far_max_deviation": float(max(abs(x - np.mean(fars)) for x in fars)),
    }
    params = dict(p=p, N=N, rank=rank, edge_prob=edge_prob, rho=rho, reps=reps, seed=seed,
                  factors=list(factors), n_grid=n_grid, low=low, refine=refine, weights=list(weights),
                  normalize=normalize)
    return SuiteResult("alpha-sweep", params, rows, summary)


# -- single-penalty suites ---------------------------------------------------------


def _solver_compare(design, block, config):
    """Run FNSL and FISTA at the same penalty; report objective, time and products."""
    out = {}
    for name in ("fnsl", "fista"):
        d = copy.copy(design)
        d.ax = 0
        t0 = time.perf_counter()
        if name == "fnsl":
            B, tr = fnsl_solve(d, config)
        else:
            tr = fista_solve(d, [block], tol=config.tol)
            B = tr.estimate[0]
        out[name] = {"B": B, "objective": tr.estimate_objective,
                     "time": time.perf_counter() - t0, "ax": tr.total_ax, "n_iter": tr.n_iter}
    return out


def _sparse_rep(rep, seed, p, N, rho, edge_prob, n_grid):
    T = make_transition(p, edge_prob=edge_prob, rho=rho, seed=derive_seed(seed, rep, 0))
    sample = simulate_var(T, N, seed=derive_seed(seed, rep, 1))
    design = Design.from_sample(sample)
    grid = TuningGrid.for_design(design, "sparse", n=n_grid, spacing="linear")
    fits = grid_search(design, "sparse", grid)
    best, _ = select_ic(design, fits, "aic")
    cfg = SolverConfig(penalty="l1", lam=best.lam)
    res = _solver_compare(design, Block("l1", best.lam), cfg)
    rows = []
    for m, r in res.items():
        tpr, far, ee = metrics(T.B, r["B"])
        rows.append({"rep": rep, "method": m, "lambda": best.lam, "tpr": tpr, "far": far, "ee": ee,
                     "objective": r["objective"], "time": r["time"], "ax": r["ax"],
                     "n_iter": r["n_iter"]})
    return rows


def suite_sparse(p=200, N=400, reps=10, seed=0, *, rho=0.7, edge_prob=None, n_grid=30,
                 large=False, jobs=1):
    """Sparse transition, AIC-tuned lasso solved by FNSL and by FISTA.

    ``large=True`` runs the full-size grid ``p in {800, 900, 1000}``,
    ``N in {1000, 1500, 2000}``; otherwise one desk-scale cell.
    """
    cells = [(pp, nn) for pp in (800, 900, 1000) for nn in (1000, 1500, 2000)] if large else [(p, N)]
    rows = []
    for pp, nn in cells:
        ep = edge_prob if edge_prob is not None else 10.0 / pp
        tasks = [(r, seed, pp, nn, rho, ep, n_grid) for r in range(reps)]
        for row in _run(_sparse_rep, jobs, tasks):
            row.update({"p": pp, "N": nn})
            rows.append(row)
    summary = _method_summary(rows, ("tpr", "far", "ee", "time", "ax", "objective", "n_iter"))
    by = {}
    for r in rows:
        by.setdefault((r["p"], r["N"], r["rep"]), {})[r["method"]] = r["ax"]
    summary["fnsl_ax_le_fista_fraction"] = float(np.mean([d["fnsl"] <= d["fista"] for d in by.values()]))
    params = dict(p=[c[0] for c in cells] if large else p, N=[c[1] for c in cells] if large else N,
                  reps=reps, seed=seed, rho=rho, n_grid=n_grid, large=large)
    return SuiteResult("sparse-large", params, rows, summary)


def _lowrank_rep(rep, seed, p, N, rank, rho, n_grid, low, refine, compare):
    T = make_transition(p, rank=rank, rho=rho, seed=derive_seed(seed, rep, 0))
    sample = simulate_var(T, N, seed=derive_seed(seed, rep, 1))
    design = Design.from_sample(sample)
    fit = oracle_fit(design, T, "lowrank", n_grid=n_grid, low=low, refine=refine)
    ee = float(np.linalg.norm(fit.B - T.B) / np.linalg.norm(T.B))
    rows = [{"rep": rep, "method": "fnsl", "lambda": fit.lam, "ee": ee, "r_hat": fit.rank,
             "fallback": bool(fit.extras.get("fallback")), "ax": fit.extras.get("ax")}]
    if compare:
        res = _solver_compare(design, Block("nuclear", fit.lam),
                              SolverConfig(penalty="nuclear", lam=fit.lam))
        for m, r in res.items():
            rows.append({"rep": rep, "method": f"{m}-timing", "lambda": fit.lam,
                         "ee": float(np.linalg.norm(r["B"] - T.B) / np.linalg.norm(T.B)),
                         "r_hat": numerical_rank(r["B"]), "objective": r["objective"],
                         "time": r["time"], "ax": r["ax"], "n_iter": r["n_iter"]})
    return rows


def suite_lowrank(p=200, N=2000, reps=10, seed=0, *, rank=None, rho=0.7, n_grid=20, low=1e-2,
                  refine=0, compare=True, jobs=1):
    rank = rank if rank is not None else p // 25 + 1
    tasks = [(r, seed, p, N, rank, rho, n_grid, low, refine, compare) for r in range(reps)]
    rows = _run(_lowrank_rep, jobs, tasks)
    summary = _method_summary(rows, ("ee", "r_hat", "time", "ax", "n_iter"))
    params = dict(p=p, N=N, rank=rank, rho=rho, reps=reps, seed=seed, n_grid=n_grid, low=low,
                  refine=refine)
    return SuiteResult("lowrank", params, rows, summary)


# -- deviation bounds ----------------------------------------------------------------


def deviation_stats(sample: VarSample, partition=None):
    """The four deviation quantities of one sample."""
    X, E = sample.X, sample.E
    N, p = X.shape
    part = partition if partition is not None else GroupPartition.columns(p)
    M = X.T @ E / N
    return {
        "max": float(np.abs(M).max()),
        "spectral": float(np.linalg.norm(M, 2)),
        "group": float(part.group_norms(M).max()),
        "lmin": float(np.linalg.eigvalsh(X.T @ X / N)[0]),
    }


def deviation_mc(B, Sigma_eps=None, N_grid=None, reps=50, partition=None, seed=0, burn_in=500):
    """Monte Carlo deviation quantities divided by their rates.

    Rates are ``sqrt(log p / N)``, ``sqrt(p / N)``, ``sqrt(m log p / N)``
    and the constant ``Lambda_min(Sigma) / (2 mu_max)``.  Innovations have
    covariance ``Sigma_eps`` (identity by default).
    """
    B = B.B if isinstance(B, StructuredTransition) else np.asarray(B, dtype=float)
    p = B.shape[0]
    rho = spectral_radius(B)
    if rho >= 1:
        raise StabilityError(f"unstable transition matrix: spectral radius {rho:.6g} >= 1", rho)
    Sigma = np.eye(p) if Sigma_eps is None else np.asarray(Sigma_eps, dtype=float)
    chol = np.linalg.cholesky(Sigma)
    N_grid = sorted(int(n) for n in (N_grid if N_grid is not None else
                                     np.geomspace(100, 1600, 8).round().astype(int)))
    part = partition if partition is not None else GroupPartition.columns(p)
    m = part.m
    _, mu_max = mu_extremes(B)
    lmin_rate = float(np.linalg.eigvalsh(Sigma)[0] / (2 * mu_max))
    rows = []
    for N in N_grid:
        acc = {k: [] for k in ("max", "spectral", "group", "lmin")}
        for r in range(reps):
            rng = np.random.default_rng(derive_seed(seed, r, N))
            noise = rng.standard_normal((burn_in + N, p)) @ chol.T
            x = np.zeros(p)
            path = np.empty((N + 1, p))
            for t in range(burn_in + N):
                x = x @ B + noise[t]
                k = t + 1 - burn_in
                if k >= 0:
                    path[k] = x
            if burn_in == 0:
                path[0] = 0.0
            s = VarSample(path)
            E = s.Y - s.X @ B
            stats = deviation_stats(VarSample(path, E[::-1]), part)
            for k in acc:
                acc[k].append(stats[k])
        lp = math.log(p)
        rates = {"max": math.sqrt(lp / N), "spectral": math.sqrt(p / N),
                 "group": math.sqrt(m * lp / N), "lmin": lmin_rate}
        row = {"N": N}
        for k in acc:
            mean = float(np.mean(acc[k]))
            row[k] = mean
            row[f"{k}_ratio"] = mean / rates[k]
        rows.append(row)
    return rows


def ratio_variation(rows, key):
    vals = [r[f"{key}_ratio"] for r in rows]
    return float(max(vals) / min(vals))


def suite_deviation(p=20, reps=50, seed=0, *, rho=0.5, N_grid=None, edge_prob=0.2, jobs=1):
    T = make_transition(p, edge_prob=edge_prob, rho=rho, seed=derive_seed(seed, 0, 0))
    rows = deviation_mc(T, None, N_grid, reps, seed=seed)
    summary = {k: ratio_variation(rows, k) for k in ("max", "spectral", "group", "lmin")}
    params = dict(p=p, N=[r["N"] for r in rows], reps=reps, seed=seed, rho=rho)
    return SuiteResult("deviation-mc", params, rows, summary)


# -- error scaling ------------------------------------------------------------------------


def rate_weights(p, N, c_lambda=1.0, c_mu=1.0, sigma=1.0):
    """Penalty weights at the rates of the error bound for the unnormalised loss.

    ``lambda_N = c_lambda sigma sqrt(N p)`` and
    ``mu_N = c_mu sigma sqrt(N log p)``.
    """
    return c_lambda * sigma * math.sqrt(N * p), c_mu * sigma * math.sqrt(N * math.log(p))


def _scaling_rep(rep, seed, p, N_grid, rank, edge_prob, rho, c_lambda, c_mu, alpha_factor,
                 weights, normalize):
    T = make_transition(p, rank=rank, edge_prob=edge_prob, rho=rho, weights=weights,
                        normalize=normalize, seed=derive_seed(seed, rep, p))
    full = simulate_var(T, max(N_grid), seed=derive_seed(seed, rep, p + 1))
    s_count = int(np.count_nonzero(T.S))
    rows = []
    for N in N_grid:
        # nested samples: the first N transitions of one long path
        design = Design.from_sample(full.window(0, N + 1))
        lam, mu = rate_weights(p, N, c_lambda, c_mu)
        fit = fit_point(design, "l+s", lam, mu, 0.0, alpha=alpha_factor * p)
        err = float(np.sum((fit.S - T.S) ** 2) + np.sum((fit.L - T.L) ** 2))
        rows.append({"rep": rep, "method": "l+s", "p": p, "N": N, "error": err, "s": s_count,
                     "rescaled_N": N / (s_count * math.log(p) + rank * p), "r_hat": fit.rank})
    return rows


def error_scaling_experiment(p_list=(50, 100), r_fixed=2, N_grid=None, reps=10, seed=0, *,
                             edge_prob=0.03, rho=0.7, c_lambda=1.0, c_mu=1.0, alpha_factor=0.5,
                             weights=(1.0, 1.0, 1.0), normalize=True, jobs=1):
    """Median squared error against ``N`` and against ``N / (s log p + r p)``."""
    N_grid = sorted(int(n) for n in (N_grid if N_grid is not None else
                                     np.geomspace(150, 5500, 8).round().astype(int)))
    tasks = [(r, seed, p, N_grid, r_fixed, edge_prob, rho, c_lambda, c_mu, alpha_factor, weights,
              normalize) for p in p_list for r in range(reps)]
    rows = _run(_scaling_rep, jobs, tasks)
    table = []
    for p in p_list:
        for N in N_grid:
            sub = [r for r in rows if r["p"] == p and r["N"] == N]
            table.append({"p": p, "N": N,
                          "rescaled_N": float(np.median([r["rescaled_N"] for r in sub])),
                          "error": float(np.median([r["error"] for r in sub]))})
    return rows, table


def collapse_deviation(table):
    """Largest relative gap between the rescaled curves on their shared range.

    Each curve is interpolated linearly in ``log(rescaled N)`` against
    ``log(error)``; the gap is ``|e_a - e_b| / min(e_a, e_b)``.
    """
    ps = sorted({t["p"] for t in table})
    curves = {}
    for p in ps:
        pts = sorted((t["rescaled_N"], t["error"]) for t in table if t["p"] == p)
        curves[p] = (np.log([x for x, _ in pts]), np.log([e for _, e in pts]))
    lo = max(c[0][0] for c in curves.values())
    hi = min(c[0][-1] for c in curves.values())
    if lo >= hi:
        return float("nan")
    xs = np.linspace(lo, hi, 50)
    worst = 0.0
    for a in ps:
        for b in ps:
            if a >= b:
                continue
            ea = np.exp(np.interp(xs, *curves[a]))
            eb = np.exp(np.interp(xs, *curves[b]))
            worst = max(worst, float(np.max(np.abs(ea - eb) / np.minimum(ea, eb))))
    return worst


def raw_order_holds(table):
    """True when, at every shared raw ``N``, the error grows with ``p``."""
    ps = sorted({t["p"] for t in table})
    Ns = sorted({t["N"] for t in table})
    err = {(t["p"], t["N"]): t["error"] for t in table}
    return all(err[(a, N)] < err[(b, N)] for N in Ns for a, b in zip(ps, ps[1:]))


def suite_scaling(p=(50, 100), N=None, reps=10, seed=0, jobs=1, **kw):
    rows, table = error_scaling_experiment(p, N_grid=N, reps=reps, seed=seed, jobs=jobs, **kw)
    summary = {"table": table, "collapse_deviation": collapse_deviation(table),
               "raw_order_holds": raw_order_holds(table)}
    params = dict(p=list(p), N=sorted({r["N"] for r in rows}), reps=reps, seed=seed, **kw)
    return SuiteResult("error-scaling", params, rows, summary)


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "sparse-large": suite_sparse,
    "lowrank": suite_lowrank,
    "l+s": suite_ls,
    "l+s+g": suite_lsg,
    "s+g": suite_sg,
    "alpha-sweep": suite_alpha,
    "error-scaling": suite_scaling,
    "deviation-mc": suite_deviation,
}
