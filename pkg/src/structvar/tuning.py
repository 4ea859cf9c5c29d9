"""Tuning-parameter selection.

A grid sweep produces one :class:`Fit` per grid point; the fits can then be
scored by an information criterion, by forward (rolling-window)
cross-validation, or, for simulated data, against the known truth.

Model names follow the estimator: ``"sparse"``, ``"group"``, ``"lowrank"``
for the single-penalty solver and ``"l+s"``, ``"l+g"``, ``"s+g"``,
``"l+s+g"`` for the composite one.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .afnsl import MODELS as COMPOSITE_MODELS
from .afnsl import CompositeConfig, afnsl_solve
from .exceptions import NumericalError, ParameterError
from .fnsl import Design, SolverConfig, fnsl_solve
from .model import GroupPartition, VarSample, numerical_rank

SINGLE_MODELS = {"sparse": "l1", "group": "group", "lowrank": "nuclear"}
CRITERIA = ("aic", "bic", "forward_cv", "oracle")
ZERO_TOL = 1e-10


def _axes(model):
    """Names of the grid axes a model uses, in (lambda, mu, nu) order."""
    if model in SINGLE_MODELS:
        return ("lambda",)
    return {
        "l+s": ("lambda", "mu"),
        "l+g": ("lambda", "mu"),
        "s+g": ("mu", "nu"),
        "l+s+g": ("lambda", "mu", "nu"),
    }[model]


def _check_model(model):
    if model not in SINGLE_MODELS and model not in COMPOSITE_MODELS:
        raise ParameterError(f"unknown model {model!r}")


# -- grids -------------------------------------------------------------------


def penalty_ceiling(design: Design, kind, partition=None):
    """Smallest weight at which the penalised fit is identically zero.

    ``kind`` is ``"l1"``, ``"nuclear"`` or ``"group"``.
    """
    g = design.xty
    if kind == "l1":
        return float(np.abs(g).max())
    if kind == "nuclear":
        return float(np.linalg.norm(g, 2))
    if kind == "group":
        part = partition if partition is not None else GroupPartition.columns(design.p)
        return float(part.group_norms(g).max())
    raise ParameterError(f"unknown penalty kind {kind!r}")


def make_axis(top, n=100, spacing="linear", low=1e-2):
    """Ascending grid on ``[0, top]`` (linear) or ``[low * top, top]`` (log)."""
    if n < 1:
        raise ParameterError("grid needs at least one point")
    if top < 0:
        raise ParameterError("grid ceiling must be nonnegative")
    if spacing == "linear":
        return np.linspace(0.0, top, n)
    if spacing == "log":
        if not 0 < low < 1:
            raise ParameterError("log grid needs 0 < low < 1")
        return np.geomspace(low * top, top, n) if top > 0 else np.zeros(n)
    raise ParameterError(f"unknown spacing {spacing!r}")


@dataclass(frozen=True)
class TuningGrid:
    """Candidate penalty weights, each axis ascending.

    Unused axes are ignored by models that do not need them.
    """

    lambda_values: tuple = (0.0,)
    mu_values: tuple = (0.0,)
    nu_values: tuple = (0.0,)
    criterion: str = "aic"

    def __post_init__(self):
        for name in ("lambda_values", "mu_values", "nu_values"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim != 1 or v.size == 0:
                raise ParameterError(f"{name} must be a nonempty 1-d sequence")
            if np.any(v < 0) or np.any(np.diff(v) < 0):
                raise ParameterError(f"{name} must be nonnegative and ascending")
            object.__setattr__(self, name, tuple(float(x) for x in v))
        if self.criterion not in CRITERIA:
            raise ParameterError(f"criterion must be one of {CRITERIA}")

    @classmethod
    def for_design(cls, design, model, n=100, spacing="linear", low=1e-2, partition=None,
                   criterion="aic"):
        """Grid from the zero-fit ceilings of each penalty of ``model``."""
        _check_model(model)
        axes = _axes(model)
        kinds = {
            "sparse": {"lambda": "l1"},
            "group": {"lambda": "group"},
            "lowrank": {"lambda": "nuclear"},
            "l+s": {"lambda": "nuclear", "mu": "l1"},
            "l+g": {"lambda": "nuclear", "mu": "group"},
            "s+g": {"mu": "l1", "nu": "group"},
            "l+s+g": {"lambda": "nuclear", "mu": "l1", "nu": "group"},
        }[model]
        vals = {}
        for ax in axes:
            top = penalty_ceiling(design, kinds[ax], partition)
            vals[ax] = tuple(make_axis(top, n, spacing, low))
        return cls(
            lambda_values=vals.get("lambda", (0.0,)),
            mu_values=vals.get("mu", (0.0,)),
            nu_values=vals.get("nu", (0.0,)),
            criterion=criterion,
        )

    def points(self, model):
        """Grid points as ``(lambda, mu, nu)`` in sweep order.

        Every axis runs from its largest value down, so the first point is
        the most regularised one and consecutive points are close, which
        suits warm starts.
        """
        axes = _axes(model)
        lists = [
            self.lambda_values[::-1] if "lambda" in axes else (0.0,),
            self.mu_values[::-1] if "mu" in axes else (0.0,),
            self.nu_values[::-1] if "nu" in axes else (0.0,),
        ]
        return list(itertools.product(*lists))


# -- fitting -----------------------------------------------------------------


@dataclass
class Fit:
    """One penalised fit at a grid point."""

    lam: float
    mu: float
    nu: float
    L: np.ndarray
    S: np.ndarray
    G: np.ndarray
    objective: float
    n_iter: int
    converged: bool
    partition: Optional[GroupPartition] = None
    extras: dict = field(default_factory=dict)

    @property
    def B(self):
        return self.L + self.S + self.G

    @property
    def rank(self):
        return numerical_rank(self.L) if np.any(self.L) else 0

    @property
    def nnz(self):
        return int(np.count_nonzero(np.abs(self.S) > ZERO_TOL))

    @property
    def n_groups(self):
        if not np.any(self.G):
            return 0
        part = self.partition if self.partition is not None else GroupPartition.columns(self.G.shape[0])
        return int(np.count_nonzero(part.group_norms(self.G) > ZERO_TOL))

    @property
    def params(self):
        return (self.lam, self.mu, self.nu)


def fit_point(design, model, lam=0.0, mu=0.0, nu=0.0, config=None, init=None, keep_trace=False,
              **composite):
    """Fit one grid point.

    ``config`` is a :class:`SolverConfig` with the algorithm knobs; extra
    keyword arguments (``alpha``, ``beta``, ``gamma``, ``partition``,
    ``group_box``) go to :class:`CompositeConfig`.  For single-penalty
    models the sparse and group fits are stored in ``S`` and ``G`` and the
    low-rank fit in ``L``.  ``keep_trace`` stores the solver trace in
    ``extras["trace"]``.
    """
    _check_model(model)
    config = config if config is not None else SolverConfig()
    p = design.p
    zero = np.zeros((p, p))
    part = composite.get("partition")
    if model in SINGLE_MODELS:
        kind = SINGLE_MODELS[model]
        if kind == "group" and part is None:
            part = GroupPartition.columns(p)
        cfg = replace(config, penalty=kind, lam=lam, partition=part if kind == "group" else None)
        start = None
        if init is not None:
            start = {"l1": init.S, "group": init.G, "nuclear": init.L}[kind]
        B, trace = fnsl_solve(design, cfg, start)
        comps = {"l1": (zero, B, zero), "group": (zero, zero, B), "nuclear": (B, zero, zero)}[kind]
        L, S, G = comps
    else:
        if model == "s+g":
            weights = dict(lambda_N=0.0, mu_N=mu, nu_N=nu)
        else:
            weights = dict(lambda_N=lam, mu_N=mu, nu_N=nu)
        cfg = CompositeConfig(model=model, solver=config, **weights, **composite)
        start = None if init is None else {"L": init.L, "S": init.S, "G": init.G}
        L, S, G, trace = afnsl_solve(design, cfg, start)
        part = cfg.resolved_partition(p)
    extras = {"ax": trace.total_ax, "line_searches": trace.total_line_searches}
    if keep_trace:
        extras["trace"] = trace
    return Fit(lam, mu, nu, L, S, G, trace.estimate_objective, trace.n_iter, trace.converged, part,
               extras)


def grid_search(design, model, grid: TuningGrid, config=None, warm_start=True, **composite):
    """Fit every grid point in sweep order (see :meth:`TuningGrid.points`).

    With ``warm_start`` each fit starts from the previous one.
    """
    fits = []
    prev = None
    for lam, mu, nu in grid.points(model):
        f = fit_point(design, model, lam, mu, nu, config, prev if warm_start else None, **composite)
        fits.append(f)
        prev = f
    return fits


# -- criteria ----------------------------------------------------------------


def degrees_of_freedom(fit: Fit):
    """``nnz(S) + g * mean group size + r (2p - r)``."""
    p = fit.L.shape[0]
    r = fit.rank
    df = fit.nnz + r * (2 * p - r)
    if fit.n_groups:
        part = fit.partition if fit.partition is not None else GroupPartition.columns(p)
        df += fit.n_groups * float(part.sizes.mean())
    return float(df)


def information_criterion(design, fit: Fit, kind="aic"):
    """``n log(RSS / n) + c df`` with ``c = 2`` (AIC) or ``log n`` (BIC).

    ``n = N p`` counts the scalar responses of the stacked regression
    ``vec(Y) = (I kron X) vec(B) + vec(E)``, whose parameter count ``df`` is
    on the same scale.
    """
    if kind not in ("aic", "bic"):
        raise ParameterError("kind must be 'aic' or 'bic'")
    rss = 2.0 * design.loss(fit.B)
    if rss <= 0:
        raise NumericalError("residual sum of squares is zero; the criterion is undefined")
    n = design.N * design.p
    c = 2.0 if kind == "aic" else math.log(n)
    return n * math.log(rss / n) + c * degrees_of_freedom(fit)


def argmin_first(scores):
    """Index of the smallest score; ties go to the earliest index."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ParameterError("no scores to select from")
    finite = np.where(np.isfinite(scores), scores, np.inf)
    return int(np.argmin(finite))


def select_ic(design, fits: Sequence[Fit], kind="aic"):
    """Best fit by AIC or BIC plus the score list."""
    scores = [information_criterion(design, f, kind) for f in fits]
    return fits[argmin_first(scores)], scores


def relative_error(truth, estimate):
    truth = np.asarray(truth, float)
    nrm = np.linalg.norm(truth)
    if nrm == 0:
        raise ParameterError("relative error needs a nonzero truth")
    return float(np.linalg.norm(np.asarray(estimate, float) - truth) / nrm)


def oracle_select(truth, fits: Sequence[Fit], match_rank=True, match_groups=False):
    """Fit with the smallest estimation error among those matching the truth.

    Returns ``(fit, fallback)``.  ``fallback`` is True when no fit matched
    the requested rank and group count, in which case the global minimiser
    is returned.
    """
    if not fits:
        raise ParameterError("no fits to select from")
    errs = [relative_error(truth.B, f.B) for f in fits]
    ok = []
    for f in fits:
        good = True
        if match_rank and truth.r and f.rank != truth.r:
            good = False
        if match_groups and truth.g and f.n_groups != truth.g:
            good = False
        ok.append(good)
    pool = [e if k else np.inf for e, k in zip(errs, ok)]
    if any(ok):
        return fits[argmin_first(pool)], False
    return fits[argmin_first(errs)], True


# -- forward cross-validation -------------------------------------------------


def forward_folds(T, W=500, W_prime=50, stride=25):
    """Train/validation index ranges for rolling-window validation.

    Fold ``i`` starts at ``t = W + stride * i``; the model is fitted on
    observations ``t - W .. t - 1`` and validated on one-step predictions of
    observations ``t .. t + W' - 1``.  Only complete validation windows are
    used.
    """
    if min(W, W_prime, stride) < 1 or W < 2:
        raise ParameterError("W >= 2, W' >= 1 and stride >= 1 are required")
    if T < W + W_prime + stride:
        raise ParameterError(
            f"series of length {T} too short for W={W}, W'={W_prime}, stride={stride}"
        )
    folds = []
    t = W
    while t + W_prime <= T:
        folds.append(((t - W, t), (t, t + W_prime)))
        t += stride
    return folds


def validation_error(series, B, target):
    """``||Y - X B||_F^2`` for one-step predictions of ``series[target]``."""
    a, b = target
    Y = series[a:b]
    X = series[a - 1:b - 1]
    R = Y - X @ B
    return float(np.sum(R * R))


@dataclass
class CVResult:
    best: tuple
    points: List[tuple]
    scores: np.ndarray
    folds: list


def forward_cv(series, model, grid: TuningGrid, W=500, W_prime=50, stride=25, config=None,
               **composite):
    """Pick the grid point with the smallest mean validation error.

    Returns a :class:`CVResult`; ``best`` is the ``(lambda, mu, nu)`` triple.
    Ties go to the first point in sweep order, the most regularised one.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise ParameterError("series must be a T x p array")
    folds = forward_folds(series.shape[0], W, W_prime, stride)
    points = grid.points(model)
    total = np.zeros(len(points))
    for train, val in folds:
        a, b = train
        # the training window never reaches the first validation target
        assert b <= val[0]
        design = Design.from_sample(VarSample(series[a:b]))
        fits = grid_search(design, model, grid, config, True, **composite)
        for k, f in enumerate(fits):
            total[k] += validation_error(series, f.B, val)
    scores = total / len(folds)
    return CVResult(points[argmin_first(scores)], points, scores, folds)


# -- score tables --------------------------------------------------------------


def score_rows(fits: Sequence[Fit], scores, criterion):
    for f, s in zip(fits, scores):
        yield {
            "lambda": f.lam,
            "mu": f.mu,
            "nu": f.nu,
            "criterion": criterion,
            "score": float(s),
            "rank": f.rank,
            "nnz": f.nnz,
        }


def write_score_table(path, rows):
    fields = ["lambda", "mu", "nu", "criterion", "score", "rank", "nnz"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def tune(design, model, grid: TuningGrid, config=None, truth=None, series=None,
         cv_kwargs=None, **composite):
    """Sweep, score and refit.

    Returns ``(fit, table)`` where ``fit`` is a cold-started refit at the
    selected point and ``table`` lists the per-point rows for
    :func:`write_score_table`.  ``truth`` is required for the oracle
    criterion and ``series`` for forward cross-validation.
    """
    crit = grid.criterion
    if crit == "forward_cv":
        if series is None:
            raise ParameterError("forward cross-validation needs the raw series")
        res = forward_cv(series, model, grid, config=config, **(cv_kwargs or {}), **composite)
        lam, mu, nu = res.best
        fit = fit_point(design, model, lam, mu, nu, config, keep_trace=True, **composite)
        rows = [
            {"lambda": pt[0], "mu": pt[1], "nu": pt[2], "criterion": crit, "score": float(s),
             "rank": "", "nnz": ""}
            for pt, s in zip(res.points, res.scores)
        ]
        return fit, rows
    fits = grid_search(design, model, grid, config, True, **composite)
    if crit == "oracle":
        if truth is None:
            raise ParameterError("oracle selection needs the true transition")
        best, fallback = oracle_select(truth, fits, match_groups=truth.g > 0)
        scores = [relative_error(truth.B, f.B) for f in fits]
        fit = fit_point(design, model, *best.params, config, keep_trace=True, **composite)
        fit.extras["fallback"] = fallback
    else:
        best, scores = select_ic(design, fits, crit)
        fit = fit_point(design, model, *best.params, config, keep_trace=True, **composite)
    return fit, list(score_rows(fits, scores, crit))
