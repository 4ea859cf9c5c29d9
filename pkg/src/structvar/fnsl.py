"""Accelerated proximal gradient with a safeguarded Barzilai-Borwein step.

The solver minimises ``1/2 ||Y - X B||_F^2 + P(B)`` where ``B`` is a sum of
one or more blocks, each with its own closed-form proximal operator.  Every
iteration

1. starts the nominal step ``eta0`` from the BB Rayleigh quotient of the
   previous move (never below ``eta_min``),
2. solves the momentum weight ``alpha`` from
   ``1 / (alpha_prev * eta_prev) = (1 - alpha) / (alpha * eta)`` with
   ``eta = alpha * eta0``,
3. takes a prox step centred at the current iterate using the gradient at
   the blend ``(1 - alpha) B_ag + alpha B``,
4. accepts the step unless the accumulated curvature slack ``Q`` falls
   below ``-C / i^2``, in which case ``eta0`` is multiplied by ``sigma`` and
   the iteration is replayed,
5. folds the new iterate into the aggregate ``B_ag`` with weight ``alpha``.

The aggregate sequence carries the O(1/k^2) objective guarantee.  Matrix
products with the design are tallied in ``ax_count``; the Gram matrix is
precomputed, and one Gram product counts as two products with ``X``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .exceptions import DivergenceError, ParameterError
from .model import GroupPartition, VarSample
from .prox import (
    group_l21_norm,
    group_soft_threshold,
    l1_norm,
    nuclear_norm,
    project_box,
    project_group_box,
    soft_threshold,
    svt,
)

PENALTIES = ("l1", "group", "nuclear")


def default_beta(i):
    """``min(1/i, (1 - 1/i)^2)``: the harmonic schedule clamped to its bound."""
    return min(1.0 / i, (1.0 - 1.0 / i) ** 2)


@dataclass(frozen=True)
class SolverConfig:
    """Penalty and algorithm settings for :func:`fnsl_solve`.

    ``eta_min`` and ``eta0`` default to ``||X'X||_2 / 10``.  ``curvature``
    only matters when several blocks are active: ``"lifted"`` sums the
    squared block steps, ``"summed"`` squares the summed step (cheaper
    but can accept steps that are too long).
    """

    penalty: str = "l1"
    lam: float = 0.0
    partition: Optional[GroupPartition] = None
    C: float = 100.0
    sigma: float = 2.0
    eta_min: Optional[float] = None
    eta0: Optional[float] = None
    beta_schedule: Callable[[int], float] = default_beta
    max_iter: int = 2000
    tol: float = 1e-8
    window: int = 5
    max_line_search: int = 200
    curvature: str = "lifted"
    restart: str = "auto"

    def __post_init__(self):
        if self.penalty not in PENALTIES:
            raise ParameterError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if self.lam < 0:
            raise ParameterError("lam must be nonnegative")
        if self.penalty == "group" and self.partition is None:
            raise ParameterError("the group penalty needs a partition")
        if self.C < 0:
            raise ParameterError("C must be nonnegative")
        if self.sigma <= 1:
            raise ParameterError("sigma must exceed 1")
        if self.eta_min is not None and self.eta_min <= 0:
            raise ParameterError("eta_min must be positive")
        if self.max_iter < 1 or self.window < 1:
            raise ParameterError("max_iter and window must be positive")
        if self.curvature not in ("summed", "lifted"):
            raise ParameterError("curvature must be 'summed' or 'lifted'")
        if self.restart not in ("auto", "always", "never"):
            raise ParameterError("restart must be 'auto', 'always' or 'never'")


@dataclass
class SolveTrace:
    """Per-iteration record of a solve.

    Lists are indexed by iteration (first entry is iteration 1).
    ``objective`` is evaluated at the aggregate iterate and
    ``iterate_objective`` at the prox iterate; the stopping rule watches the
    latter.  The final matrices are stored per block in ``aggregate``,
    ``iterate`` (last prox iterate) and ``estimate`` (one proximal-gradient
    step from whichever of the two has the lower objective, which restores
    exact zeros and exact rank).
    """

    objective: List[float] = field(default_factory=list)
    iterate_objective: List[float] = field(default_factory=list)
    eta: List[float] = field(default_factory=list)
    eta0: List[float] = field(default_factory=list)
    alpha: List[float] = field(default_factory=list)
    Q: List[float] = field(default_factory=list)
    gamma: List[float] = field(default_factory=list)
    line_searches: List[int] = field(default_factory=list)
    ax_count: List[int] = field(default_factory=list)
    converged: bool = False
    aggregate: list = field(default_factory=list)
    iterate: list = field(default_factory=list)
    estimate: list = field(default_factory=list)
    estimate_objective: float = float("nan")
    ranks: dict = field(default_factory=dict)
    restarts: int = 0

    @property
    def n_iter(self):
        return len(self.objective)

    @property
    def total_line_searches(self):
        return int(sum(self.line_searches))

    @property
    def total_ax(self):
        return self.ax_count[-1] if self.ax_count else 0

    @property
    def final_objective(self):
        return self.objective[-1] if self.objective else float("nan")

    @property
    def B_ag(self):
        return sum(self.aggregate)

    def rows(self):
        for k in range(self.n_iter):
            yield {
                "iteration": k + 1,
                "objective": self.objective[k],
                "eta": self.eta[k],
                "alpha": self.alpha[k],
                "Q": self.Q[k],
                "line_searches": self.line_searches[k],
                "ax_count": self.ax_count[k],
            }

    def to_csv(self, path):
        fields = ["iteration", "objective", "eta", "alpha", "Q", "line_searches", "ax_count"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for row in self.rows():
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


class Design:
    """Sufficient statistics of a least-squares problem ``Y ~ X B``.

    Keeps ``X'X``, ``X'Y`` and ``||Y||^2`` so that the loss and its gradient
    cost one ``p x p`` product.
    """

    def __init__(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if X.ndim != 2 or Y.shape != (X.shape[0], X.shape[1]):
            raise ParameterError(f"X and Y must both be N x p, got {X.shape} and {Y.shape}")
        self.N, self.p = X.shape
        self.gram = X.T @ X
        self.xty = X.T @ Y
        self.yty = float(np.sum(Y * Y))
        self.ax = 0
        self._norm = None

    @classmethod
    def from_sample(cls, sample: VarSample):
        return cls(sample.X, sample.Y)

    def gram_dot(self, M):
        self.ax += 2
        return self.gram @ M

    def loss(self, B, GB=None):
        """``1/2 ||Y - X B||_F^2`` given ``GB = X'X B`` when available."""
        if GB is None:
            GB = self.gram_dot(B)
        return 0.5 * self.yty - float(np.sum(B * self.xty)) + 0.5 * float(np.sum(B * GB))

    @property
    def gram_norm(self):
        """``||X'X||_2`` by power iteration to relative accuracy 1e-6."""
        if self._norm is None:
            self._norm = power_norm(self.gram)
        return self._norm


def power_norm(A, rtol=1e-6, max_iter=10000):
    """Largest eigenvalue of a symmetric positive semidefinite matrix."""
    n = A.shape[0]
    v = np.ones(n) + np.linspace(0.0, 1.0, n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        if abs(nrm - est) <= rtol * nrm:
            return float(nrm)
        est = nrm
    return float(est)


@dataclass(frozen=True)
class Block:
    """One additive component of ``B`` and its penalty.

    ``max_abs`` and ``max_group_norm`` add box constraints that are applied
    after the prox step.
    """

    kind: str
    weight: float
    partition: Optional[GroupPartition] = None
    max_abs: Optional[float] = None
    max_group_norm: Optional[float] = None

    def prox(self, Z, step_weight):
        """Prox step followed by the box projections.

        Returns ``(out, rank, penalty)`` where ``rank`` is ``None`` except for
        the nuclear block and ``penalty`` is the block penalty at ``out``.
        """
        rank = None
        sv = None
        if self.kind == "l1":
            out = soft_threshold(Z, step_weight)
        elif self.kind == "group":
            out = group_soft_threshold(Z, self.partition, step_weight)
        elif self.kind == "nuclear":
            out, rank, sv = svt(Z, step_weight, return_values=True)
        else:
            raise ParameterError(f"unknown block kind {self.kind!r}")
        projected = out
        if self.max_abs is not None:
            projected = project_box(projected, self.max_abs)
        if self.max_group_norm is not None:
            projected = project_group_box(projected, self.partition, self.max_group_norm)
        if sv is not None and projected is out:
            pen = self.weight * float(sv.sum())
        elif sv is not None and np.array_equal(projected, out):
            pen = self.weight * float(sv.sum())
        else:
            pen = self.penalty(projected)
        return projected, rank, pen

    def penalty(self, M):
        if self.weight == 0:
            return 0.0
        if self.kind == "l1":
            return self.weight * l1_norm(M)
        if self.kind == "group":
            return self.weight * group_l21_norm(M, self.partition)
        return self.weight * nuclear_norm(M)


def bb_stepsize(B_i, B_prev, X, eta_min):
    """Safeguarded BB step ``max(eta_min, ||X D||^2 / ||D||^2)``, ``D = B_i - B_prev``."""
    D = np.asarray(B_i, float) - np.asarray(B_prev, float)
    d2 = float(np.sum(D * D))
    if d2 == 0:
        return float(eta_min)
    XD = np.asarray(X, float) @ D
    return max(float(eta_min), float(np.sum(XD * XD)) / d2)


def solve_alpha(alpha_prev, eta_prev, eta0):
    """Positive root of ``eta0 a^2 + d a - d = 0`` with ``d = alpha_prev * eta_prev``."""
    if not (0 < alpha_prev <= 1 and eta_prev > 0 and eta0 > 0):
        raise ParameterError("need alpha_prev in (0, 1], eta_prev > 0 and eta0 > 0")
    d = alpha_prev * eta_prev
    # 2d / (d + sqrt(d^2 + 4 eta0 d)) avoids cancellation when eta0 >> d
    return 2.0 * d / (d + math.sqrt(d * d + 4.0 * eta0 * d))


def accelerated_solve(design: Design, blocks, config: SolverConfig, init=None):
    """Run the accelerated scheme on an arbitrary list of :class:`Block`.

    Returns the filled :class:`SolveTrace`.  ``init`` gives starting values
    per block (zeros by default).
    """
    p = design.p
    nb = len(blocks)
    eta_min = config.eta_min if config.eta_min is not None else design.gram_norm / 10.0
    if eta_min <= 0:
        eta_min = 1e-12
    eta0_init = config.eta0 if config.eta0 is not None else eta_min
    eta0_init = max(eta0_init, eta_min)
    trace = SolveTrace()
    ax0 = design.ax
    lifted = config.curvature == "lifted"
    # projected prox steps are inexact and can cycle under long steps;
    # restarting from the aggregate keeps such runs convergent
    boxed = any(b.max_abs is not None or b.max_group_norm is not None for b in blocks)
    restart = config.restart == "always" or (config.restart == "auto" and boxed)
    trace.restarts = 0

    Z = [np.zeros((p, p)) for _ in blocks] if init is None else [np.array(z, float) for z in init]
    B = sum(Z)
    GB = design.gram_dot(B) if np.any(B) else np.zeros((p, p))
    Zag = [z.copy() for z in Z]
    GBag = GB.copy()
    Bag = B.copy()

    Q = 0.0
    alpha_prev = eta_prev = None
    xd2_prev = d2_prev = 0.0
    ranks = {}
    restart_from = None
    last_obj = math.inf

    for i in range(1, config.max_iter + 1):
        if i == 1:
            eta0 = eta0_init
        else:
            eta0 = eta_min if d2_prev == 0 else max(eta_min, xd2_prev / d2_prev)
        beta_i = min(max(config.beta_schedule(i), 0.0), (1.0 - 1.0 / i) ** 2)
        floor = -config.C / (i * i)
        ls = 0
        while True:
            alpha = 1.0 if alpha_prev is None else solve_alpha(alpha_prev, eta_prev, eta0)
            eta = alpha * eta0
            grad = (1.0 - alpha) * GBag + alpha * GB - design.xty
            newZ = []
            pens = 0.0
            for blk, z in zip(blocks, Z):
                out, rank, pen = blk.prox(z - grad / eta, blk.weight / eta)
                newZ.append(out)
                pens += pen
                if rank is not None:
                    ranks[blk.kind] = rank
            Bnew = sum(newZ)
            D = Bnew - B
            GD = design.gram_dot(D)
            xd2 = float(np.sum(D * GD))
            if lifted and nb > 1:
                d2 = float(sum(np.sum((a - b) ** 2) for a, b in zip(newZ, Z)))
            else:
                d2 = float(np.sum(D * D))
            gamma = d2 - (alpha / eta) * xd2
            Q_new = beta_i * Q + gamma
            # rounding guard: a step whose slack is zero up to ulps is accepted
            if Q_new < floor - 1e-12 * d2 and ls < config.max_line_search:
                eta0 *= config.sigma
                ls += 1
                continue
            break

        if restart:
            saved = (Zag, Bag, GBag)
        Zag = [(1.0 - alpha) * za + alpha * zn for za, zn in zip(Zag, newZ)]
        Bag = sum(Zag)
        GB = GB + GD
        GBag = (1.0 - alpha) * GBag + alpha * GB
        Z, B = newZ, Bnew
        Q = Q_new
        alpha_prev, eta_prev = alpha, eta
        xd2_prev, d2_prev = xd2, d2

        obj = design.loss(Bag, GBag) + sum(blk.penalty(za) for blk, za in zip(blocks, Zag))
        iobj = design.loss(B, GB) + pens
        trace.objective.append(obj)
        trace.iterate_objective.append(iobj)
        trace.eta.append(eta)
        trace.eta0.append(eta0)
        trace.alpha.append(alpha)
        trace.Q.append(Q)
        trace.gamma.append(gamma)
        trace.line_searches.append(ls)
        trace.ax_count.append(design.ax - ax0)
        if not math.isfinite(obj):
            trace.aggregate, trace.iterate = Zag, Z
            raise DivergenceError(f"non-finite objective at iteration {i}", trace)
        if restart_from is not None:
            # a plain prox-gradient step that cannot improve on the restart
            # point means that point is a fixed point of the update
            if abs(iobj - restart_from) <= config.tol * max(abs(iobj), 1e-300):
                trace.converged = True
                break
            restart_from = None
        if restart and i > 1 and obj > last_obj + 1e-12 * abs(obj):
            # return to the previous aggregate and drop the momentum
            Zag, Bag, GBag = saved
            restart_from = obj = last_obj
            Z = [z.copy() for z in Zag]
            B, GB = Bag.copy(), GBag.copy()
            alpha_prev = eta_prev = None
            Q = 0.0
            trace.restarts += 1
            # each restart also lifts the step floor towards the safe 1/(k ||X'X||)
            eta_min = min(config.sigma * eta_min, max(eta_min, nb * design.gram_norm))
        last_obj = obj
        # the prox iterates settle long before the averaged sequence does,
        # so convergence is judged on them
        w = config.window
        if i > w:
            ref = trace.iterate_objective[-1 - w]
            if abs(iobj - ref) <= config.tol * max(abs(iobj), 1e-300):
                trace.converged = True
                break

    trace.aggregate = Zag
    trace.iterate = Z
    if trace.iterate_objective[-1] < trace.objective[-1]:
        _polish(design, blocks, trace, Z, GB)
    else:
        _polish(design, blocks, trace, Zag, GBag)
    return trace


def _polish(design, blocks, trace, start, Gstart):
    # one prox-gradient step with step 1/(k ||X'X||) from the better of the
    # two final points; k ||X'X|| bounds the curvature in the stacked blocks
    lip = len(blocks) * design.gram_norm
    if lip == 0:
        trace.estimate = [z.copy() for z in start]
        trace.estimate_objective = min(trace.final_objective, trace.iterate_objective[-1])
        return
    grad = Gstart - design.xty
    est = []
    for blk, za in zip(blocks, start):
        out, rank, _ = blk.prox(za - grad / lip, blk.weight / lip)
        est.append(out)
        if rank is not None:
            trace.ranks[blk.kind] = rank
    Bhat = sum(est)
    trace.estimate = est
    trace.estimate_objective = design.loss(Bhat) + sum(
        blk.penalty(e) for blk, e in zip(blocks, est)
    )


def fnsl_solve(sample, config: SolverConfig, init=None):
    """Single-penalty estimate of the transition matrix.

    Parameters
    ----------
    sample : VarSample or Design
    config : SolverConfig
    init : ndarray, optional
        Warm start; zero by default.

    Returns
    -------
    B_hat : ndarray
        Proximal-gradient step taken from the better of the final aggregate
        and prox iterates.  It carries exact zeros (or exact rank) and an
        objective no larger than either.
    trace : SolveTrace
    """
    design = sample if isinstance(sample, Design) else Design.from_sample(sample)
    block = Block(config.penalty, config.lam, config.partition)
    trace = accelerated_solve(design, [block], config, None if init is None else [init])
    return trace.estimate[0], trace


def with_knobs(config: SolverConfig, **changes):
    return replace(config, **changes)
