"""Baseline solvers used for cross-checks and benchmarks.

``ista_solve`` is plain proximal gradient with the fixed step ``1/L``;
``fista_solve`` is FISTA with the monotone backtracking of Beck and
Teboulle.  Both accept the same block lists as
:func:`structvar.fnsl.accelerated_solve` and share its product accounting.
"""

from __future__ import annotations

import math

import numpy as np

from .fnsl import Design, SolveTrace


def _objective(design, blocks, Z, GB):
    return design.loss(sum(Z), GB) + sum(b.penalty(z) for b, z in zip(blocks, Z))


def _stop(trace, tol, window):
    if trace.n_iter <= window:
        return False
    a, b = trace.objective[-1], trace.objective[-1 - window]
    return abs(a - b) <= tol * max(abs(a), 1e-300)


def ista_solve(design: Design, blocks, max_iter=100000, tol=1e-13, window=5, init=None):
    """Proximal gradient with step ``1 / (k * lambda_max(X'X))`` for ``k`` blocks."""
    p = design.p
    lip = len(blocks) * float(np.linalg.eigvalsh(design.gram)[-1])
    Z = [np.zeros((p, p)) for _ in blocks] if init is None else [np.array(z, float) for z in init]
    ax0 = design.ax
    GB = design.gram_dot(sum(Z))
    trace = SolveTrace()
    for _ in range(max_iter):
        grad = GB - design.xty
        Z = [b.prox(z - grad / lip, b.weight / lip)[0] for b, z in zip(blocks, Z)]
        GB = design.gram_dot(sum(Z))
        trace.objective.append(_objective(design, blocks, Z, GB))
        trace.ax_count.append(design.ax - ax0)
        if _stop(trace, tol, window):
            trace.converged = True
            break
    trace.estimate = trace.aggregate = trace.iterate = Z
    trace.estimate_objective = trace.final_objective
    return trace


def fista_solve(
    design: Design,
    blocks,
    L0=None,
    eta=2.0,
    max_iter=2000,
    tol=1e-8,
    window=5,
    max_line_search=200,
):
    """FISTA with backtracking on the Lipschitz estimate.

    ``L0`` defaults to ``||X'X||_2 / 10``, matching the starting step of the
    accelerated solver.  Line-search counts and product counts are recorded
    in the returned trace.
    """
    p = design.p
    lip = L0 if L0 is not None else design.gram_norm / 10.0
    X_prev = [np.zeros((p, p)) for _ in blocks]
    Yk = [z.copy() for z in X_prev]
    GX_prev = np.zeros((p, p))
    GY = GX_prev.copy()
    t = 1.0
    trace = SolveTrace()
    ax0 = design.ax
    for _ in range(max_iter):
        grad = GY - design.xty
        ls = 0
        while True:
            Xn = [b.prox(y - grad / lip, b.weight / lip)[0] for b, y in zip(blocks, Yk)]
            GXn = design.gram_dot(sum(Xn))
            D = sum(Xn) - sum(Yk)
            curv = float(np.sum(D * (GXn - GY)))
            d2 = float(sum(np.sum((a - b) ** 2) for a, b in zip(Xn, Yk)))
            if curv <= lip * d2 * (1 + 1e-12) or ls >= max_line_search:
                break
            lip *= eta
            ls += 1
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        Yk = [xn + mom * (xn - xp) for xn, xp in zip(Xn, X_prev)]
        GY = GXn + mom * (GXn - GX_prev)
        X_prev, GX_prev, t = Xn, GXn, t_next
        trace.objective.append(_objective(design, blocks, Xn, GXn))
        trace.eta.append(lip)
        trace.line_searches.append(ls)
        trace.ax_count.append(design.ax - ax0)
        if _stop(trace, tol, window):
            trace.converged = True
            break
    trace.estimate = trace.aggregate = trace.iterate = X_prev
    trace.estimate_objective = trace.final_objective
    return trace
