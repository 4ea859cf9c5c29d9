"""Composite estimation: low-rank plus (group-)sparse transition matrices.

Solves

    min 1/2 ||Y - X (L + S + G)||_F^2
        + lambda_N ||L||_* + mu_N ||S||_1 + nu_N ||G||_{2,1}

over any subset of the three components, with box constraints that limit
how much sparse structure the low-rank part can absorb:
``||L||_max <= alpha / p`` when ``S`` is present,
``||L||_{2,max} <= beta / sqrt(K)`` when ``G`` is present and, in the
sparse plus group-sparse model, ``||G||_max <= gamma / p``.

All blocks share one step size and one backtracking test, which is what
:func:`structvar.fnsl.accelerated_solve` does for a list of blocks.  The
box constraints are imposed by projecting after each prox step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .exceptions import ParameterError, SingularDesignError
from .fnsl import Block, Design, SolverConfig, accelerated_solve
from .model import GroupPartition
from .prox import group_l21_norm, l1_norm, nuclear_norm

MODELS = ("l+s", "l+g", "s+g", "l+s+g")


@dataclass(frozen=True)
class CompositeConfig:
    """Weights, constraint radii and solver knobs for :func:`afnsl_solve`.

    Parameters
    ----------
    model : {"l+s", "l+g", "s+g", "l+s+g"}
        Active components.
    lambda_N, mu_N, nu_N : float
        Nuclear, l1 and group weights.  In ``"l+g"`` the group part is
        weighted by ``mu_N``.
    alpha, beta, gamma : float, optional
        Constraint numerators; default to ``p / 10``, ``K`` and ``p / 2``.
    partition : GroupPartition, optional
        Groups for ``G``; one group per column by default.
    group_box : bool
        Also constrain ``||G||_max <= gamma / p`` in the three-component model
        (always on in ``"s+g"``).
    solver : SolverConfig
        Algorithm knobs; its penalty fields are ignored.
    """

    model: str = "l+s"
    lambda_N: float = 0.0
    mu_N: float = 0.0
    nu_N: float = 0.0
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    partition: Optional[GroupPartition] = None
    group_box: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ParameterError(f"model must be one of {MODELS}, got {self.model!r}")
        for name in ("lambda_N", "mu_N", "nu_N"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ParameterError(f"{name} must be positive")

    @property
    def has_L(self):
        return "l" in self.model

    @property
    def has_S(self):
        return "s" in self.model

    @property
    def has_G(self):
        return "g" in self.model

    @property
    def group_weight(self):
        return self.nu_N if self.has_S else self.mu_N

    def resolved_partition(self, p):
        part = self.partition if self.partition is not None else GroupPartition.columns(p)
        if part.p != p:
            raise ParameterError("partition dimension does not match the data")
        return part

    def blocks(self, p):
        """Blocks in the order L, S, G (inactive ones omitted)."""
        part = self.resolved_partition(p)
        alpha = self.alpha if self.alpha is not None else p / 10.0
        beta = self.beta if self.beta is not None else float(part.K)
        gamma = self.gamma if self.gamma is not None else p / 2.0
        out = {}
        if self.has_L:
            out["L"] = Block(
                "nuclear",
                self.lambda_N,
                part,
                max_abs=alpha / p if self.has_S else None,
                max_group_norm=beta / math.sqrt(part.K) if self.has_G else None,
            )
        if self.has_S:
            out["S"] = Block("l1", self.mu_N)
        if self.has_G:
            boxed = self.model == "s+g" or (self.group_box and self.has_S)
            out["G"] = Block("group", self.group_weight, part, max_abs=gamma / p if boxed else None)
        return out


def composite_objective(L, S, G, sample, config: CompositeConfig):
    """Penalised least-squares objective; ``None`` components count as zero."""
    X, Y = np.asarray(sample.X, float), np.asarray(sample.Y, float)
    p = X.shape[1]
    zero = np.zeros((p, p))
    L = zero if L is None else np.asarray(L, float)
    S = zero if S is None else np.asarray(S, float)
    G = zero if G is None else np.asarray(G, float)
    for name, m in zip("LSG", (L, S, G)):
        if m.shape != (p, p):
            raise ParameterError(f"{name} has shape {m.shape}, expected ({p}, {p})")
    resid = Y - X @ (L + S + G)
    obj = 0.5 * float(np.sum(resid * resid))
    if config.has_L:
        obj += config.lambda_N * nuclear_norm(L)
    if config.has_S:
        obj += config.mu_N * l1_norm(S)
    if config.has_G:
        obj += config.group_weight * group_l21_norm(G, config.resolved_partition(p))
    return obj


def afnsl_solve(sample, config: CompositeConfig, init=None):
    """Estimate the components of a composite transition matrix.

    Parameters
    ----------
    sample : VarSample or Design
    config : CompositeConfig
    init : dict, optional
        Warm-start values keyed by ``"L"``, ``"S"``, ``"G"``.

    Returns
    -------
    L, S, G : ndarray
        Estimated components (zero for inactive ones).
    trace : SolveTrace
    """
    design = sample if isinstance(sample, Design) else Design.from_sample(sample)
    p = design.p
    blocks = config.blocks(p)
    names = list(blocks)
    start = None
    if init is not None:
        start = [np.asarray(init.get(n, np.zeros((p, p))), float) for n in names]
    trace = accelerated_solve(design, list(blocks.values()), config.solver, start)
    out = {n: np.zeros((p, p)) for n in "LSG"}
    out.update(zip(names, trace.estimate))
    return out["L"], out["S"], out["G"], trace


def ols_solve(sample):
    """Unpenalised least squares through a Cholesky solve of the normal equations."""
    design = sample if isinstance(sample, Design) else Design.from_sample(sample)
    try:
        factor = linalg.cho_factor(design.gram, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularDesignError("X'X is not positive definite; OLS needs N >= p") from exc
    B = linalg.cho_solve(factor, design.xty)
    # a nearly singular Gram can pass Cholesky yet leave a poor solution
    resid = np.abs(design.xty - design.gram @ B).max()
    if resid > 1e-6 * max(np.abs(design.xty).max(), 1e-300):
        raise SingularDesignError(f"normal equations ill-conditioned (residual {resid:.3g})")
    return B
