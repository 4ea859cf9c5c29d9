"""Domain types and synthetic data generation for structured VAR(1) models.

A VAR(1) process is written in row form, ``x_t = x_{t-1} @ B + e_t``, which is
the transpose of the column form ``X^t = B' X^{t-1} + eps^t``.  The transition
matrix ``B`` is a sum of a low-rank part ``L``, a sparse part ``S`` and a
group-sparse part ``G``.

Group indices refer to the column-major flattening of a ``p x p`` matrix,
``M.ravel(order="F")``, and are zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import ParameterError, StabilityError, StructVARError
from .stability import spectral_radius

RANK_RTOL = 1e-10


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def flatten(M):
    """Column-major flattening used by every group operation."""
    return np.asarray(M).ravel(order="F")


def unflatten(v, p):
    return np.asarray(v).reshape((p, p), order="F")


class GroupPartition:
    """Partition of the ``p*p`` matrix positions into ``K`` disjoint groups.

    Parameters
    ----------
    p : int
        Matrix dimension.
    groups : sequence of sequences of int
        Zero-based, column-major flat indices.  Groups must be nonempty,
        pairwise disjoint, and cover ``range(p*p)`` exactly.
    """

    def __init__(self, p: int, groups: Sequence[Sequence[int]]):
        p = int(p)
        if p < 1:
            raise ParameterError(f"p must be positive, got {p}")
        n = p * p
        labels = np.full(n, -1, dtype=np.intp)
        clean = []
        for k, grp in enumerate(groups):
            idx = np.asarray(grp, dtype=np.intp).ravel()
            if idx.size == 0:
                raise ParameterError(f"group {k} is empty")
            if idx.min() < 0 or idx.max() >= n:
                raise ParameterError(f"group {k} has indices outside [0, {n})")
            if np.unique(idx).size != idx.size or np.any(labels[idx] >= 0):
                raise ParameterError(f"group {k} overlaps another group")
            labels[idx] = k
            clean.append(np.sort(idx))
        if not clean:
            raise ParameterError("a partition needs at least one group")
        if np.any(labels < 0):
            missing = int(np.sum(labels < 0))
            raise ParameterError(f"partition does not cover {missing} positions")
        self.p = p
        self.groups = tuple(clean)
        self.labels = labels
        self.sizes = np.bincount(labels, minlength=len(clean))

    @classmethod
    def from_labels(cls, p, labels):
        labels = np.asarray(labels, dtype=np.intp).ravel()
        if labels.size != p * p:
            raise ParameterError("need one label per matrix entry")
        uniq = np.unique(labels)
        return cls(p, [np.flatnonzero(labels == u) for u in uniq])

    @classmethod
    def columns(cls, p):
        """One group per column (``K = p``)."""
        return cls.from_labels(p, np.repeat(np.arange(p), p))

    @classmethod
    def rows(cls, p):
        return cls.from_labels(p, np.tile(np.arange(p), p))

    @classmethod
    def singletons(cls, p):
        return cls.from_labels(p, np.arange(p * p))

    @property
    def K(self) -> int:
        return len(self.groups)

    @property
    def m(self) -> int:
        """Size of the largest group."""
        return int(self.sizes.max())

    def check(self, M):
        M = np.asarray(M)
        if M.shape != (self.p, self.p):
            raise ParameterError(
                f"partition is for {self.p}x{self.p} matrices, got shape {M.shape}"
            )

    def group_norms(self, M):
        """Frobenius norm of every group of ``M``."""
        self.check(M)
        v = flatten(M)
        return np.sqrt(np.bincount(self.labels, weights=v * v, minlength=self.K))

    def to_list(self):
        return [g.tolist() for g in self.groups]

    def __eq__(self, other):
        return (
            isinstance(other, GroupPartition)
            and other.p == self.p
            and np.array_equal(other.labels, self.labels)
        )

    def __repr__(self):
        return f"GroupPartition(p={self.p}, K={self.K}, m={self.m})"


def numerical_rank(M, rtol=RANK_RTOL):
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True, eq=False)
class StructuredTransition:
    """A transition matrix ``B = L + S + G`` kept in its components.

    Absent components are zero matrices.  ``partition`` defines the groups of
    ``G`` and defaults to one group per column.
    """

    L: np.ndarray
    S: np.ndarray
    G: np.ndarray
    partition: GroupPartition = field(default=None)

    def __post_init__(self):
        mats = [np.array(m, dtype=float) for m in (self.L, self.S, self.G)]
        p = mats[0].shape[0]
        for name, m in zip("LSG", mats):
            if m.shape != (p, p):
                raise ParameterError(f"component {name} has shape {m.shape}, expected ({p}, {p})")
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        part = self.partition if self.partition is not None else GroupPartition.columns(p)
        if part.p != p:
            raise ParameterError("partition dimension does not match the components")
        object.__setattr__(self, "partition", part)

    @classmethod
    def from_components(cls, L=None, S=None, G=None, partition=None, p=None):
        given = [m for m in (L, S, G) if m is not None]
        if p is None:
            if not given:
                raise ParameterError("need at least one component or p")
            p = np.asarray(given[0]).shape[0]
        zero = np.zeros((p, p))
        return cls(
            zero if L is None else L,
            zero if S is None else S,
            zero if G is None else G,
            partition,
        )

    @property
    def p(self) -> int:
        return self.L.shape[0]

    @property
    def B(self) -> np.ndarray:
        return self.L + self.S + self.G

    @property
    def R(self) -> np.ndarray:
        """Structured sparse part ``S + G``."""
        return self.S + self.G

    @property
    def r(self) -> int:
        return numerical_rank(self.L)

    @property
    def s(self) -> int:
        return int(np.count_nonzero(self.S))

    @property
    def g(self) -> int:
        return int(np.count_nonzero(self.partition.group_norms(self.G)))

    def scaled(self, c):
        return StructuredTransition(c * self.L, c * self.S, c * self.G, self.partition)


@dataclass(frozen=True, eq=False)
class VarSample:
    """Autoregressive design built from ``N + 1`` consecutive observations.

    ``Y`` and ``X`` follow the reverse-chronological stacking: row ``i`` of
    ``X`` is the observation at time ``T - 1 - i`` and row ``i`` of ``Y`` is
    the one at ``T - i`` (zero-based rows), so ``Y = X @ B + E``.

    ``series`` holds the observations in chronological order and
    ``innovations`` the matching shocks (row ``t`` drives the transition from
    observation ``t`` to ``t + 1``); they are only known for simulated data.
    """

    series: np.ndarray
    innovations: Optional[np.ndarray] = None
    sigma_eps: Optional[float] = None

    def __post_init__(self):
        series = np.array(self.series, dtype=float)
        if series.ndim != 2 or series.shape[0] < 2:
            raise ParameterError("a VAR sample needs a 2-D series with at least two rows")
        if not np.all(np.isfinite(series)):
            raise ParameterError("series contains non-finite values")
        series.setflags(write=False)
        object.__setattr__(self, "series", series)
        if self.innovations is not None:
            E = np.array(self.innovations, dtype=float)
            if E.shape != (series.shape[0] - 1, series.shape[1]):
                raise ParameterError("innovation matrix does not match the series")
            E.setflags(write=False)
            object.__setattr__(self, "innovations", E)

    @property
    def Y(self) -> np.ndarray:
        return self.series[:0:-1]

    @property
    def X(self) -> np.ndarray:
        return self.series[-2::-1]

    @property
    def E(self) -> Optional[np.ndarray]:
        return None if self.innovations is None else self.innovations[::-1]

    @property
    def N(self) -> int:
        return self.series.shape[0] - 1

    @property
    def p(self) -> int:
        return self.series.shape[1]

    def window(self, start, stop):
        """Sub-sample on chronological observations ``start..stop-1``.

        The innovations are carried over when known.
        """
        if stop - start < 2:
            raise ParameterError("a window needs at least two observations")
        E = None if self.innovations is None else self.innovations[start : stop - 1]
        return VarSample(self.series[start:stop], E, self.sigma_eps)

    def split(self, n_holdout):
        """Split into a training sample and a holdout of ``n_holdout`` transitions.

        The holdout shares its first observation with the last training one,
        so the two designs together cover every transition exactly once.
        """
        n_holdout = int(n_holdout)
        if not 0 < n_holdout < self.N:
            raise ParameterError(f"n_holdout must lie in (0, {self.N}), got {n_holdout}")
        cut = self.N - n_holdout
        return self.window(0, cut + 1), self.window(cut, self.N + 1)


# -- generators -------------------------------------------------------------


def generate_sparse_topology(p, edge_prob, seed=None):
    """Weighted directed Erdos-Renyi graph as a ``p x p`` matrix.

    Each entry is an edge independently with probability ``edge_prob`` and
    carries a standard normal weight.
    """
    if not 0 < edge_prob <= 1:
        raise ParameterError(f"edge_prob must lie in (0, 1], got {edge_prob}")
    rng = _rng(seed)
    mask = rng.random((p, p)) < edge_prob
    weights = rng.standard_normal((p, p))
    return np.where(mask, weights, 0.0)


def generate_low_rank(p, r, seed=None, symmetric=False):
    """Rank-``r`` matrix ``U @ V.T`` with i.i.d. standard normal factors.

    With ``symmetric=True`` the same factor is used twice (``U @ U.T``),
    which gives a positive semidefinite, normal matrix.
    """
    if not 1 <= r <= p:
        raise ParameterError(f"rank must lie in [1, {p}], got {r}")
    rng = _rng(seed)
    U = rng.standard_normal((p, r))
    V = U if symmetric else rng.standard_normal((p, r))
    return U @ V.T


def rescale_to_spectral_radius(B, rho_target):
    """Return ``c * B`` whose spectral radius equals ``rho_target``."""
    if not 0 < rho_target < 1:
        raise ParameterError(f"rho_target must lie in (0, 1), got {rho_target}")
    B = np.asarray(B, dtype=float)
    rho = spectral_radius(B)
    if rho == 0:
        raise ParameterError("cannot rescale a matrix with zero spectral radius")
    return B * (rho_target / rho)


def _unit_spectral(M):
    nrm = np.linalg.norm(M, 2)
    return M / nrm if nrm > 0 else M


def make_transition(
    p,
    *,
    rank=0,
    edge_prob=0.0,
    n_hubs=0,
    rho=0.7,
    partition=None,
    weights=(1.0, 1.0, 1.0),
    symmetric_low_rank=False,
    normalize=True,
    max_attempts=100,
    seed=None,
):
    """Draw a stable structured transition matrix.

    Each requested component is drawn, normalised to unit spectral norm
    (unless ``normalize=False``) and multiplied by its entry in ``weights``
    (order L, S, G); the sum is then rescaled to spectral radius ``rho``.

    Parameters
    ----------
    rank : int
        Rank of ``L``; 0 omits the low-rank part.
    edge_prob : float
        Edge probability of the sparse part; 0 omits it.
    n_hubs : int
        Number of dense hub groups in ``G``; 0 omits it.  Sparse entries that
        fall inside a hub group are zeroed.
    partition : GroupPartition, optional
        Groups for ``G``; one group per column by default.

    Draws are repeated until the components are mutually non-degenerate:
    ``L`` has more nonzeros than ``S`` and ``S`` has rank above ``rank``.
    """
    if rank < 0 or rank > p:
        raise ParameterError(f"rank must lie in [0, {p}], got {rank}")
    if rank == 0 and edge_prob == 0 and n_hubs == 0:
        raise ParameterError("at least one component must be requested")
    if not 0 < rho < 1:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    part = partition if partition is not None else GroupPartition.columns(p)
    if n_hubs > part.K:
        raise ParameterError(f"n_hubs={n_hubs} exceeds the number of groups {part.K}")
    rng = _rng(seed)
    wl, ws, wg = weights
    scale = _unit_spectral if normalize else (lambda M: M)
    zero = np.zeros((p, p))
    for _ in range(max_attempts):
        L = S = G = zero
        if rank:
            L = wl * scale(generate_low_rank(p, rank, rng, symmetric=symmetric_low_rank))
        if edge_prob:
            S = generate_sparse_topology(p, edge_prob, rng)
        if n_hubs:
            hubs = rng.choice(part.K, size=n_hubs, replace=False)
            gflat = np.zeros(p * p)
            for k in hubs:
                idx = part.groups[k]
                gflat[idx] = rng.standard_normal(idx.size)
            G = unflatten(gflat, p)
            if edge_prob:
                S = np.where(G != 0, 0.0, S)
            G = wg * scale(G)
        if edge_prob:
            if not np.any(S):
                continue
            S = ws * scale(S)
        if rank and edge_prob:
            if np.count_nonzero(L) <= np.count_nonzero(S) or numerical_rank(S) <= rank:
                continue
        T = StructuredTransition(L, S, G, part)
        rho_now = spectral_radius(T.B)
        if rho_now == 0:
            continue
        return T.scaled(rho / rho_now)
    raise StructVARError(f"no non-degenerate draw in {max_attempts} attempts")


def simulate_var(transition, N, sigma_eps=1.0, burn_in=500, seed=None):
    """Simulate a Gaussian VAR(1) path and return its autoregressive design.

    The chain starts at zero and ``burn_in`` steps are discarded; the next
    ``N + 1`` states are kept.  Innovations are i.i.d. ``N(0, sigma_eps^2 I)``.

    ``E`` of the returned sample is recomputed as ``Y - X @ B`` so that the
    regression identity holds exactly; it differs from the drawn innovations
    only by rounding.

    Raises
    ------
    StabilityError
        If the spectral radius of ``B`` is not below one.
    """
    B = transition.B if isinstance(transition, StructuredTransition) else np.asarray(transition, float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ParameterError("transition matrix must be square")
    if N < 1 or burn_in < 0:
        raise ParameterError("need N >= 1 and burn_in >= 0")
    rho = spectral_radius(B)
    if rho >= 1:
        raise StabilityError(f"unstable transition matrix: spectral radius {rho:.6g} >= 1", rho)
    rng = _rng(seed)
    p = B.shape[0]
    steps = burn_in + N
    noise = sigma_eps * rng.standard_normal((steps, p))
    x = np.zeros(p)
    path = np.empty((N + 1, p))
    if burn_in == 0:
        path[0] = x
    for t in range(steps):
        x = x @ B + noise[t]
        k = t + 1 - burn_in
        if k >= 0:
            path[k] = x
    sample = VarSample(path, sigma_eps=sigma_eps)
    E = sample.Y - sample.X @ B
    return VarSample(path, E[::-1], sigma_eps)
