"""Proximal operators, constraint projections and the SVD kernel.

Every operator here solves its defining problem in closed form:

* ``soft_threshold``:        argmin 1/2 ||B - M||_F^2 + t ||B||_1
* ``group_soft_threshold``:  argmin 1/2 ||B - M||_F^2 + t sum_k ||B_{G_k}||_2
* ``svt``:                   argmin 1/2 ||B - M||_F^2 + t ||B||_*
* ``project_box``:           nearest point with ||B||_max <= bound
* ``project_group_box``:     nearest point with max_k ||B_{G_k}||_2 <= bound
"""

from __future__ import annotations

import numpy as np

from .exceptions import NumericalError, ParameterError
from .model import flatten, unflatten

RANK_RTOL = 1e-10


def _check_threshold(t):
    if t < 0:
        raise ParameterError(f"threshold must be nonnegative, got {t}")


def soft_threshold(M, t):
    _check_threshold(t)
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - t, 0.0)


def _group_scale(M, partition, factor_fn):
    partition.check(M)
    norms = partition.group_norms(M)
    scale = factor_fn(norms)
    return unflatten(flatten(M) * scale[partition.labels], partition.p)


def group_soft_threshold(M, partition, t):
    """Block shrinkage: every group is scaled by ``max(0, 1 - t / ||group||)``."""
    _check_threshold(t)
    M = np.asarray(M, dtype=float)

    def factor(norms):
        with np.errstate(divide="ignore", invalid="ignore"):
            f = 1.0 - t / norms
        return np.where(norms > t, f, 0.0)

    return _group_scale(M, partition, factor)


def project_box(M, bound):
    if bound < 0:
        raise ParameterError(f"bound must be nonnegative, got {bound}")
    return np.clip(np.asarray(M, dtype=float), -bound, bound)


def project_group_box(M, partition, bound):
    """Rescale every group whose norm exceeds ``bound`` back onto the sphere."""
    if bound < 0:
        raise ParameterError(f"bound must be nonnegative, got {bound}")
    M = np.asarray(M, dtype=float)

    def factor(norms):
        with np.errstate(divide="ignore", invalid="ignore"):
            f = bound / norms
        return np.where(norms > bound, f, 1.0)

    return _group_scale(M, partition, factor)


# -- SVD ---------------------------------------------------------------------


def _complete_basis(U, k):
    """Fill columns ``k:`` of ``U`` with an orthonormal complement."""
    m, n = U.shape
    if k >= n:
        return U
    Q, _ = np.linalg.qr(np.hstack([U[:, :k], np.eye(m)]))
    # drop the span of the first k columns, keep what is left
    U[:, k:] = Q[:, k:n]
    return U


def jacobi_svd(M, tol=1e-15, max_sweeps=60):
    """One-sided (Hestenes) Jacobi SVD.

    Columns of a working copy are orthogonalised by plane rotations, which
    are accumulated into ``V``; the final column norms are the singular values.
    Accurate to a few ulps relative to ``||M||`` but quadratic per sweep, so
    intended for small matrices and cross-checks.
    """
    A = np.array(M, dtype=float)
    transposed = A.shape[0] < A.shape[1]
    if transposed:
        A = A.T.copy()
    m, n = A.shape
    V = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                ai, aj = A[:, i], A[:, j]
                alpha = ai @ ai
                beta = aj @ aj
                gamma = ai @ aj
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                A[:, [i, j]] = A[:, [i, j]] @ np.array([[c, s], [-s, c]])
                V[:, [i, j]] = V[:, [i, j]] @ np.array([[c, s], [-s, c]])
        if not rotated:
            break
    sv = np.linalg.norm(A, axis=0)
    order = np.argsort(sv)[::-1]
    sv, A, V = sv[order], A[:, order], V[:, order]
    U = np.zeros((m, n))
    k = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    U[:, :k] = A[:, :k] / sv[:k]
    U = _complete_basis(U, k)
    if transposed:
        return V, sv, U
    return U, sv, V


def svd(M, method="lapack"):
    """Thin SVD ``M = U @ diag(s) @ V.T`` with nonincreasing ``s``.

    ``method="lapack"`` calls the divide-and-conquer LAPACK driver;
    ``method="jacobi"`` uses :func:`jacobi_svd`.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NumericalError("SVD input contains non-finite entries")
    if method == "lapack":
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        return U, s, Vt.T
    if method == "jacobi":
        return jacobi_svd(M)
    raise ParameterError(f"unknown SVD method {method!r}")


def svt(M, t, method="lapack", return_values=False):
    """Singular value thresholding.

    Returns
    -------
    B : ndarray
        ``U diag(max(s - t, 0)) V'``.
    rank : int
        Number of singular values that survive the threshold.
    values : ndarray
        The surviving (shrunk) singular values; only with ``return_values``.
    """
    _check_threshold(t)
    U, s, V = svd(M, method)
    shrunk = np.maximum(s - t, 0.0)
    keep = shrunk > RANK_RTOL * s[0] if s.size and s[0] > 0 else np.zeros(0, bool)
    k = int(np.count_nonzero(keep))
    out = (U[:, :k] * shrunk[:k]) @ V[:, :k].T
    if return_values:
        return out, k, shrunk[:k]
    return out, k


def dykstra_prox(prox, project, M, tol=1e-10, max_iter=500):
    """Prox of ``f + indicator(C)`` from the prox of ``f`` and the projection on ``C``.

    Dykstra-type alternation (Bauschke and Combettes); exact in the limit.
    Returns ``(B, n_iter)``.  When the prox output already lies in ``C``
    it is returned after one step, which is then exact.
    """
    x = np.asarray(M, dtype=float)
    pz = np.zeros_like(x)
    qz = np.zeros_like(x)
    for k in range(1, max_iter + 1):
        y = prox(x + pz)
        pz = x + pz - y
        x_new = project(y + qz)
        qz = y + qz - x_new
        if k == 1 and np.array_equal(x_new, y):
            return x_new, k
        change = np.linalg.norm(x_new - x)
        x = x_new
        if change <= tol * max(np.linalg.norm(x), 1.0):
            return x, k
    return x, max_iter


# -- norms -------------------------------------------------------------------


def l1_norm(M):
    return float(np.abs(M).sum())


def max_norm(M):
    return float(np.abs(M).max()) if np.size(M) else 0.0


def nuclear_norm(M):
    return float(np.linalg.svd(np.asarray(M, float), compute_uv=False).sum())


def group_l21_norm(M, partition):
    return float(partition.group_norms(M).sum())


def group_max_norm(M, partition):
    return float(partition.group_norms(M).max())
