"""Spectral diagnostics of a VAR(1) transition matrix.

The characteristic polynomial is ``calB(z) = I - B' z``.  The extreme
eigenvalues of ``calB(z)^H calB(z)`` over the unit circle (``mu_min`` and
``mu_max``) and of the spectral density ``f_X`` control how hard a process
is to estimate.  Suprema over the circle are approximated on a uniform grid.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .exceptions import ParameterError, StabilityError

DEFAULT_GRID = 512


def spectral_radius(B, rtol=1e-12, max_squarings=64):
    """Largest eigenvalue modulus of a square matrix.

    Uses the Gelfand formula ``rho(B) = lim ||B^n||^(1/n)`` along ``n = 2^k``.
    Each squaring is renormalised and the log-norm accumulated, so neither
    overflow nor underflow occurs.  The estimates decrease monotonically
    towards ``rho`` and the error roughly halves per squaring, so iteration
    stops once consecutive estimates agree to ``rtol``.
    """
    A = np.array(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {A.shape}")
    nrm = np.linalg.norm(A)
    if nrm == 0:
        return 0.0
    if not np.isfinite(nrm):
        raise ParameterError("matrix has non-finite entries")
    A /= nrm
    log_norm = math.log(nrm)
    estimate = nrm
    for k in range(1, max_squarings + 1):
        A = A @ A
        nrm = np.linalg.norm(A)
        if nrm == 0:
            return 0.0
        A /= nrm
        log_norm = 2.0 * log_norm + math.log(nrm)
        new = math.exp(log_norm / 2.0**k)
        if abs(estimate - new) <= rtol * new:
            return new
        estimate = new
    return estimate


def _theta_half_grid(grid):
    # calB(e^{-i theta}) is the conjugate of calB(e^{i theta}), so [0, pi] suffices
    if grid < 64:
        raise ParameterError(f"theta grid must have at least 64 points, got {grid}")
    return np.linspace(0.0, np.pi, grid // 2 + 1)


def _char_poly(B, theta):
    p = B.shape[0]
    z = np.exp(1j * theta)[:, None, None]
    return np.eye(p)[None] - B.T[None] * z


def mu_extremes(B, grid=DEFAULT_GRID):
    """``(mu_min, mu_max)`` of ``calB^H calB`` over the unit circle.

    The eigenvalues of ``calB^H calB`` are the squared singular values of
    ``calB``, evaluated on ``grid`` points of ``[-pi, pi]``.
    """
    B = np.asarray(B, dtype=float)
    sv = np.linalg.svd(_char_poly(B, _theta_half_grid(grid)), compute_uv=False)
    return float(sv[:, -1].min() ** 2), float(sv[:, 0].max() ** 2)


def mu_max_bound(transition):
    """Upper bound on ``mu_max`` from the structure of ``B = L + R``.

    ``[1 + l + (v_in + v_out) / 2]^2`` with ``l`` the spectral norm of ``L`` and
    ``v_in``, ``v_out`` the largest absolute column and row sums of ``R``.
    """
    L = np.asarray(transition.L, dtype=float)
    R = np.asarray(transition.S, dtype=float) + np.asarray(transition.G, dtype=float)
    l = np.linalg.norm(L, 2) if L.size else 0.0
    v_in = np.abs(R).sum(axis=0).max()
    v_out = np.abs(R).sum(axis=1).max()
    return float((1.0 + l + 0.5 * (v_in + v_out)) ** 2)


def spectral_density_extremes(B, Sigma_eps=None, grid=DEFAULT_GRID):
    """Grid extremes of the eigenvalues of the spectral density.

    ``f_X(theta) = calB^{-1} Sigma calB^{-H} / (2 pi)``.

    Returns
    -------
    dict
        ``m_fx`` and ``M_fx`` (the smallest and largest eigenvalue over the
        grid) plus ``m_fx_lower`` and ``M_fx_upper``, the closed-form bounds
        in terms of ``mu_max`` and ``mu_min``.
    """
    B = np.asarray(B, dtype=float)
    p = B.shape[0]
    Sigma = np.eye(p) if Sigma_eps is None else np.asarray(Sigma_eps, dtype=float)
    rho = spectral_radius(B)
    if rho >= 1:
        raise StabilityError(f"spectral density undefined: spectral radius {rho:.6g} >= 1", rho)
    root = np.linalg.cholesky(Sigma)
    calB = _char_poly(B, _theta_half_grid(grid))
    K = np.linalg.solve(calB, np.broadcast_to(root.astype(complex), calB.shape))
    sv = np.linalg.svd(K, compute_uv=False) ** 2 / (2 * np.pi)
    mu_min, mu_max = mu_extremes(B, grid)
    sig = np.linalg.eigvalsh(Sigma)
    return {
        "m_fx": float(sv[:, -1].min()),
        "M_fx": float(sv[:, 0].max()),
        "m_fx_lower": float(sig[0] / (2 * np.pi * mu_max)),
        "M_fx_upper": float(sig[-1] / (2 * np.pi * mu_min)),
    }


@dataclass(frozen=True)
class StabilityReport:
    rho: float
    stable: bool
    mu_max: float
    mu_min: float
    M_fx: Optional[float]
    m_fx: Optional[float]
    M_fx_upper: Optional[float]
    m_fx_lower: Optional[float]
    mu_max_bound: Optional[float]
    zeta_lower: float
    theta_grid_size: int

    def to_dict(self):
        return asdict(self)


def diagnose(transition, Sigma_eps=None, grid=DEFAULT_GRID):
    """Full :class:`StabilityReport` for a matrix or a structured transition.

    ``zeta_lower`` is ``Lambda_min(Sigma) / (2 mu_max)``, the curvature floor
    of the least-squares loss that holds with high probability.  Spectral
    density fields are ``None`` for unstable input; ``mu_max_bound`` is
    ``None`` when no components are available.
    """
    has_parts = hasattr(transition, "L")
    B = transition.B if has_parts else np.asarray(transition, dtype=float)
    p = B.shape[0]
    Sigma = np.eye(p) if Sigma_eps is None else np.asarray(Sigma_eps, dtype=float)
    rho = spectral_radius(B)
    mu_min, mu_max = mu_extremes(B, grid)
    dens = {"m_fx": None, "M_fx": None, "m_fx_lower": None, "M_fx_upper": None}
    if rho < 1:
        dens = spectral_density_extremes(B, Sigma, grid)
    return StabilityReport(
        rho=rho,
        stable=bool(rho < 1),
        mu_max=mu_max,
        mu_min=mu_min,
        mu_max_bound=mu_max_bound(transition) if has_parts else None,
        zeta_lower=float(np.linalg.eigvalsh(Sigma)[0] / (2 * mu_max)),
        theta_grid_size=int(grid),
        **dens,
    )


def stabilize(B, max_radius=0.99):
    """Shrink ``B`` uniformly when its spectral radius exceeds ``max_radius``.

    A post-processing aid for forecasting with a fitted model; matrices that
    are already inside the radius are returned unchanged.
    """
    B = np.asarray(B, dtype=float)
    rho = spectral_radius(B)
    if rho <= max_radius:
        return B.copy()
    return B * (max_radius / rho)
