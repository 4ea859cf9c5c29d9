import numpy as np
import pytest

from structvar.exceptions import StabilityError
from structvar.model import StructuredTransition, make_transition
from structvar.stability import (
    diagnose,
    mu_max_bound,
    mu_extremes,
    spectral_density_extremes,
    spectral_radius,
    stabilize,
)


@pytest.mark.parametrize("seed", range(5))
def test_spectral_radius_matches_eigvals(seed):
    B = np.random.default_rng(seed).standard_normal((12, 12)) / 4
    assert spectral_radius(B) == pytest.approx(np.abs(np.linalg.eigvals(B)).max(), rel=1e-9)


def test_spectral_radius_defective():
    # Jordan block: eigenvalue 0.5 with multiplicity 3
    J = 0.5 * np.eye(3) + np.diag([1.0, 1.0], 1)
    assert spectral_radius(J) == pytest.approx(0.5, rel=1e-6)


def test_mu_extremes_scalar_closed_form():
    # calB = 1 - b e^{i theta}: |.|^2 ranges over [(1-b)^2, (1+b)^2]
    lo, hi = mu_extremes(np.array([[0.4]]), grid=64)
    assert lo == pytest.approx(0.36) and hi == pytest.approx(1.96)


def test_spectral_density_scalar():
    # f(theta) = sigma^2 / (2 pi |1 - b e^{i theta}|^2)
    d = spectral_density_extremes(np.array([[0.5]]), np.array([[2.0]]), grid=64)
    assert d["M_fx"] == pytest.approx(2.0 / (2 * np.pi * 0.25))
    assert d["m_fx"] == pytest.approx(2.0 / (2 * np.pi * 2.25))


def test_mu_max_bound_diagonal():
    T = StructuredTransition.from_components(S=0.3 * np.eye(4))
    # (1 + 0 + (0.3 + 0.3) / 2)^2 and mu_max = 1.3^2 exactly
    assert mu_max_bound(T) == pytest.approx(1.69)
    assert mu_extremes(T.B)[1] == pytest.approx(1.69)


def test_diagnose_report_fields():
    T = make_transition(10, rank=1, edge_prob=0.2, seed=0)
    rep = diagnose(T, grid=128)
    d = rep.to_dict()
    assert rep.stable and rep.rho == pytest.approx(0.7)
    assert d["theta_grid_size"] == 128
    assert rep.mu_max_bound >= rep.mu_max
    assert rep.zeta_lower == pytest.approx(1 / (2 * rep.mu_max))


def test_diagnose_unstable_matrix():
    rep = diagnose(1.2 * np.eye(3))
    assert not rep.stable
    assert rep.M_fx is None and rep.mu_max_bound is None


def test_density_requires_stability():
    with pytest.raises(StabilityError):
        spectral_density_extremes(np.eye(2))


def test_stabilize():
    B = 2 * np.eye(3)
    assert spectral_radius(stabilize(B, 0.9)) == pytest.approx(0.9)
    C = 0.1 * np.eye(3)
    np.testing.assert_array_equal(stabilize(C), C)
