import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from structvar.exceptions import NumericalError, ParameterError
from structvar.model import GroupPartition
from structvar.prox import (
    dykstra_prox,
    group_l21_norm,
    group_soft_threshold,
    jacobi_svd,
    nuclear_norm,
    project_box,
    project_group_box,
    soft_threshold,
    svd,
    svt,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
square = st.integers(1, 6).flatmap(lambda n: arrays(np.float64, (n, n), elements=finite))


def test_soft_threshold_values():
    np.testing.assert_array_equal(soft_threshold([[3.0, -0.5], [-2.0, 1.0]], 1.0),
                                  [[2.0, 0.0], [-1.0, 0.0]])


def test_negative_threshold_rejected():
    with pytest.raises(ParameterError):
        soft_threshold(np.eye(2), -1)
    with pytest.raises(ParameterError):
        svt(np.eye(2), -1)


def test_group_soft_threshold_columns():
    M = np.array([[3.0, 0.1], [4.0, 0.1]])
    out = group_soft_threshold(M, GroupPartition.columns(2), 1.0)
    np.testing.assert_allclose(out[:, 0], [3 * 0.8, 4 * 0.8])
    np.testing.assert_array_equal(out[:, 1], 0.0)


def test_svt_known_diagonal():
    out, k, vals = svt(np.diag([5.0, 2.0, 0.5]), 1.0, return_values=True)
    np.testing.assert_allclose(out, np.diag([4.0, 1.0, 0.0]), atol=1e-14)
    assert k == 2
    np.testing.assert_allclose(vals, [4.0, 1.0])


def test_svt_zero_matrix():
    out, k = svt(np.zeros((3, 3)), 0.5)
    assert k == 0 and not out.any()


def test_svd_rejects_nonfinite():
    with pytest.raises(NumericalError):
        svd(np.array([[np.inf, 0.0], [0.0, 1.0]]))
    with pytest.raises(ParameterError):
        svd(np.eye(2), method="qr")


@pytest.mark.parametrize("shape", [(5, 5), (7, 4), (4, 7), (1, 1)])
def test_jacobi_matches_lapack(shape):
    M = np.random.default_rng(0).standard_normal(shape)
    U, s, V = jacobi_svd(M)
    np.testing.assert_allclose(s, np.linalg.svd(M, compute_uv=False), atol=1e-12)
    np.testing.assert_allclose(U @ np.diag(s) @ V.T, M, atol=1e-12)
    np.testing.assert_allclose(U.T @ U, np.eye(U.shape[1]), atol=1e-12)


def test_jacobi_rank_deficient():
    M = np.outer([1.0, 2.0, 3.0], [1.0, 0.0, -1.0])
    U, s, V = jacobi_svd(M)
    np.testing.assert_allclose(U @ np.diag(s) @ V.T, M, atol=1e-12)
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-12)


def test_projections():
    M = np.array([[2.0, -3.0], [0.5, 0.0]])
    np.testing.assert_array_equal(project_box(M, 1.0), [[1.0, -1.0], [0.5, 0.0]])
    out = project_group_box(M, GroupPartition.columns(2), 1.0)
    np.testing.assert_allclose(np.linalg.norm(out, axis=0), [1.0, 1.0])
    with pytest.raises(ParameterError):
        project_box(M, -1)


def test_dykstra_exact_when_prox_feasible():
    prox = lambda Z: soft_threshold(Z, 0.1)
    proj = lambda Z: project_box(Z, 10.0)
    M = np.eye(2)
    out, k = dykstra_prox(prox, proj, M)
    assert k == 1
    np.testing.assert_array_equal(out, prox(M))


def test_dykstra_l1_box_closed_form():
    # the prox of t|x| + indicator(|x| <= c) is clip(soft(x, t), -c, c) (separable)
    M = np.array([[3.0, -0.2], [1.5, -4.0]])
    out, _ = dykstra_prox(lambda Z: soft_threshold(Z, 0.5), lambda Z: project_box(Z, 1.0), M)
    np.testing.assert_allclose(out, np.clip(soft_threshold(M, 0.5), -1, 1), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(square, st.floats(0, 5))
def test_svt_is_prox_of_nuclear_norm(M, t):
    """The prox output beats random perturbations on the prox objective."""
    out, _ = svt(M, t)
    f = lambda Z: 0.5 * np.sum((Z - M) ** 2) + t * nuclear_norm(Z)
    rng = np.random.default_rng(0)
    base = f(out)
    for _ in range(5):
        assert base <= f(out + 1e-3 * rng.standard_normal(M.shape)) + 1e-9


@settings(max_examples=60, deadline=None)
@given(square, st.floats(0, 5))
def test_soft_threshold_nonexpansive(M, t):
    N = M[::-1].copy()
    a, b = soft_threshold(M, t), soft_threshold(N, t)
    assert np.linalg.norm(a - b) <= np.linalg.norm(M - N) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 999), st.floats(0, 3))
def test_group_shrinkage_reduces_norm(p, seed, t):
    rng = np.random.default_rng(seed)
    part = GroupPartition.from_labels(p, rng.integers(0, p, size=p * p))
    M = rng.standard_normal((p, p))
    out = group_soft_threshold(M, part, t)
    before, after = part.group_norms(M), part.group_norms(out)
    np.testing.assert_allclose(after, np.maximum(before - t, 0.0), atol=1e-12)
    assert group_l21_norm(out, part) <= group_l21_norm(M, part) + 1e-12
