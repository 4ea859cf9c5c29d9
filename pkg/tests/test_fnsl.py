import math
from dataclasses import replace

import numpy as np
import pytest

from structvar.exceptions import ParameterError
from structvar.fnsl import (
    Block,
    Design,
    SolverConfig,
    bb_stepsize,
    default_beta,
    fnsl_solve,
    power_norm,
    solve_alpha,
)
from structvar.model import GroupPartition, make_transition, simulate_var
from structvar.prox import group_soft_threshold, soft_threshold, svt
from structvar.reference import fista_solve, ista_solve
from structvar.tuning import penalty_ceiling


def _orthonormal_design(p, N, seed):
    rng = np.random.default_rng(seed)
    X, _ = np.linalg.qr(rng.standard_normal((N, p)))
    Y = rng.standard_normal((N, p))
    return Design(X, Y)


class TestOrthogonalDesign:
    """With X'X = I the penalised problem is a single prox of X'Y."""

    def test_lasso(self):
        d = _orthonormal_design(6, 40, 0)
        B, tr = fnsl_solve(d, SolverConfig(penalty="l1", lam=0.3))
        np.testing.assert_allclose(B, soft_threshold(d.xty, 0.3), atol=1e-7)
        assert tr.converged

    def test_group(self):
        d = _orthonormal_design(5, 30, 1)
        part = GroupPartition.rows(5)
        B, _ = fnsl_solve(d, SolverConfig(penalty="group", lam=0.5, partition=part))
        np.testing.assert_allclose(B, group_soft_threshold(d.xty, part, 0.5), atol=1e-7)

    def test_nuclear(self):
        d = _orthonormal_design(6, 40, 2)
        B, tr = fnsl_solve(d, SolverConfig(penalty="nuclear", lam=0.8))
        ref, k = svt(d.xty, 0.8)
        np.testing.assert_allclose(B, ref, atol=1e-7)
        assert tr.ranks["nuclear"] == k


def test_lasso_kkt(sparse_problem):
    _, s = sparse_problem
    d = Design.from_sample(s)
    lam = 0.2 * penalty_ceiling(d, "l1")
    B, _ = fnsl_solve(s, SolverConfig(penalty="l1", lam=lam, tol=1e-12))
    grad = d.gram @ B - d.xty
    nz = B != 0
    assert np.abs(grad[nz] + lam * np.sign(B[nz])).max() < 1e-4 * lam
    assert np.abs(grad[~nz]).max() <= lam * (1 + 1e-4)


def test_zero_penalty_is_ols(sparse_problem):
    _, s = sparse_problem
    B, _ = fnsl_solve(s, SolverConfig(penalty="l1", lam=0.0, tol=1e-13, max_iter=20000))
    ols = np.linalg.lstsq(s.X, s.Y, rcond=None)[0]
    assert np.linalg.norm(B - ols) / np.linalg.norm(ols) < 1e-5


@pytest.mark.parametrize("kind", ["l1", "group", "nuclear"])
def test_penalty_ceiling_gives_zero(sparse_problem, kind):
    _, s = sparse_problem
    d = Design.from_sample(s)
    part = GroupPartition.columns(d.p) if kind == "group" else None
    lam = penalty_ceiling(d, kind, part)
    B, _ = fnsl_solve(s, SolverConfig(penalty=kind, lam=lam * 1.0001, partition=part))
    assert not B.any()
    B, _ = fnsl_solve(s, SolverConfig(penalty=kind, lam=lam * 0.9, partition=part))
    assert B.any()


def test_matches_fista_and_ista(ls_problem):
    _, s = ls_problem
    d = Design.from_sample(s)
    lam = 0.15 * penalty_ceiling(d, "nuclear")
    _, tr = fnsl_solve(s, SolverConfig(penalty="nuclear", lam=lam))
    fi = fista_solve(Design.from_sample(s), [Block("nuclear", lam)])
    ist = ista_solve(Design.from_sample(s), [Block("nuclear", lam)], tol=1e-14)
    assert tr.estimate_objective == pytest.approx(ist.estimate_objective, rel=1e-7)
    assert fi.estimate_objective == pytest.approx(ist.estimate_objective, rel=1e-6)


def test_estimate_never_worse_than_final_points(sparse_problem):
    _, s = sparse_problem
    d = Design.from_sample(s)
    cfg = SolverConfig(penalty="l1", lam=0.1 * penalty_ceiling(d, "l1"), max_iter=15, tol=0.0)
    _, tr = fnsl_solve(s, cfg)
    assert tr.n_iter == 15 and not tr.converged
    assert tr.estimate_objective <= min(tr.objective[-1], tr.iterate_objective[-1]) + 1e-9


def test_warm_start_from_solution_is_quick(sparse_problem):
    _, s = sparse_problem
    d = Design.from_sample(s)
    cfg = SolverConfig(penalty="l1", lam=0.1 * penalty_ceiling(d, "l1"))
    B, cold = fnsl_solve(s, cfg)
    _, warm = fnsl_solve(s, cfg, init=B)
    assert warm.n_iter < cold.n_iter
    assert warm.estimate_objective == pytest.approx(cold.estimate_objective, rel=1e-8)


class TestTrace:
    def test_ax_counts_are_per_solve(self, sparse_problem):
        _, s = sparse_problem
        d = Design.from_sample(s)
        cfg = SolverConfig(penalty="l1", lam=0.1 * penalty_ceiling(d, "l1"))
        _, t1 = fnsl_solve(d, cfg)
        _, t2 = fnsl_solve(d, cfg)
        assert t1.total_ax == t2.total_ax > 0
        assert t1.total_ax % 2 == 0
        assert all(a < b for a, b in zip(t1.ax_count, t1.ax_count[1:]))

    def test_lengths_and_csv(self, sparse_problem, tmp_path):
        _, s = sparse_problem
        _, tr = fnsl_solve(s, SolverConfig(penalty="l1", lam=1.0))
        n = tr.n_iter
        for name in ("objective", "iterate_objective", "eta", "alpha", "Q", "line_searches",
                     "ax_count"):
            assert len(getattr(tr, name)) == n
        path = tmp_path / "trace.csv"
        tr.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("iteration,objective") and len(lines) == n + 1

    def test_alpha_starts_at_one_and_stays_in_unit_interval(self, sparse_problem):
        _, s = sparse_problem
        _, tr = fnsl_solve(s, SolverConfig(penalty="l1", lam=1.0))
        assert tr.alpha[0] == 1.0
        assert all(0 < a <= 1 for a in tr.alpha)


class TestHelpers:
    def test_default_beta(self):
        assert default_beta(1) == 0.0
        assert default_beta(2) == 0.25
        assert default_beta(10) == pytest.approx(0.1)

    @pytest.mark.parametrize("a, e, e0", [(1.0, 5.0, 5.0), (0.3, 2.0, 100.0), (0.01, 1e3, 1e-3)])
    def test_solve_alpha_root(self, a, e, e0):
        x = solve_alpha(a, e, e0)
        d = a * e
        assert 0 < x <= 1
        assert e0 * x * x + d * x - d == pytest.approx(0.0, abs=1e-12 * max(d, e0))

    def test_solve_alpha_rejects(self):
        with pytest.raises(ParameterError):
            solve_alpha(0.0, 1.0, 1.0)

    def test_bb_stepsize(self):
        X = np.diag([2.0, 1.0])
        D = np.array([[1.0, 0.0], [0.0, 0.0]])
        assert bb_stepsize(D, np.zeros((2, 2)), X, 0.1) == pytest.approx(4.0)
        assert bb_stepsize(np.zeros((2, 2)), np.zeros((2, 2)), X, 0.1) == 0.1
        assert bb_stepsize(D, np.zeros((2, 2)), 0.01 * X, 0.1) == 0.1

    def test_power_norm(self):
        A = np.random.default_rng(0).standard_normal((20, 20))
        A = A @ A.T
        assert power_norm(A) == pytest.approx(np.linalg.eigvalsh(A)[-1], rel=1e-5)
        assert power_norm(np.zeros((3, 3))) == 0.0

    def test_design_loss(self):
        rng = np.random.default_rng(1)
        X, Y, B = rng.standard_normal((9, 3)), rng.standard_normal((9, 3)), rng.standard_normal((3, 3))
        d = Design(X, Y)
        assert d.loss(B) == pytest.approx(0.5 * np.sum((Y - X @ B) ** 2))
        with pytest.raises(ParameterError):
            Design(X, Y[:, :2])


@pytest.mark.parametrize("kw", [dict(penalty="l2"), dict(lam=-1.0), dict(penalty="group"),
                                dict(sigma=1.0), dict(C=-1.0), dict(eta_min=0.0),
                                dict(max_iter=0), dict(curvature="x"), dict(restart="x")])
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        SolverConfig(**kw)


def test_summed_curvature_and_no_restart_still_converge(ls_problem):
    _, s = ls_problem
    d = Design.from_sample(s)
    base = SolverConfig(penalty="l1", lam=0.1 * penalty_ceiling(d, "l1"))
    _, ref = fnsl_solve(s, base)
    for kw in (dict(curvature="summed"), dict(restart="never"), dict(restart="always")):
        _, tr = fnsl_solve(s, replace(base, **kw))
        assert tr.estimate_objective == pytest.approx(ref.estimate_objective, rel=1e-7)


def test_fista_and_ista_account_products():
    T = make_transition(10, edge_prob=0.2, seed=0)
    d = Design.from_sample(simulate_var(T, 60, seed=1))
    tr = ista_solve(d, [Block("l1", 1.0)], max_iter=50, tol=0.0)
    assert tr.n_iter == 50 and tr.total_ax == 2 * 51
    tr = fista_solve(d, [Block("l1", 1.0)], max_iter=20, tol=0.0)
    assert tr.total_ax % 2 == 0 and tr.total_ax >= 2 * 20
    assert math.isfinite(tr.estimate_objective)
