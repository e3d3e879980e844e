import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrsd import oracles
from vrsd.data_io import normalize_rows, synth_regression
from vrsd.estimators import (
    SagaTable,
    SvrgSnapshot,
    saga_estimate_and_update,
    svrg_estimate,
    svrg_estimate_minibatch,
)
from vrsd.problem import Problem, full_grad


def problem(n=30, d=5, seed=0, smooth_l2=0.0):
    ds, _ = synth_regression(n, d, sparsity=0.6, noise_sd=0.1, seed=seed)
    return Problem.ridge(normalize_rows(ds), smooth_l2) if smooth_l2 else Problem.lasso(normalize_rows(ds), 0.01)


@pytest.fixture(params=[0.0, 0.2], ids=["plain", "smooth_l2"])
def p(request):
    return problem(smooth_l2=request.param)


def test_snapshot_holds_full_gradient(p):
    xt = np.linspace(-1, 1, p.d)
    snap = SvrgSnapshot(p, xt)
    np.testing.assert_allclose(snap.mu_tilde, full_grad(p, xt), rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        snap.x_tilde[0] = 3.0


def test_svrg_at_snapshot_returns_mu(p):
    xt = np.ones(p.d)
    snap = SvrgSnapshot(p, xt)
    est, resid = svrg_estimate(snap, p, 4, xt)
    np.testing.assert_array_equal(est, snap.mu_tilde)
    np.testing.assert_array_equal(resid, np.zeros(p.d))


def test_svrg_residual_identity(p):
    rng = np.random.default_rng(1)
    snap = SvrgSnapshot(p, rng.standard_normal(p.d))
    x = rng.standard_normal(p.d)
    for i in range(p.n):
        est, resid = svrg_estimate(snap, p, i, x)
        # est is formed as resid + mu, so subtracting mu back is exact up to one rounding
        np.testing.assert_allclose(est - snap.mu_tilde, resid, rtol=0, atol=1e-15)


def test_svrg_unbiased(p):
    rng = np.random.default_rng(2)
    snap = SvrgSnapshot(p, rng.standard_normal(p.d))
    x = rng.standard_normal(p.d)
    mean = oracles.enumerated_mean(lambda i: svrg_estimate(snap, p, i, x)[0], p.n)
    np.testing.assert_allclose(mean, full_grad(p, x), rtol=0, atol=1e-12)


def test_svrg_index_error(p):
    snap = SvrgSnapshot(p, np.zeros(p.d))
    with pytest.raises(IndexError):
        svrg_estimate(snap, p, p.n, np.zeros(p.d))


def test_minibatch_cases(p):
    rng = np.random.default_rng(3)
    snap = SvrgSnapshot(p, rng.standard_normal(p.d))
    x = rng.standard_normal(p.d)
    np.testing.assert_allclose(svrg_estimate_minibatch(snap, p, [7], x), svrg_estimate(snap, p, 7, x)[0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(svrg_estimate_minibatch(snap, p, range(p.n), x), full_grad(p, x), rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        svrg_estimate_minibatch(snap, p, [], x)


def test_minibatch_pairs_unbiased():
    p = problem(n=6, d=3, seed=4, smooth_l2=0.1)
    rng = np.random.default_rng(4)
    snap = SvrgSnapshot(p, rng.standard_normal(p.d))
    x = rng.standard_normal(p.d)
    mean = oracles.enumerated_subset_mean(lambda I: svrg_estimate_minibatch(snap, p, I, x), p.n, 2)
    np.testing.assert_allclose(mean, full_grad(p, x), rtol=0, atol=1e-12)


def test_variance_bound_on_solved_ridge():
    p = problem(n=40, d=6, seed=5, smooth_l2=1e-2)
    _, F_star = oracles.ridge_solution(p)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x, xt = rng.standard_normal(p.d), rng.standard_normal(p.d)
        lhs = oracles.svrg_variance(p, x, xt)
        rhs = 4 * p.L * (oracles.dense_objective(p, x) - F_star + oracles.dense_objective(p, xt) - F_star)
        assert lhs <= rhs * (1 + 1e-9)


def test_saga_fresh_table_at_same_point(p):
    x = np.linspace(0, 1, p.d)
    table = SagaTable(p, x)
    np.testing.assert_allclose(table.avg, full_grad(p, x), rtol=0, atol=1e-12)
    est, resid = table.estimate(3, x)
    np.testing.assert_allclose(est, full_grad(p, x), rtol=0, atol=1e-12)
    np.testing.assert_allclose(resid, 0.0, atol=1e-15)


def test_saga_full_refresh_matches_full_grad(p):
    table = SagaTable(p, np.zeros(p.d))
    x = np.arange(p.d, dtype=float)
    for i in range(p.n):
        saga_estimate_and_update(table, p, i, x)
    np.testing.assert_allclose(table.avg, full_grad(p, x), rtol=0, atol=1e-12)


def test_saga_estimate_uses_pre_update_table(p):
    rng = np.random.default_rng(6)
    table = SagaTable(p, rng.standard_normal(p.d))
    x = rng.standard_normal(p.d)
    avg_before = table.avg.copy()
    old = table.stored_grad(5)
    est, resid = saga_estimate_and_update(table, p, 5, x)
    np.testing.assert_allclose(resid, oracles.dense_component_grad(p, 5, x) - old, rtol=0, atol=1e-14)
    np.testing.assert_allclose(est, resid + avg_before, rtol=0, atol=1e-14)
    np.testing.assert_allclose(table.stored_grad(5), oracles.dense_component_grad(p, 5, x), rtol=0, atol=1e-14)


def test_saga_conditional_unbiasedness():
    p = problem(n=25, d=4, seed=7, smooth_l2=0.3)
    rng = np.random.default_rng(7)
    table = SagaTable(p, rng.standard_normal(p.d))
    for _ in range(40):
        table.update(int(rng.integers(p.n)), rng.standard_normal(p.d))
    x = rng.standard_normal(p.d)
    mean = oracles.enumerated_mean(lambda i: table.estimate(i, x)[0], p.n)
    np.testing.assert_allclose(mean, full_grad(p, x), rtol=0, atol=1e-12)


def test_saga_rejects_foreign_problem(p):
    other = problem(seed=99)
    table = SagaTable(p, np.zeros(p.d))
    with pytest.raises(ValueError):
        saga_estimate_and_update(table, other, 0, np.zeros(p.d))


def test_saga_storage_choice():
    assert SagaTable(problem(), np.zeros(5)).phi is None
    assert SagaTable(problem(smooth_l2=0.1), np.zeros(5)).phi.shape == (30, 5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_saga_average_drift(seed, smooth):
    p = problem(n=12, d=4, seed=seed % 1000, smooth_l2=0.2 if smooth else 0.0)
    rng = np.random.default_rng(seed)
    table = SagaTable(p, rng.standard_normal(p.d))
    for _ in range(10 * p.n):
        saga_estimate_and_update(table, p, int(rng.integers(p.n)), rng.standard_normal(p.d) * 10)
        assert np.abs(table.avg - table.recomputed_mean()).max() <= 1e-9
