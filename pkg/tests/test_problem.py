import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrsd import oracles
from vrsd.data_io import Dataset, normalize_rows, synth_regression
from vrsd.problem import (
    ZETA_EPS,
    Problem,
    Regularizer,
    component_grad,
    component_value,
    full_grad,
    make_step_plan,
    objective,
    prox,
    soft_threshold,
)


def small(n=20, d=5, seed=0, normalize=True):
    ds, _ = synth_regression(n, d, sparsity=0.7, noise_sd=0.1, seed=seed)
    return normalize_rows(ds) if normalize else ds


def test_objective_at_zero_is_half_mean_b_squared():
    ds = small()
    p = Problem.ridge(ds, 0.1, in_smooth=False)
    assert objective(p, np.zeros(p.d)) == pytest.approx((ds.labels**2).sum() / (2 * p.n), rel=1e-14)


def test_objective_exact_fit_plus_l1():
    ds = Dataset.from_dense([[1.0, 0.0]], [1.0])
    p = Problem.lasso(ds, 0.5)
    assert objective(p, np.array([1.0, 0.0])) == 0.5


def test_objective_matches_dense_oracle():
    ds = small(seed=3)
    for p in (Problem.ridge(ds, 0.1), Problem.lasso(ds, 0.05), Problem.elastic_net(ds, 0.1, 0.05), Problem(ds, Regularizer(0.2, 0.1), 0.3)):
        x = np.random.default_rng(1).standard_normal(p.d)
        assert objective(p, x) == pytest.approx(oracles.dense_objective(p, x), rel=1e-13)


def test_ridge_minimizer_is_local_min():
    p = Problem.ridge(small(20, 5), 1e-2)
    x_star, _ = oracles.ridge_solution(p)
    f_star = objective(p, x_star)
    for j in range(p.d):
        for eps in (1e-4, -1e-4):
            e = np.zeros(p.d)
            e[j] = eps
            assert f_star <= objective(p, x_star + e)


def test_objective_dimension_mismatch():
    p = Problem.ridge(small(), 0.1)
    with pytest.raises(ValueError):
        objective(p, np.zeros(p.d + 1))
    with pytest.raises(ValueError):
        full_grad(p, np.zeros(p.d - 1))


def test_component_grad_at_zero():
    ds = small()
    p = Problem(ds)
    for i in range(p.n):
        g = component_grad(p, i, np.zeros(p.d))
        np.testing.assert_array_equal(g, -ds.labels[i] * ds.to_dense()[i])


def test_component_grad_support_and_index_errors():
    ds = small(seed=5)
    p = Problem.lasso(ds, 0.1)
    x = np.ones(p.d)
    idx, _ = ds.row(2)
    g = component_grad(p, 2, x)
    mask = np.ones(p.d, bool)
    mask[idx] = False
    assert np.all(g[mask] == 0)
    with pytest.raises(IndexError):
        component_grad(p, p.n, x)
    with pytest.raises(IndexError):
        component_grad(p, -1, x)


def test_mean_component_grad_equals_full_grad():
    ds = small(50, 6, seed=2)
    p = Problem.ridge(ds, 0.3)
    x = np.random.default_rng(0).standard_normal(p.d)
    mean = oracles.enumerated_mean(lambda i: component_grad(p, i, x), p.n)
    np.testing.assert_allclose(mean, full_grad(p, x), rtol=0, atol=1e-12)
    np.testing.assert_allclose(full_grad(p, x), oracles.dense_full_grad(p, x), rtol=0, atol=1e-12)


def test_component_grad_finite_differences():
    p = Problem.ridge(small(15, 4, seed=8), 0.2)
    rng = np.random.default_rng(3)
    for i in range(0, p.n, 3):
        x = rng.standard_normal(p.d)
        assert np.abs(component_grad(p, i, x) - oracles.fd_component_grad(p, i, x)).max() <= 1e-6


def test_component_value_average_is_smooth_part():
    p = Problem.ridge(small(seed=4), 0.1)
    x = np.arange(p.d, dtype=float)
    avg = np.mean([component_value(p, i, x) for i in range(p.n)])
    assert avg == pytest.approx(objective(p, x), rel=1e-13)


def test_lipschitz_constant():
    ds = small()
    assert Problem(ds).L == pytest.approx(1.0, abs=1e-12)
    assert Problem.ridge(ds, 0.5).L == pytest.approx(1.5, abs=1e-12)
    raw = small(normalize=False)
    assert Problem(raw).L == pytest.approx(raw.row_norm_sq.max())


def test_prox_examples():
    np.testing.assert_array_equal(prox(Regularizer.lasso(0.5), 1.0, np.array([1.0, -0.3, 0.0])), [0.5, 0.0, 0.0])
    np.testing.assert_array_equal(prox(Regularizer.ridge(1.0), 1.0, np.array([2.0])), [1.0])
    y = np.array([1.0, -2.0])
    np.testing.assert_array_equal(prox(Regularizer.none(), 0.3, y), y)
    np.testing.assert_allclose(prox(Regularizer(l2=1.0, l1=0.5), 1.0, np.array([2.0, -0.2])), [0.75, 0.0])


def test_prox_rejects_bad_step():
    with pytest.raises(ValueError):
        prox(Regularizer.lasso(0.1), 0.0, np.ones(2))


def test_soft_threshold_examples():
    assert soft_threshold(0.5, 1.0) == 0.5
    assert soft_threshold(1.0, -0.3) == 0.0
    for z in (-2.0, 0.0, 3.5):
        assert soft_threshold(0.0, z) == z
    with pytest.raises(ValueError):
        soft_threshold(-0.1, 1.0)


def test_elastic_net_degenerates():
    ds = small(seed=6)
    x = np.random.default_rng(2).standard_normal(ds.d)
    assert objective(Problem(ds, Regularizer.elastic_net(0.3, 0.0)), x) == objective(Problem(ds, Regularizer.ridge(0.3)), x)
    assert objective(Problem(ds, Regularizer.elastic_net(0.0, 0.2)), x) == objective(Problem(ds, Regularizer.lasso(0.2)), x)


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        Regularizer(l2=-1.0)
    with pytest.raises(ValueError):
        Problem(small(), smooth_l2=-0.1)


def test_step_plan_examples():
    plan = make_step_plan(1.0, 2.0, delta=0.1)
    assert plan.eta == 0.5 and plan.zeta == pytest.approx(0.1)
    assert make_step_plan(1.0, 19.0).eta == pytest.approx(1 / 19)
    plan = make_step_plan(1.0, 1.0)
    assert plan.eta == 1.0 and plan.zeta == pytest.approx(0.1 / ZETA_EPS)
    assert plan.sigma == 0.5 and plan.delta == 0.1


@pytest.mark.parametrize("L, alpha", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0)])
def test_step_plan_rejects(L, alpha):
    with pytest.raises(ValueError):
        make_step_plan(L, alpha)


PROBLEMS = [
    Problem.ridge(small(25, 5, seed=11), 0.05),
    Problem.lasso(small(25, 5, seed=12), 0.05),
    Problem.elastic_net(small(25, 5, seed=13), 0.05, 0.02),
]
vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=5, max_size=5).map(np.array)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(PROBLEMS), vec, vec, st.floats(0, 1))
def test_convexity_probe(p, x, y, t):
    lhs = objective(p, t * x + (1 - t) * y)
    assert lhs <= t * objective(p, x) + (1 - t) * objective(p, y) + 1e-9 * max(1.0, abs(lhs))


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(PROBLEMS), st.integers(0, 24), vec, vec)
def test_smoothness_probe(p, i, x, y):
    lhs = np.linalg.norm(component_grad(p, i, x) - component_grad(p, i, y))
    bound = (p.data.row_norm_sq[i] + p.smooth_l2) * np.linalg.norm(x - y)
    assert lhs <= bound * (1 + 1e-9) + 1e-12


regs = st.builds(Regularizer, l2=st.floats(0, 5), l1=st.floats(0, 5))
vec3 = st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=3).map(np.array)


@settings(max_examples=150, deadline=None)
@given(regs, st.floats(1e-3, 10), vec3, vec3)
def test_prox_nonexpansive(reg, eta, y1, y2):
    d = np.linalg.norm(prox(reg, eta, y1) - prox(reg, eta, y2))
    assert d <= np.linalg.norm(y1 - y2) + 1e-12


@settings(max_examples=150, deadline=None)
@given(regs, st.floats(1e-3, 10), vec3)
def test_prox_optimality_condition(reg, eta, y):
    x = prox(reg, eta, y)
    assert oracles.prox_optimality_residual(reg, eta, y, x) <= 1e-8 * max(1.0, np.abs(y).max() / eta)
