"""Slow, independent reference computations used to check the fast paths.

Nothing here calls the closed forms, the kernels or the precomputed
quantities it is meant to check.
"""

import itertools

import numpy as np
from scipy.optimize import minimize_scalar


def dense_parts(p):
    A = p.data.to_dense()
    return A, p.data.labels.copy()


def dense_objective(p, x, A=None, b=None):
    if A is None:
        A, b = dense_parts(p)
    r = A @ x - b
    lam2 = p.smooth_l2 + p.reg.l2
    return float(r @ r) / (2 * p.n) + 0.5 * lam2 * float(x @ x) + p.reg.l1 * float(np.abs(x).sum())


def dense_component_grad(p, i, x, A=None, b=None):
    if A is None:
        A, b = dense_parts(p)
    return (A[i] @ x - b[i]) * A[i] + p.smooth_l2 * x


def dense_full_grad(p, x, A=None, b=None):
    if A is None:
        A, b = dense_parts(p)
    return A.T @ (A @ x - b) / p.n + p.smooth_l2 * x


def ridge_solution(p):
    """Minimizer and minimum of an L1-free problem from a dense linear solve."""
    if p.reg.l1 != 0.0:
        raise ValueError("normal equations need an L1-free problem")
    A, b = dense_parts(p)
    lam = p.smooth_l2 + p.reg.l2
    H = A.T @ A / p.n + lam * np.eye(p.d)
    x = np.linalg.solve(H, A.T @ b / p.n)
    return x, dense_objective(p, x, A, b)


def fd_component_grad(p, i, x, h=1e-6):
    """Central differences of ``f_i``."""
    A, b = dense_parts(p)

    def fi(z):
        r = A[i] @ z - b[i]
        return 0.5 * r * r + 0.5 * p.smooth_l2 * float(z @ z)

    g = np.empty(p.d)
    for j in range(p.d):
        e = np.zeros(p.d)
        e[j] = h
        g[j] = (fi(x + e) - fi(x - e)) / (2 * h)
    return g


def _penalized(p, x, zeta, p_sq, A, b):
    def g(t):
        return dense_objective(p, t * x, A, b) + 0.5 * zeta * (1.0 - t) ** 2 * p_sq

    return g


def theta_by_search(p, x, zeta, p_sq, grid_points=2001):
    """Minimize the scaling subproblem by bracketing, a dense grid and Brent refinement."""
    A, b = dense_parts(p)
    g = _penalized(p, x, zeta, p_sq, A, b)
    Ax = A @ x
    lam2 = p.smooth_l2 + p.reg.l2
    x_sq, x_l1 = float(x @ x), float(np.abs(x).sum())

    def g_grid(ts):
        R = ts[:, None] * Ax[None, :] - b[None, :]
        return (
            (R * R).sum(axis=1) / (2 * p.n)
            + 0.5 * lam2 * ts**2 * x_sq
            + p.reg.l1 * np.abs(ts) * x_l1
            + 0.5 * zeta * (1.0 - ts) ** 2 * p_sq
        )

    # widen the grid until its best point is interior
    radius = 2.0
    while True:
        ts = np.linspace(1 - radius, 1 + radius, grid_points)
        vals = g_grid(ts)
        k = int(np.argmin(vals))
        if 0 < k < grid_points - 1 or radius > 1e8:
            break
        radius *= 4.0
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, grid_points - 1)]
    res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12, "maxiter": 500})
    return float(res.x)


def theta_lasso_two_branch(p, x, zeta, p_sq):
    """Exact minimizer of the L1 scaling subproblem by solving each sign branch.

    On ``t > 0`` and ``t < 0`` the objective is a quadratic in ``t``; the
    stationary point of each branch is kept if it lies on that branch, and
    the best of those and ``t = 0`` wins.
    """
    A, b = dense_parts(p)
    Ax = A @ x
    quad = float(Ax @ Ax) / p.n + zeta * p_sq
    lin = float(b @ Ax) / p.n + zeta * p_sq
    l1x = p.reg.l1 * float(np.abs(x).sum())
    g = _penalized(p, x, zeta, p_sq, A, b)
    cands = [0.0]
    if quad > 0:
        t_pos = (lin - l1x) / quad
        t_neg = (lin + l1x) / quad
        if t_pos > 0:
            cands.append(t_pos)
        if t_neg < 0:
            cands.append(t_neg)
    vals = [g(t) for t in cands]
    return cands[int(np.argmin(vals))]


def enumerated_mean(fn, n):
    """Exact expectation of ``fn(i)`` over a uniform index."""
    acc = None
    for i in range(n):
        v = fn(i)
        acc = v.copy() if acc is None else acc + v
    return acc / n


def enumerated_subset_mean(fn, n, size):
    acc = None
    count = 0
    for subset in itertools.combinations(range(n), size):
        v = fn(subset)
        acc = v.copy() if acc is None else acc + v
        count += 1
    return acc / count


def svrg_variance(p, x, x_tilde):
    """``(1/n) sum_i ||grad f_i(x) - grad f(x) - grad f_i(x_tilde) + grad f(x_tilde)||^2``."""
    A, b = dense_parts(p)
    gx = dense_full_grad(p, x, A, b)
    gt = dense_full_grad(p, x_tilde, A, b)
    total = 0.0
    for i in range(p.n):
        v = dense_component_grad(p, i, x, A, b) - gx - dense_component_grad(p, i, x_tilde, A, b) + gt
        total += float(v @ v)
    return total / p.n


def prox_optimality_residual(reg, eta, y, x):
    """Distance of ``0`` from ``(x - y)/eta + subdifferential r(x)``, componentwise max."""
    g = (x - y) / eta + reg.l2 * x
    worst = 0.0
    for gj, xj in zip(g, x):
        if xj != 0.0:
            worst = max(worst, abs(gj + reg.l1 * np.sign(xj)))
        else:
            worst = max(worst, max(abs(gj) - reg.l1, 0.0))
    return worst
