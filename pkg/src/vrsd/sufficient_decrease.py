"""The scalar scaling subproblem and its sufficient-decrease certificate.

For the current iterate ``x`` and gradient residual ``p`` the solvers pick

    theta = argmin_t  F(t x) + (zeta / 2) (1 - t)^2 ||p||^2

which guarantees ``F(theta x) <= F(x) - (zeta / 2)(1 - theta)^2 ||p||^2``.
Ridge and Lasso have closed forms; other objectives fall back to a
backtracking search on the same inequality.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .precompute import compute_btA, kernel_args, make_fastnorm, norm_sq_kernel
from .problem import objective

CLOSED_FORM_RIDGE = "closed_form_ridge"
CLOSED_FORM_LASSO = "closed_form_lasso"
ARMIJO = "armijo"
SKIPPED = "skipped"

# kernel codes for the theta rule
THETA_OFF = 0
THETA_RIDGE = 1
THETA_LASSO = 2
THETA_ARMIJO = 3

ARMIJO_SHRINK = 0.5
ARMIJO_MAX_BACKTRACKS = 30
DENOM_FLOOR = 1e-30


@dataclass(frozen=True, eq=False)
class SdContext:
    btA: np.ndarray
    fastnorm: object
    zeta: float
    m1: int = 0
    b_sq: float = 0.0


@dataclass(frozen=True)
class ThetaResult:
    theta: float
    decreased_by: float
    mode: str


def make_context(ds, zeta, m1=0, fastnorm=None, fastnorm_mode="exact", seed=0):
    if fastnorm is None:
        fastnorm = make_fastnorm(ds, fastnorm_mode, seed=seed)
    return SdContext(
        btA=compute_btA(ds), fastnorm=fastnorm, zeta=float(zeta), m1=int(m1), b_sq=float(ds.labels @ ds.labels)
    )


def theta_rule_for(p):
    """Closed-form rule matching the problem's regularization, else Armijo."""
    if p.reg.l1 == 0.0:
        return THETA_RIDGE
    if p.total_l2 == 0.0:
        return THETA_LASSO
    return THETA_ARMIJO


@njit(cache=True, nogil=True)
def theta_ridge_scalar(bAx, Ax_sq, x_sq, n, zeta, p_sq, lam):
    zp = zeta * p_sq
    den = Ax_sq / n + zp + lam * x_sq
    if den < DENOM_FLOOR:
        return 1.0, False
    return (bAx / n + zp) / den, True


@njit(cache=True, nogil=True)
def theta_lasso_scalar(bAx, Ax_sq, x_l1, n, zeta, p_sq, lam):
    zp = zeta * p_sq
    den = Ax_sq / n + zp
    if den < DENOM_FLOOR:
        return 1.0, False
    z = (bAx / n + zp) / den
    tau = lam * x_l1 / den
    if z > tau:
        return z - tau, True
    if z < -tau:
        return z + tau, True
    return 0.0, True


@njit(cache=True, nogil=True)
def scaled_objective(t, bAx, Ax_sq, b_sq, x_sq, x_l1, n, lam2, lam1):
    """``F(t x)`` for least squares from cached inner products."""
    return (t * t * Ax_sq - 2.0 * t * bAx + b_sq) / (2.0 * n) + 0.5 * lam2 * t * t * x_sq + lam1 * abs(t) * x_l1


@njit(cache=True, nogil=True)
def armijo_scalar(bAx, Ax_sq, b_sq, x_sq, x_l1, n, zeta, p_sq, lam2, lam1):
    f1 = scaled_objective(1.0, bAx, Ax_sq, b_sq, x_sq, x_l1, n, lam2, lam1)
    h0 = scaled_objective(0.0, bAx, Ax_sq, b_sq, x_sq, x_l1, n, lam2, lam1) + 0.5 * zeta * p_sq
    h2 = scaled_objective(2.0, bAx, Ax_sq, b_sq, x_sq, x_l1, n, lam2, lam1) + 0.5 * zeta * p_sq
    step = _armijo_first_step(h0, f1, h2)
    scale = 1.0
    for _ in range(ARMIJO_MAX_BACKTRACKS + 1):
        for sgn in (1.0, -1.0):
            t = 1.0 + sgn * step * scale
            if t == 1.0:
                continue
            ft = scaled_objective(t, bAx, Ax_sq, b_sq, x_sq, x_l1, n, lam2, lam1)
            if ft <= f1 - 0.5 * zeta * (1.0 - t) * (1.0 - t) * p_sq:
                return t
        scale *= ARMIJO_SHRINK
    return 1.0


@njit(cache=True, nogil=True)
def _armijo_first_step(h0, h1, h2):
    # parabola through t = 0, 1, 2 of the penalized objective; step from t = 1
    curv = 0.5 * (h0 - 2.0 * h1 + h2)
    slope = 0.5 * (h2 - h0)
    if curv > 0.0:
        return -slope / (2.0 * curv)
    if slope > 0.0:
        return -1.0
    if slope < 0.0:
        return 1.0
    return 0.0


def _inner_products(ctx, p, x):
    ds = p.data
    code, factor, dense = kernel_args(ctx.fastnorm)
    Ax_sq = float(norm_sq_kernel(code, factor, dense, ds.indptr, ds.indices, ds.data, x))
    return float(ctx.btA @ x), Ax_sq


def _result(theta, zeta, p_sq, mode):
    return ThetaResult(theta=float(theta), decreased_by=0.5 * zeta * (1.0 - theta) ** 2 * p_sq, mode=mode)


def theta_ridge(ctx, p, x, p_norm_sq):
    if p.reg.l1 != 0.0:
        raise ValueError("theta_ridge needs a problem without an L1 term")
    x = np.asarray(x, dtype=np.float64)
    bAx, Ax_sq = _inner_products(ctx, p, x)
    theta, ok = theta_ridge_scalar(bAx, Ax_sq, float(x @ x), p.n, ctx.zeta, p_norm_sq, p.total_l2)
    if not ok:
        return ThetaResult(1.0, 0.0, SKIPPED)
    return _result(theta, ctx.zeta, p_norm_sq, CLOSED_FORM_RIDGE)


def theta_lasso(ctx, p, x, p_norm_sq):
    if p.total_l2 != 0.0 or p.reg.l1 <= 0.0:
        raise ValueError("theta_lasso needs a pure L1 problem")
    x = np.asarray(x, dtype=np.float64)
    bAx, Ax_sq = _inner_products(ctx, p, x)
    theta, ok = theta_lasso_scalar(bAx, Ax_sq, float(np.abs(x).sum()), p.n, ctx.zeta, p_norm_sq, p.reg.l1)
    if not ok:
        return ThetaResult(1.0, 0.0, SKIPPED)
    return _result(theta, ctx.zeta, p_norm_sq, CLOSED_FORM_LASSO)


def theta_armijo(p, x, p_norm_sq, zeta, fn=None):
    """Backtracking search on the decrease inequality for any objective ``fn``.

    The first trial comes from a parabola through ``t = 0, 1, 2``; trials
    then halve their distance to 1, probing both sides. ``t = 1`` satisfies
    the inequality with equality, so the search always has a fallback.
    """
    fn = fn or (lambda z: objective(p, z))
    x = np.asarray(x, dtype=np.float64)
    f1 = fn(x)
    pen = 0.5 * zeta * p_norm_sq
    step = float(_armijo_first_step(fn(0.0 * x) + pen, f1, fn(2.0 * x) + pen))
    scale = 1.0
    for _ in range(ARMIJO_MAX_BACKTRACKS + 1):
        for sgn in (1.0, -1.0):
            t = 1.0 + sgn * step * scale
            if t == 1.0:
                continue
            if fn(t * x) <= f1 - pen * (1.0 - t) ** 2:
                return _result(t, zeta, p_norm_sq, ARMIJO)
        scale *= ARMIJO_SHRINK
    return _result(1.0, zeta, p_norm_sq, ARMIJO)


def verify_property1(p, x, theta, zeta, p_norm_sq):
    """``F(theta x) <= F(x) - (zeta/2)(1-theta)^2 ||p||^2`` up to ``1e-9 max(1, |F(x)|)``."""
    x = np.asarray(x, dtype=np.float64)
    fx = objective(p, x)
    tol = 1e-9 * max(1.0, abs(fx))
    return objective(p, theta * x) <= fx - 0.5 * zeta * (1.0 - theta) ** 2 * p_norm_sq + tol
