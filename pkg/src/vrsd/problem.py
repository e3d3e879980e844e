"""Composite least-squares objective ``F = f + r``, gradients and proximal maps."""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .data_io import Dataset

ZETA_EPS = 1e-3


@dataclass(frozen=True)
class Regularizer:
    """``r(x) = (l2 / 2) * ||x||^2 + l1 * ||x||_1``.

    ``l2`` is the ridge weight (lambda_1) and ``l1`` the Lasso weight
    (lambda_2).
    """

    l2: float = 0.0
    l1: float = 0.0

    def __post_init__(self):
        if self.l2 < 0 or self.l1 < 0:
            raise ValueError("regularization weights must be non-negative")

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def ridge(cls, lam):
        return cls(l2=lam)

    @classmethod
    def lasso(cls, lam):
        return cls(l1=lam)

    @classmethod
    def elastic_net(cls, l2, l1):
        return cls(l2=l2, l1=l1)

    @property
    def kind(self):
        if self.l1 > 0 and self.l2 > 0:
            return "elastic_net"
        if self.l1 > 0:
            return "l1"
        if self.l2 > 0:
            return "l2"
        return "none"

    def value(self, x):
        return 0.5 * self.l2 * float(x @ x) + self.l1 * float(np.abs(x).sum())


@dataclass(frozen=True, eq=False)
class Problem:
    """Average of ``f_i(x) = 0.5 (a_i.x - b_i)^2 + (smooth_l2 / 2) ||x||^2`` plus ``reg``."""

    data: Dataset
    reg: Regularizer = Regularizer()
    smooth_l2: float = 0.0

    def __post_init__(self):
        if self.smooth_l2 < 0:
            raise ValueError("smooth_l2 must be non-negative")

    @property
    def n(self):
        return self.data.n

    @property
    def d(self):
        return self.data.d

    @property
    def L(self):
        top = float(self.data.row_norm_sq.max()) if self.n else 0.0
        return top + self.smooth_l2

    @property
    def total_l2(self):
        """Quadratic weight of ``F`` whichever side of the split it sits on."""
        return self.smooth_l2 + self.reg.l2

    @classmethod
    def ridge(cls, data, lam, in_smooth=True):
        if in_smooth:
            return cls(data, Regularizer.none(), smooth_l2=lam)
        return cls(data, Regularizer.ridge(lam))

    @classmethod
    def lasso(cls, data, lam):
        return cls(data, Regularizer.lasso(lam))

    @classmethod
    def elastic_net(cls, data, l2, l1):
        # ridge part lives in the components so each f_i is strongly convex
        return cls(data, Regularizer.lasso(l1), smooth_l2=l2)

    def describe(self):
        return {
            "dataset": self.data.name,
            "n": self.n,
            "d": self.d,
            "smooth_l2": self.smooth_l2,
            "reg_l2": self.reg.l2,
            "reg_l1": self.reg.l1,
            "L": self.L,
        }


def _check_x(p, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.d,):
        raise ValueError(f"expected vector of length {p.d}, got shape {x.shape}")
    return x


@njit(cache=True, nogil=True)
def residuals(indptr, indices, data, b, x, out):
    for i in range(len(b)):
        acc = 0.0
        for t in range(indptr[i], indptr[i + 1]):
            acc += data[t] * x[indices[t]]
        out[i] = acc - b[i]


@njit(cache=True, nogil=True)
def objective_kernel(indptr, indices, data, b, x, smooth_l2, l2, l1):
    n = len(b)
    loss = 0.0
    for i in range(n):
        acc = 0.0
        for t in range(indptr[i], indptr[i + 1]):
            acc += data[t] * x[indices[t]]
        r = acc - b[i]
        loss += r * r
    sq = 0.0
    ab = 0.0
    for j in range(len(x)):
        sq += x[j] * x[j]
        ab += abs(x[j])
    out = 0.5 * (smooth_l2 + l2) * sq + l1 * ab
    if n > 0:
        out += loss / (2.0 * n)
    return out


@njit(cache=True, nogil=True)
def full_grad_kernel(indptr, indices, data, b, x, smooth_l2, resid, out):
    """Average component gradient at ``x``; leaves ``a_i.x - b_i`` in ``resid``."""
    n = len(b)
    d = len(x)
    for j in range(d):
        out[j] = 0.0
    for i in range(n):
        acc = 0.0
        for t in range(indptr[i], indptr[i + 1]):
            acc += data[t] * x[indices[t]]
        r = acc - b[i]
        resid[i] = r
        for t in range(indptr[i], indptr[i + 1]):
            out[indices[t]] += r * data[t]
    for j in range(d):
        out[j] = out[j] / n + smooth_l2 * x[j]


def objective(p, x):
    """``F(x)``; rows are accumulated in index order so repeated calls agree bitwise."""
    x = _check_x(p, x)
    ds = p.data
    return float(objective_kernel(ds.indptr, ds.indices, ds.data, ds.labels, x, p.smooth_l2, p.reg.l2, p.reg.l1))


def smooth_objective(p, x):
    """``f(x)`` alone (no regularizer)."""
    x = _check_x(p, x)
    ds = p.data
    return float(objective_kernel(ds.indptr, ds.indices, ds.data, ds.labels, x, p.smooth_l2, 0.0, 0.0))


def component_value(p, i, x):
    idx, val = _row(p, i)
    r = float(val @ x[idx]) - p.data.labels[i]
    return 0.5 * r * r + 0.5 * p.smooth_l2 * float(x @ x)


def _row(p, i):
    if not 0 <= i < p.n:
        raise IndexError(f"component index {i} out of range [0, {p.n})")
    return p.data.row(i)


def component_residual(p, i, x):
    """``a_i.x - b_i``."""
    idx, val = _row(p, i)
    return float(val @ x[idx]) - p.data.labels[i]


def component_grad(p, i, x):
    x = _check_x(p, x)
    idx, val = _row(p, i)
    r = float(val @ x[idx]) - p.data.labels[i]
    g = p.smooth_l2 * x
    g[idx] += r * val
    return g


def full_grad(p, x):
    x = _check_x(p, x)
    ds = p.data
    if ds.n == 0:
        raise ValueError("empty dataset")
    out = np.empty(p.d)
    resid = np.empty(p.n)
    full_grad_kernel(ds.indptr, ds.indices, ds.data, ds.labels, x, p.smooth_l2, resid, out)
    return out


def soft_threshold(tau, z):
    """Scalar or elementwise ``sign(z) * max(|z| - tau, 0)``."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    if np.ndim(z) == 0:
        z = float(z)
        if z > tau:
            return z - tau
        if z < -tau:
            return z + tau
        return 0.0
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def prox(reg, eta, y):
    if eta <= 0:
        raise ValueError("step size must be positive")
    y = np.asarray(y, dtype=np.float64)
    out = soft_threshold(eta * reg.l1, y) if reg.l1 > 0 else y.copy()
    if reg.l2 > 0:
        out = out / (1.0 + eta * reg.l2)
    return out


@dataclass(frozen=True)
class StepPlan:
    alpha: float
    eta: float
    sigma: float
    delta: float
    zeta: float
    zeta_eps: float = ZETA_EPS


def make_step_plan(L, alpha, sigma=0.5, delta=0.1, zeta_eps=ZETA_EPS):
    """Step size ``1 / (L alpha)`` and trade-off ``delta eta / (1 - L eta)``.

    When ``1 - L eta`` falls to ``zeta_eps`` or below (``alpha <= 1``) the
    denominator is replaced by ``zeta_eps`` so the trade-off stays finite.
    """
    if L <= 0 or alpha <= 0:
        raise ValueError("L and alpha must be positive")
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    eta = 1.0 / (L * alpha)
    return StepPlan(alpha=alpha, eta=eta, sigma=sigma, delta=delta, zeta=trade_off(L, eta, delta, zeta_eps), zeta_eps=zeta_eps)


def plan_for_eta(L, eta, sigma=0.5, delta=0.1, zeta_eps=ZETA_EPS):
    if eta <= 0:
        raise ValueError("step size must be positive")
    return StepPlan(alpha=1.0 / (L * eta), eta=eta, sigma=sigma, delta=delta, zeta=trade_off(L, eta, delta, zeta_eps), zeta_eps=zeta_eps)


def trade_off(L, eta, delta, zeta_eps=ZETA_EPS):
    denom = 1.0 - L * eta
    if denom <= zeta_eps:
        denom = zeta_eps
    return delta * eta / denom
