"""Compiled inner loops. One call runs one epoch of ``m`` stochastic steps.

All kernels share ``_vr_step`` (gradient step on the variance-reduced
estimate) and ``_prox_inplace`` so that reductions between solvers hold
bit for bit.
"""

import numpy as np
from numba import njit

from .precompute import norm_sq_kernel
from .problem import objective_kernel
from .rng import randbelow
from .sufficient_decrease import (
    THETA_ARMIJO,
    THETA_LASSO,
    THETA_OFF,
    THETA_RIDGE,
    armijo_scalar,
    theta_lasso_scalar,
    theta_ridge_scalar,
)

# stats slots
ST_SD = 0
ST_NEG = 1
ST_EXPAND = 2
ST_VIOLATIONS = 3
ST_MIN = 4
ST_MAX = 5
ST_SKIPPED = 6
N_STATS = 7


def new_stats():
    s = np.zeros(N_STATS)
    s[ST_MIN] = np.inf
    s[ST_MAX] = -np.inf
    return s


@njit(cache=True, nogil=True, inline="always")
def _row_dot(indptr, indices, data, i, x):
    acc = 0.0
    for t in range(indptr[i], indptr[i + 1]):
        acc += data[t] * x[indices[t]]
    return acc


@njit(cache=True, nogil=True)
def _prox_inplace(v, eta, l1, l2):
    if l1 > 0.0:
        thr = eta * l1
        for j in range(len(v)):
            z = v[j]
            if z > thr:
                v[j] = z - thr
            elif z < -thr:
                v[j] = z + thr
            else:
                v[j] = 0.0
    if l2 > 0.0:
        den = 1.0 + eta * l2
        for j in range(len(v)):
            v[j] = v[j] / den


@njit(cache=True, nogil=True)
def _vr_step(indptr, indices, data, i, x, anchor, avg, dr, eta, s, out):
    """``out = x - eta * (avg + s (x - anchor) + dr a_i)``."""
    for j in range(len(x)):
        out[j] = x[j] - eta * (avg[j] + s * (x[j] - anchor[j]))
    c = eta * dr
    for t in range(indptr[i], indptr[i + 1]):
        out[indices[t]] -= c * data[t]


@njit(cache=True, nogil=True)
def _residual_norm_sq(indptr, indices, data, i, x, anchor, dr, s, row_sq):
    """``||dr a_i + s (x - anchor)||^2``."""
    if s == 0.0:
        return dr * dr * row_sq
    acc = 0.0
    for j in range(len(x)):
        v = s * (x[j] - anchor[j])
        acc += v * v
    cross = 0.0
    for t in range(indptr[i], indptr[i + 1]):
        k = indices[t]
        cross += data[t] * (x[k] - anchor[k])
    return acc + 2.0 * dr * s * cross + dr * dr * row_sq


@njit(cache=True, nogil=True)
def _theta(
    code, x, p_sq, n, zeta, lam2, lam1, btA, b_sq, fn_code, factor, dense, indptr, indices, data, stats
):
    bAx = 0.0
    x_sq = 0.0
    x_l1 = 0.0
    for j in range(len(x)):
        bAx += btA[j] * x[j]
        x_sq += x[j] * x[j]
        x_l1 += abs(x[j])
    Ax_sq = norm_sq_kernel(fn_code, factor, dense, indptr, indices, data, x)
    ok = True
    if code == THETA_RIDGE:
        theta, ok = theta_ridge_scalar(bAx, Ax_sq, x_sq, n, zeta, p_sq, lam2)
    elif code == THETA_LASSO:
        theta, ok = theta_lasso_scalar(bAx, Ax_sq, x_l1, n, zeta, p_sq, lam1)
    else:
        theta = armijo_scalar(bAx, Ax_sq, b_sq, x_sq, x_l1, n, zeta, p_sq, lam2, lam1)
    stats[ST_SD] += 1
    if not ok:
        stats[ST_SKIPPED] += 1
    if theta < 0.0:
        stats[ST_NEG] += 1
    if theta > 1.0:
        stats[ST_EXPAND] += 1
    if theta < stats[ST_MIN]:
        stats[ST_MIN] = theta
    if theta > stats[ST_MAX]:
        stats[ST_MAX] = theta
    return theta


@njit(cache=True, nogil=True)
def _check_decrease(indptr, indices, data, b, x, theta, zeta, p_sq, s, l2, l1, tmp, stats):
    fx = objective_kernel(indptr, indices, data, b, x, s, l2, l1)
    for j in range(len(x)):
        tmp[j] = theta * x[j]
    ft = objective_kernel(indptr, indices, data, b, tmp, s, l2, l1)
    tol = 1e-9 * max(1.0, abs(fx))
    if ft > fx - 0.5 * zeta * (1.0 - theta) * (1.0 - theta) * p_sq + tol:
        stats[ST_VIOLATIONS] += 1


@njit(cache=True, nogil=True)
def svrg_epoch(indptr, indices, data, b, s, l1, l2, eta, x_tilde, mu, snap_resid, m, state, average, x_out):
    """Plain / proximal SVRG from ``x_tilde``; ``x_out`` gets the last or averaged iterate."""
    n = len(b)
    d = len(x_tilde)
    x = x_tilde.copy()
    y = np.empty(d)
    acc = np.zeros(d)
    for _ in range(m):
        i = randbelow(state, n)
        dr = (_row_dot(indptr, indices, data, i, x) - b[i]) - snap_resid[i]
        if average:
            for j in range(d):
                acc[j] += x[j]
        _vr_step(indptr, indices, data, i, x, x_tilde, mu, dr, eta, s, y)
        _prox_inplace(y, eta, l1, l2)
        x, y = y, x
    if average:
        for j in range(d):
            x_out[j] = acc[j] / m
    else:
        for j in range(d):
            x_out[j] = x[j]


@njit(cache=True, nogil=True)
def svrg_sd_epoch(
    indptr, indices, data, b, row_sq, s, l1, l2, eta, sigma,
    x_tilde, mu, snap_resid, x0, m, state, sd_mask,
    theta_code, zeta, btA, b_sq, fn_code, factor, dense, check,
    x_end, xhat_end, x_avg, stats,
):
    """One SVRG-SD epoch started at ``x0`` with snapshot ``x_tilde``.

    Writes the last iterate, the last scaled iterate and the mean of the
    scaled iterates.
    """
    n = len(b)
    d = len(x0)
    lam2 = s + l2
    x = x0.copy()
    xh_prev = x0.copy()
    xh = np.empty(d)
    y = np.empty(d)
    acc = np.zeros(d)
    tmp = np.empty(d)
    for k in range(m):
        i = randbelow(state, n)
        dr = (_row_dot(indptr, indices, data, i, x) - b[i]) - snap_resid[i]
        _vr_step(indptr, indices, data, i, x, x_tilde, mu, dr, eta, s, y)
        _prox_inplace(y, eta, l1, l2)
        if theta_code != THETA_OFF and sd_mask[k]:
            p_sq = _residual_norm_sq(indptr, indices, data, i, x, x_tilde, dr, s, row_sq[i])
            theta = _theta(theta_code, x, p_sq, n, zeta, lam2, l1, btA, b_sq, fn_code, factor, dense, indptr, indices, data, stats)
            if check:
                _check_decrease(indptr, indices, data, b, x, theta, zeta, p_sq, s, l2, l1, tmp, stats)
            for j in range(d):
                xh[j] = theta * x[j]
        else:
            for j in range(d):
                xh[j] = x[j]
        for j in range(d):
            acc[j] += xh[j]
            # y becomes the next iterate in place
            y[j] = y[j] + (1.0 - sigma) * (xh[j] - xh_prev[j])
        x, y = y, x
        xh_prev, xh = xh, xh_prev
    for j in range(d):
        x_end[j] = x[j]
        xhat_end[j] = xh_prev[j]
        x_avg[j] = acc[j] / m


@njit(cache=True, nogil=True)
def _saga_refresh(indptr, indices, data, s, resid_tab, phi_tab, avg):
    n = len(resid_tab)
    d = len(avg)
    for j in range(d):
        avg[j] = 0.0
    for i in range(n):
        r = resid_tab[i]
        for t in range(indptr[i], indptr[i + 1]):
            avg[indices[t]] += r * data[t]
    for j in range(d):
        avg[j] /= n
    if s > 0.0:
        for j in range(d):
            acc = 0.0
            for i in range(n):
                acc += phi_tab[i, j]
            avg[j] += s * (acc / n)


@njit(cache=True, nogil=True)
def _saga_store(indptr, indices, data, i, x, dr, r_new, s, resid_tab, phi_tab, avg, counter):
    """Replace slot ``i`` by ``grad f_i(x)`` and keep the mean in sync."""
    n = len(resid_tab)
    c = dr / n
    for t in range(indptr[i], indptr[i + 1]):
        avg[indices[t]] += c * data[t]
    if s > 0.0:
        for j in range(len(x)):
            avg[j] += s * (x[j] - phi_tab[i, j]) / n
            phi_tab[i, j] = x[j]
    resid_tab[i] = r_new
    counter[0] += 1
    if counter[0] >= n:
        _saga_refresh(indptr, indices, data, s, resid_tab, phi_tab, avg)
        counter[0] = 0


@njit(cache=True, nogil=True)
def saga_epoch(indptr, indices, data, b, s, l1, l2, eta, x0, m, state, resid_tab, phi_tab, avg, counter, average, x_end, x_avg):
    n = len(b)
    d = len(x0)
    x = x0.copy()
    y = np.empty(d)
    acc = np.zeros(d)
    for _ in range(m):
        i = randbelow(state, n)
        r_new = _row_dot(indptr, indices, data, i, x) - b[i]
        dr = r_new - resid_tab[i]
        anchor = phi_tab[i] if s > 0.0 else x
        if average:
            for j in range(d):
                acc[j] += x[j]
        _vr_step(indptr, indices, data, i, x, anchor, avg, dr, eta, s, y)
        _prox_inplace(y, eta, l1, l2)
        _saga_store(indptr, indices, data, i, x, dr, r_new, s, resid_tab, phi_tab, avg, counter)
        x, y = y, x
    for j in range(d):
        x_end[j] = x[j]
        x_avg[j] = acc[j] / m if average else x[j]


@njit(cache=True, nogil=True)
def saga_sd_epoch(
    indptr, indices, data, b, row_sq, s, l1, l2, eta, sigma,
    x0, m, state, resid_tab, phi_tab, avg, counter, sd_mask,
    theta_code, zeta, btA, b_sq, fn_code, factor, dense, check,
    x_end, x_avg, stats,
):
    n = len(b)
    d = len(x0)
    lam2 = s + l2
    x = x0.copy()
    xh_prev = x0.copy()
    xh = np.empty(d)
    y = np.empty(d)
    acc = np.zeros(d)
    tmp = np.empty(d)
    for k in range(m):
        i = randbelow(state, n)
        r_new = _row_dot(indptr, indices, data, i, x) - b[i]
        dr = r_new - resid_tab[i]
        anchor = phi_tab[i] if s > 0.0 else x
        _vr_step(indptr, indices, data, i, x, anchor, avg, dr, eta, s, y)
        _prox_inplace(y, eta, l1, l2)
        if theta_code != THETA_OFF and sd_mask[k]:
            p_sq = _residual_norm_sq(indptr, indices, data, i, x, anchor, dr, s, row_sq[i])
            theta = _theta(theta_code, x, p_sq, n, zeta, lam2, l1, btA, b_sq, fn_code, factor, dense, indptr, indices, data, stats)
            if check:
                _check_decrease(indptr, indices, data, b, x, theta, zeta, p_sq, s, l2, l1, tmp, stats)
            for j in range(d):
                xh[j] = theta * x[j]
        else:
            for j in range(d):
                xh[j] = x[j]
        _saga_store(indptr, indices, data, i, x, dr, r_new, s, resid_tab, phi_tab, avg, counter)
        for j in range(d):
            acc[j] += xh[j]
            y[j] = y[j] + (1.0 - sigma) * (xh[j] - xh_prev[j])
        x, y = y, x
        xh_prev, xh = xh, xh_prev
    for j in range(d):
        x_end[j] = x[j]
        x_avg[j] = acc[j] / m
