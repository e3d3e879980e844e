"""Variance-reduced gradient estimators (SVRG snapshot, mini-batch SVRG, SAGA table).

These are the reference, vector-at-a-time forms. The solver kernels inline
the same arithmetic for speed.
"""

import numpy as np

from .problem import component_grad, component_residual, full_grad


class SvrgSnapshot:
    """Anchor point ``x_tilde`` and the full gradient ``mu_tilde`` there."""

    def __init__(self, p, x_tilde):
        self.problem = p
        self.x_tilde = np.array(x_tilde, dtype=np.float64)
        self.mu_tilde = full_grad(p, self.x_tilde)
        self.x_tilde.setflags(write=False)
        self.mu_tilde.setflags(write=False)


def svrg_estimate(snap, p, i, x):
    """Return ``(grad_f_i(x) - grad_f_i(x_tilde) + mu_tilde, grad_f_i(x) - grad_f_i(x_tilde))``."""
    resid = component_grad(p, i, x) - component_grad(p, i, snap.x_tilde)
    return resid + snap.mu_tilde, resid


def svrg_estimate_minibatch(snap, p, batch, x):
    batch = list(batch)
    if not batch:
        raise ValueError("mini-batch must be non-empty")
    acc = np.zeros(p.d)
    for i in batch:
        acc += component_grad(p, i, x) - component_grad(p, i, snap.x_tilde)
    return acc / len(batch) + snap.mu_tilde


class SagaTable:
    """Stored component gradients ``g_j = grad f_j(phi_j)`` and their mean.

    For plain least squares only the scalar residual ``a_j.phi_j - b_j`` is
    stored (``g_j = r_j a_j``). With ``smooth_l2 > 0`` the points ``phi_j``
    are kept as well. The mean is updated incrementally and recomputed from
    scratch every ``n`` updates.
    """

    def __init__(self, p, x0):
        x0 = np.asarray(x0, dtype=np.float64)
        self.problem = p
        self.resid = np.array([component_residual(p, j, x0) for j in range(p.n)])
        self.phi = np.tile(x0, (p.n, 1)) if p.smooth_l2 > 0 else None
        self.avg = full_grad(p, x0)
        self.updates_since_refresh = 0

    def stored_grad(self, j):
        idx, val = self.problem.data.row(j)
        g = np.zeros(self.problem.d)
        if self.phi is not None:
            g += self.problem.smooth_l2 * self.phi[j]
        g[idx] += self.resid[j] * val
        return g

    def recomputed_mean(self):
        p = self.problem
        out = np.zeros(p.d)
        for j in range(p.n):
            idx, val = p.data.row(j)
            out[idx] += self.resid[j] * val
        out /= p.n
        if self.phi is not None:
            out += p.smooth_l2 * self.phi.mean(axis=0)
        return out

    def estimate(self, i, x):
        """``(estimate, p_tilde)`` using the table as it stands (no mutation)."""
        resid = component_grad(self.problem, i, x) - self.stored_grad(i)
        return resid + self.avg, resid

    def update(self, i, x):
        p = self.problem
        old = self.stored_grad(i)
        self.resid[i] = component_residual(p, i, x)
        if self.phi is not None:
            self.phi[i] = x
        self.avg = self.avg + (self.stored_grad(i) - old) / p.n
        self.updates_since_refresh += 1
        if self.updates_since_refresh >= p.n:
            self.avg = self.recomputed_mean()
            self.updates_since_refresh = 0


def saga_estimate_and_update(table, p, i, x):
    """SAGA estimate at ``x`` from the pre-update table, then store ``grad f_i(x)``."""
    if table.problem is not p:
        raise ValueError("table was built for a different problem")
    est, resid = table.estimate(i, x)
    table.update(i, x)
    return est, resid
