"""One-time preprocessing for the scaling subproblem: ``b^T A`` and fast ``||Ax||``."""

from dataclasses import dataclass

import numpy as np
from numba import njit

EXACT = "exact"
LOWRANK = "lowrank"
LAZY = "lazy"
MODES = (EXACT, LOWRANK, LAZY)

MODE_CODES = {EXACT: 0, LOWRANK: 1, LAZY: 2}


@dataclass(frozen=True, eq=False)
class FastNorm:
    """How ``||Ax||`` is evaluated.

    ``exact`` keeps a dense copy of A, ``lowrank`` keeps the ``r x d`` factor
    ``S_r V_r^T`` of a truncated SVD and ``lazy`` walks only the stored
    non-zeros of each row.
    """

    mode: str
    factor: np.ndarray = None
    dense: np.ndarray = None
    energy_fraction: float = 1.0

    @property
    def rank(self):
        return 0 if self.factor is None else self.factor.shape[0]

    @property
    def code(self):
        return MODE_CODES[self.mode]


def compute_btA(ds):
    """``sum_i b_i a_i`` as a dense vector, one pass over the non-zeros."""
    out = np.zeros(ds.d)
    _btA_kernel(ds.indptr, ds.indices, ds.data, ds.labels, out)
    return out


@njit(cache=True, nogil=True)
def _btA_kernel(indptr, indices, data, b, out):
    for i in range(len(b)):
        bi = b[i]
        for t in range(indptr[i], indptr[i + 1]):
            out[indices[t]] += bi * data[t]


def exact_norm(ds):
    return FastNorm(EXACT, dense=np.ascontiguousarray(ds.to_dense()))


def lazy_norm(ds):
    return FastNorm(LAZY)


def partial_svd(ds, energy_target=0.995, r_max=10, seed=0, oversample=8, power_iters=4):
    """Smallest-rank factor capturing ``energy_target`` of ``||A||_F^2``.

    Randomized subspace iteration (Halko, Martinsson & Tropp) with a
    Gaussian test matrix. Falls back to exact mode when ``r_max`` components
    do not reach the target.
    """
    if ds.n == 0 or ds.d == 0:
        raise ValueError("empty dataset")
    if not 0.0 < energy_target <= 1.0:
        raise ValueError("energy_target must lie in (0, 1]")
    kmax = min(ds.n, ds.d)
    if r_max < 1 or r_max > kmax:
        raise ValueError(f"r_max must lie in [1, {kmax}]")
    A = ds.to_csr()
    total = float(ds.row_norm_sq.sum())
    if total == 0.0:
        return FastNorm(LOWRANK, factor=np.zeros((1, ds.d)), energy_fraction=1.0)
    k = min(r_max + oversample, kmax)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(A @ rng.standard_normal((ds.d, k)))
    for _ in range(power_iters):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
    B = np.asarray((A.T @ Q).T)
    _, s, vt = np.linalg.svd(B, full_matrices=False)
    cum = np.cumsum(s * s) / total
    hit = np.nonzero(cum[:r_max] >= energy_target - 1e-12)[0]
    if len(hit) == 0:
        return exact_norm(ds)
    r = int(hit[0]) + 1
    factor = np.ascontiguousarray(s[:r, None] * vt[:r])
    return FastNorm(LOWRANK, factor=factor, energy_fraction=float(min(cum[r - 1], 1.0)))


def auto_fastnorm(ds, energy_target=0.995, r_max=10, seed=0):
    """Lazy for sparse data (density < 10%), low rank for wide dense data, else exact."""
    if ds.density < 0.10:
        return lazy_norm(ds)
    if ds.d > 32:
        return partial_svd(ds, energy_target, min(r_max, ds.n, ds.d), seed)
    return exact_norm(ds)


def make_fastnorm(ds, mode="auto", energy_target=0.995, r_max=10, seed=0):
    if mode == "auto":
        return auto_fastnorm(ds, energy_target, r_max, seed)
    if mode == EXACT:
        return exact_norm(ds)
    if mode == LAZY:
        return lazy_norm(ds)
    if mode == LOWRANK:
        return partial_svd(ds, energy_target, min(r_max, ds.n, ds.d), seed)
    raise ValueError(f"unknown fastnorm mode {mode!r}")


@njit(cache=True, nogil=True)
def norm_sq_kernel(code, factor, dense, indptr, indices, data, x):
    acc = 0.0
    if code == 0:
        n, d = dense.shape
        for i in range(n):
            v = 0.0
            for j in range(d):
                v += dense[i, j] * x[j]
            acc += v * v
    elif code == 1:
        r, d = factor.shape
        for i in range(r):
            v = 0.0
            for j in range(d):
                v += factor[i, j] * x[j]
            acc += v * v
    else:
        for i in range(len(indptr) - 1):
            v = 0.0
            for t in range(indptr[i], indptr[i + 1]):
                v += data[t] * x[indices[t]]
            acc += v * v
    return acc


_EMPTY2 = np.zeros((0, 0))


def kernel_args(fn):
    factor = fn.factor if fn.factor is not None else _EMPTY2
    dense = fn.dense if fn.dense is not None else _EMPTY2
    return fn.code, factor, dense


def norm_Ax_sq(fn, ds, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ds.d,):
        raise ValueError(f"expected vector of length {ds.d}, got shape {x.shape}")
    code, factor, dense = kernel_args(fn)
    return float(norm_sq_kernel(code, factor, dense, ds.indptr, ds.indices, ds.data, x))


def norm_Ax(fn, ds, x):
    return float(np.sqrt(norm_Ax_sq(fn, ds, x)))
