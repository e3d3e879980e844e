"""Epoch-structured solvers: SVRG, Prox-SVRG, SAGA, SVRG-SD and SAGA-SD.

Every solver returns ``(x_out, trace)``. Costs are counted in effective
passes: one full gradient, or ``n`` component gradients, is one pass.
Objective evaluations made for the trace are excluded from wall time.
"""

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels as K
from .precompute import compute_btA, kernel_args, make_fastnorm
from .problem import full_grad_kernel, make_step_plan, objective, plan_for_eta
from .rng import make_state, sample_mask
from .sufficient_decrease import THETA_ARMIJO, THETA_OFF, theta_rule_for
from .trace import Trace

SVRG = "svrg"
PROX_SVRG = "prox-svrg"
SAGA = "saga"
SVRG_SD = "svrg-sd"
SAGA_SD = "saga-sd"
ALGORITHMS = (SVRG, PROX_SVRG, SAGA, SVRG_SD, SAGA_SD)

SC = "sc"
NONSC = "nonsc"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Run configuration.

    Give either ``eta`` or ``alpha`` (``eta = 1 / (L alpha)``). ``m`` defaults
    to ``2n`` for the SVRG family and ``n`` for SAGA / SAGA-SD; ``m1``
    defaults to ``max(1, m // 1000)``. ``snapshot`` selects the last or the
    averaged inner iterate for the baselines (SVRG, Prox-SVRG, SAGA).
    ``sd_pass_charge`` bills one component gradient per scaling step even
    though the kernels reuse the estimator's residual and never compute it.
    """

    algorithm: str
    epochs: int = 30
    eta: float = None
    alpha: float = None
    m: int = None
    m1: int = None
    sigma: float = 0.5
    delta: float = 0.1
    zeta_eps: float = 1e-3
    convexity: str = SC
    theta_mode: str = "closed_form"
    fastnorm: str = "auto"
    energy_target: float = 0.995
    r_max: int = 10
    snapshot: str = "last"
    seed: int = 0
    record_every: int = 1
    check_property1: bool = False
    stop_objective: float = None
    divergence_factor: float = 1e3
    x0: tuple = None
    sd_pass_charge: bool = False

    def validate(self, p=None):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if (self.eta is None) == (self.alpha is None):
            raise ConfigError("give exactly one of eta or alpha")
        if self.eta is not None and not self.eta > 0:
            raise ConfigError("eta must be positive")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.m is not None and self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.m1 is not None and self.m1 < 0:
            raise ConfigError("m1 must be >= 0")
        if self.m is not None and self.m1 is not None and self.m1 > self.m:
            raise ConfigError("m1 cannot exceed m")
        if not 0.0 <= self.sigma <= 1.0:
            raise ConfigError("sigma must lie in [0, 1]")
        if self.convexity not in (SC, NONSC):
            raise ConfigError("convexity must be 'sc' or 'nonsc'")
        if self.convexity == NONSC and self.algorithm != SVRG_SD:
            raise ConfigError("the non-strongly-convex variant exists only for svrg-sd")
        if self.convexity == NONSC and self.sigma == 0.0:
            raise ConfigError("non-strongly-convex svrg-sd divides by sigma; sigma must be > 0")
        if self.theta_mode not in ("closed_form", "armijo", "off"):
            raise ConfigError("theta_mode must be closed_form, armijo or off")
        if self.snapshot not in ("last", "average"):
            raise ConfigError("snapshot must be 'last' or 'average'")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if p is not None:
            if self.algorithm == SVRG and (p.reg.l1 > 0 or p.reg.l2 > 0):
                raise ConfigError("plain svrg needs r(x) = 0; use prox-svrg for regularized problems")
            if self.x0 is not None and len(self.x0) != p.d:
                raise ConfigError(f"x0 has length {len(self.x0)}, problem has d={p.d}")
            if p.n == 0:
                raise ConfigError("empty dataset")

    def resolved_m(self, p):
        if self.m is not None:
            return int(self.m)
        return 2 * p.n if self.algorithm in (SVRG, PROX_SVRG, SVRG_SD) else p.n

    def resolved_m1(self, p):
        m = self.resolved_m(p)
        if self.m1 is not None:
            return min(int(self.m1), m)
        return max(1, m // 1000)

    def step_plan(self, p):
        if self.alpha is not None:
            return make_step_plan(p.L, self.alpha, self.sigma, self.delta, self.zeta_eps)
        return plan_for_eta(p.L, self.eta, self.sigma, self.delta, self.zeta_eps)

    def config_hash(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def label(self):
        step = f"eta={self.eta!r}" if self.eta is not None else f"alpha={self.alpha!r}"
        return f"{self.algorithm}[{step}]"


class _Run:
    """Bookkeeping shared by all solver loops."""

    def __init__(self, p, cfg):
        cfg.validate(p)
        self.p = p
        self.cfg = cfg
        ds = p.data
        self.ds = ds
        self.args = (ds.indptr, ds.indices, ds.data, ds.labels)
        self.x0 = np.zeros(p.d) if cfg.x0 is None else np.array(cfg.x0, dtype=np.float64)
        self.state = make_state(cfg.seed)
        self.plan = cfg.step_plan(p)
        self.m = cfg.resolved_m(p)
        self.m1 = cfg.resolved_m1(p)
        self.grads = 0
        self.wall = 0
        self.trace = Trace(cfg.algorithm, ds.name, cfg.seed, config_hash=cfg.config_hash())
        self.stats = K.new_stats()
        self.f0 = objective(p, self.x0)
        self.trace.add(0, 0.0, 0, self.f0)
        self._t = None
        self.fastnorm = None

    def tic(self):
        self._t = time.perf_counter_ns()

    def toc(self):
        self.wall += time.perf_counter_ns() - self._t

    @property
    def passes(self):
        return self.grads / self.p.n

    def record(self, epoch, x, force=False):
        """Append a trace record; returns False when the run should stop."""
        if not force and epoch % self.cfg.record_every and epoch != self.cfg.epochs:
            return True
        f = objective(self.p, x)
        self.trace.add(epoch, self.passes, self.wall, f)
        limit = self.cfg.divergence_factor * max(abs(self.f0), 1e-300)
        if not math.isfinite(f) or f > limit:
            self.trace.status = "diverged"
            return False
        if self.cfg.stop_objective is not None and f <= self.cfg.stop_objective:
            return False
        return True

    def full_grad(self, x, mu, resid):
        full_grad_kernel(*self.args, x, self.p.smooth_l2, resid, mu)
        self.grads += self.p.n

    def sd_setup(self):
        cfg, p = self.cfg, self.p
        if cfg.theta_mode == "off" or self.m1 == 0:
            self.theta_code = THETA_OFF
        elif cfg.theta_mode == "armijo":
            self.theta_code = THETA_ARMIJO
        else:
            self.theta_code = theta_rule_for(p)
        self.mask = np.ones(self.m, dtype=np.bool_)
        self.btA = compute_btA(self.ds) if self.theta_code != THETA_OFF else np.zeros(p.d)
        self.b_sq = float(self.ds.labels @ self.ds.labels)
        if self.theta_code != THETA_OFF:
            fn = make_fastnorm(self.ds, cfg.fastnorm, cfg.energy_target, cfg.r_max, cfg.seed)
            self.fastnorm = fn
        else:
            self.fastnorm = None
        self.fn_args = kernel_args(self.fastnorm) if self.fastnorm is not None else (0, np.zeros((0, 0)), np.zeros((0, 0)))

    def sd_charge(self):
        if not self.cfg.sd_pass_charge or self.theta_code == THETA_OFF:
            return 0
        return min(self.m1, self.m)

    def draw_schedule(self):
        """Mark which inner iterations of this epoch run the scaling step."""
        if self.theta_code != THETA_OFF and self.m1 < self.m:
            sample_mask(self.state, self.m, self.m1, self.mask)

    def finish(self, x):
        s = self.stats
        n_sd = int(s[K.ST_SD])
        self.trace.stats = {
            "sd_iterations": n_sd,
            "theta_negative": int(s[K.ST_NEG]),
            "theta_expand": int(s[K.ST_EXPAND]),
            "theta_skipped": int(s[K.ST_SKIPPED]),
            "theta_min": float(s[K.ST_MIN]) if n_sd else None,
            "theta_max": float(s[K.ST_MAX]) if n_sd else None,
            "property1_violations": int(s[K.ST_VIOLATIONS]) if self.cfg.check_property1 else None,
            "eta": self.plan.eta,
            "zeta": self.plan.zeta,
            "m": self.m,
            "m1": self.m1,
            "fastnorm": None if self.fastnorm is None else self.fastnorm.mode,
            "fastnorm_rank": None if self.fastnorm is None else self.fastnorm.rank,
        }
        return x, self.trace


def _svrg_loop(p, cfg, average):
    run = _Run(p, cfg)
    d, n = p.d, p.n
    eta = run.plan.eta
    x_tilde = run.x0.copy()
    mu = np.empty(d)
    snap = np.empty(n)
    x_next = np.empty(d)
    for epoch in range(1, cfg.epochs + 1):
        run.tic()
        run.full_grad(x_tilde, mu, snap)
        K.svrg_epoch(*run.args, p.smooth_l2, p.reg.l1, p.reg.l2, eta, x_tilde, mu, snap, run.m, run.state, average, x_next)
        run.grads += run.m
        x_tilde = x_next.copy()
        run.toc()
        if not run.record(epoch, x_tilde):
            break
    return run.finish(x_tilde)


def run_svrg(p, cfg):
    """SVRG for unregularized problems (any ridge term must sit in ``smooth_l2``)."""
    if cfg.algorithm != SVRG:
        cfg = replace(cfg, algorithm=SVRG)
    return _svrg_loop(p, cfg, cfg.snapshot == "average")


def run_prox_svrg(p, cfg):
    if cfg.algorithm != PROX_SVRG:
        cfg = replace(cfg, algorithm=PROX_SVRG)
    return _svrg_loop(p, cfg, cfg.snapshot == "average")


def _saga_table(run, x0):
    p = run.p
    resid = np.empty(p.n)
    avg = np.empty(p.d)
    full_grad_kernel(*run.args, x0, p.smooth_l2, resid, avg)
    run.grads += p.n
    phi = np.tile(x0, (p.n, 1)) if p.smooth_l2 > 0 else np.zeros((0, p.d))
    return resid, phi, avg, np.zeros(1, dtype=np.int64)


def run_saga(p, cfg):
    """SAGA. With ``snapshot='average'`` each epoch restarts from the mean inner iterate."""
    if cfg.algorithm != SAGA:
        cfg = replace(cfg, algorithm=SAGA)
    run = _Run(p, cfg)
    average = cfg.snapshot == "average"
    eta = run.plan.eta
    run.tic()
    resid, phi, avg, counter = _saga_table(run, run.x0)
    run.toc()
    x = run.x0.copy()
    x_end = np.empty(p.d)
    x_avg = np.empty(p.d)
    for epoch in range(1, cfg.epochs + 1):
        run.tic()
        K.saga_epoch(*run.args, p.smooth_l2, p.reg.l1, p.reg.l2, eta, x, run.m, run.state, resid, phi, avg, counter, average, x_end, x_avg)
        run.grads += run.m
        x = (x_avg if average else x_end).copy()
        run.toc()
        if not run.record(epoch, x):
            break
    return run.finish(x)


def run_svrg_sd(p, cfg):
    """SVRG with sufficient decrease and momentum coupling.

    Strongly convex mode restarts each epoch from the averaged scaled
    iterate. Non-strongly-convex mode restarts from
    ``(x_m - (1 - sigma) xhat_m) / sigma`` and returns the better of the
    last snapshot and the mean of all snapshots.
    """
    if cfg.algorithm != SVRG_SD:
        cfg = replace(cfg, algorithm=SVRG_SD)
    run = _Run(p, cfg)
    run.sd_setup()
    d, n = p.d, p.n
    plan = run.plan
    nonsc = cfg.convexity == NONSC
    x_tilde = run.x0.copy()
    y_tilde = run.x0.copy()
    snap_sum = np.zeros(d)
    n_snaps = 0
    mu = np.empty(d)
    snap = np.empty(n)
    x_end = np.empty(d)
    xhat_end = np.empty(d)
    x_avg = np.empty(d)
    fn_code, factor, dense = run.fn_args
    for epoch in range(1, cfg.epochs + 1):
        run.tic()
        run.full_grad(x_tilde, mu, snap)
        run.draw_schedule()
        start = y_tilde if nonsc else x_tilde
        K.svrg_sd_epoch(
            *run.args, p.data.row_norm_sq, p.smooth_l2, p.reg.l1, p.reg.l2, plan.eta, plan.sigma,
            x_tilde, mu, snap, start, run.m, run.state, run.mask,
            run.theta_code, plan.zeta, run.btA, run.b_sq, fn_code, factor, dense, cfg.check_property1,
            x_end, xhat_end, x_avg, run.stats,
        )
        # the gradient residual feeding theta is reused from the estimator: no extra gradient
        run.grads += run.m + run.sd_charge()
        x_tilde = x_avg.copy()
        if nonsc:
            y_tilde = (x_end - (1.0 - plan.sigma) * xhat_end) / plan.sigma
            snap_sum += x_tilde
            n_snaps += 1
        run.toc()
        if not run.record(epoch, x_tilde):
            break
    x_out = x_tilde
    if nonsc and n_snaps:
        mean_snap = snap_sum / n_snaps
        if objective(p, mean_snap) < objective(p, x_tilde):
            x_out = mean_snap
    return run.finish(x_out)


def run_saga_sd(p, cfg):
    """SAGA with sufficient decrease; the gradient table persists across epochs."""
    if cfg.algorithm != SAGA_SD:
        cfg = replace(cfg, algorithm=SAGA_SD)
    run = _Run(p, cfg)
    run.sd_setup()
    plan = run.plan
    run.tic()
    resid, phi, avg, counter = _saga_table(run, run.x0)
    run.toc()
    x_tilde = run.x0.copy()
    x_end = np.empty(p.d)
    x_avg = np.empty(p.d)
    fn_code, factor, dense = run.fn_args
    for epoch in range(1, cfg.epochs + 1):
        run.tic()
        run.draw_schedule()
        K.saga_sd_epoch(
            *run.args, p.data.row_norm_sq, p.smooth_l2, p.reg.l1, p.reg.l2, plan.eta, plan.sigma,
            x_tilde, run.m, run.state, resid, phi, avg, counter, run.mask,
            run.theta_code, plan.zeta, run.btA, run.b_sq, fn_code, factor, dense, cfg.check_property1,
            x_end, x_avg, run.stats,
        )
        # the gradient residual feeding theta is reused from the estimator: no extra gradient
        run.grads += run.m + run.sd_charge()
        x_tilde = x_avg.copy()
        run.toc()
        if not run.record(epoch, x_tilde):
            break
    return run.finish(x_tilde)


RUNNERS = {
    SVRG: run_svrg,
    PROX_SVRG: run_prox_svrg,
    SAGA: run_saga,
    SVRG_SD: run_svrg_sd,
    SAGA_SD: run_saga_sd,
}


def run(p, cfg):
    """Dispatch on ``cfg.algorithm``."""
    cfg.validate(p)
    return RUNNERS[cfg.algorithm](p, cfg)
