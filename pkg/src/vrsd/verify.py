"""Fast invariant battery behind ``vrsd verify``.

Each check compares a fast path against a slow oracle from ``oracles`` on
random instances and reports a single pass/fail line. The functions under
test are looked up through their modules at call time, so a patched
implementation is what gets checked.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import estimators as est
from . import oracles
from . import problem as prob
from . import sufficient_decrease as sd
from .data_io import normalize_rows, synth_regression
from .problem import Problem, Regularizer, trade_off


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<22} {self.detail} ({self.seconds:.2f}s)"


def random_problem(rng, kind, n=None, d=None, normalize=True):
    """Small random problem of kind ``ridge``, ``lasso``, ``elastic`` or ``none``."""
    n = int(rng.integers(5, 40)) if n is None else n
    d = int(rng.integers(2, 9)) if d is None else d
    ds, _ = synth_regression(n, d, sparsity=float(rng.uniform(0.4, 1.0)), noise_sd=0.1, seed=int(rng.integers(2**31)))
    if normalize:
        ds = normalize_rows(ds)
    lam = float(10 ** rng.uniform(-4, -1))
    if kind == "ridge":
        return Problem.ridge(ds, lam, in_smooth=bool(rng.integers(2)))
    if kind == "lasso":
        return Problem.lasso(ds, lam)
    if kind == "elastic":
        return Problem.elastic_net(ds, lam, float(10 ** rng.uniform(-4, -1)))
    return Problem(ds)


def random_zeta(rng, p):
    alpha = float(rng.uniform(1.5, 20.0))
    return trade_off(p.L, 1.0 / (p.L * alpha), 0.1)


def theta_instance(rng, p, regime="any"):
    """``(x, p_sq)`` for the scaling subproblem.

    ``regime='negative'`` points ``x`` against the least-squares fit so the
    minimizer is below zero; ``'expand'`` shortens a good direction so it
    exceeds one. Both use a tiny ``||p||^2`` so the penalty does not pull
    the minimizer back towards one.
    """
    A, b = oracles.dense_parts(p)
    if regime == "any":
        return rng.standard_normal(p.d) * float(rng.uniform(0.1, 3.0)), float(rng.exponential(1.0))
    x_ls = np.linalg.lstsq(A, b, rcond=None)[0]
    scale = float(rng.uniform(0.05, 0.3))
    x = x_ls * scale * (-1.0 if regime == "negative" else 1.0) + 1e-3 * rng.standard_normal(p.d)
    return x, float(rng.uniform(0.0, 1e-6))


def _timed(name, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


def check_svrg_unbiased(trials=10, seed=0, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        p = random_problem(rng, str(rng.choice(["ridge", "lasso", "none"])))
        x = rng.standard_normal(p.d)
        snap = est.SvrgSnapshot(p, rng.standard_normal(p.d))
        mean = oracles.enumerated_mean(lambda i: est.svrg_estimate(snap, p, i, x)[0], p.n)
        worst = max(worst, float(np.abs(mean - prob.full_grad(p, x)).max()))
    return worst <= tol, f"max |E[v] - grad f| = {worst:.2e} over {trials} triples"


def check_saga_unbiased(trials=10, seed=1, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        p = random_problem(rng, str(rng.choice(["ridge", "lasso", "none"])))
        table = est.SagaTable(p, rng.standard_normal(p.d))
        # scramble the table so the stored points differ per slot
        for _ in range(int(rng.integers(1, 3 * p.n))):
            table.update(int(rng.integers(p.n)), rng.standard_normal(p.d))
        x = rng.standard_normal(p.d)
        mean = oracles.enumerated_mean(lambda i: table.estimate(i, x)[0], p.n)
        worst = max(worst, float(np.abs(mean - prob.full_grad(p, x)).max()))
    return worst <= tol, f"max |E[v] - grad f| = {worst:.2e} over {trials} triples"


def _theta_triples(rng, kind, count, per_problem=50):
    out = []
    while len(out) < count:
        p = random_problem(rng, kind)
        zeta = random_zeta(rng, p)
        ctx = sd.make_context(p.data, zeta)
        for _ in range(min(per_problem, count - len(out))):
            x, p_sq = theta_instance(rng, p)
            out.append((p, ctx, x, p_sq))
    return out


def check_property1(trials=200, seed=2):
    rng = np.random.default_rng(seed)
    bad = 0
    for kind, rule in (("ridge", "theta_ridge"), ("lasso", "theta_lasso")):
        for p, ctx, x, p_sq in _theta_triples(rng, kind, trials):
            res = getattr(sd, rule)(ctx, p, x, p_sq)
            if not sd.verify_property1(p, x, res.theta, ctx.zeta, p_sq):
                bad += 1
    return bad == 0, f"{bad} violations in {2 * trials} triples"


def check_theta_oracle(trials=40, constructed=10, seed=3, ridge_tol=1e-4, lasso_tol=1e-10):
    rng = np.random.default_rng(seed)
    worst_r = worst_l = 0.0
    counts = {"negative": 0, "expand": 0}
    for kind in ("ridge", "lasso"):
        cases = []
        for p, ctx, x, p_sq in _theta_triples(rng, kind, trials, per_problem=10):
            cases.append((p, ctx, x, p_sq))
        for regime in ("negative", "expand"):
            made = 0
            while made < constructed:
                p = random_problem(rng, kind, n=int(rng.integers(20, 40)))
                ctx = sd.make_context(p.data, random_zeta(rng, p))
                x, p_sq = theta_instance(rng, p, regime)
                want = oracles.theta_lasso_two_branch(p, x, ctx.zeta, p_sq) if kind == "lasso" else oracles.theta_by_search(p, x, ctx.zeta, p_sq)
                if (regime == "negative" and want < 0) or (regime == "expand" and want > 1):
                    cases.append((p, ctx, x, p_sq))
                    counts[regime] += 1
                    made += 1
        for p, ctx, x, p_sq in cases:
            if kind == "ridge":
                got = sd.theta_ridge(ctx, p, x, p_sq).theta
                worst_r = max(worst_r, abs(got - oracles.theta_by_search(p, x, ctx.zeta, p_sq)))
            else:
                got = sd.theta_lasso(ctx, p, x, p_sq).theta
                worst_l = max(worst_l, abs(got - oracles.theta_lasso_two_branch(p, x, ctx.zeta, p_sq)))
    ok = worst_r <= ridge_tol and worst_l <= lasso_tol
    detail = (
        f"ridge err {worst_r:.1e}, lasso err {worst_l:.1e}; "
        f"{counts['negative']} theta<0 and {counts['expand']} theta>1 cases"
    )
    return ok, detail


def check_prox_optimality(trials=200, seed=4, tol=1e-10):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        reg = Regularizer(l2=float(rng.choice([0.0, rng.exponential(0.5)])), l1=float(rng.choice([0.0, rng.exponential(0.5)])))
        eta = float(rng.exponential(1.0)) + 1e-3
        y = rng.standard_normal(int(rng.integers(1, 12))) * 2.0
        x = prob.prox(reg, eta, y)
        worst = max(worst, oracles.prox_optimality_residual(reg, eta, y, x) * eta)
    return worst <= tol, f"max scaled residual {worst:.1e} over {trials} points"


def run_battery(quick=False):
    """Run every check; ``quick`` shrinks the sample counts."""
    k = 1 if quick else 4
    checks = [
        ("svrg_unbiased", lambda: check_svrg_unbiased(trials=5 * k)),
        ("saga_unbiased", lambda: check_saga_unbiased(trials=5 * k)),
        ("property1", lambda: check_property1(trials=100 * k)),
        ("theta_oracle", lambda: check_theta_oracle(trials=20 * k, constructed=10)),
        ("prox_optimality", lambda: check_prox_optimality(trials=100 * k)),
    ]
    return [_timed(name, fn) for name, fn in checks]
