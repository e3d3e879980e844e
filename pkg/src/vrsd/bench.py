"""Step-size grid experiments: run every (solver, eta, seed) cell, write traces and a summary."""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .data_io import normalize_rows, read_libsvm, synth_regression
from .problem import Problem
from .solvers import ALGORITHMS, PROX_SVRG, SAGA, SAGA_SD, SC, SVRG, SVRG_SD, SolverConfig, run
from .trace import GAP_FLOOR, _atomic_write, passes_to_gap, reference_optimum, write_trace_csv

GRID_MANTISSAS = (1.0, 2.5, 5.0, 7.5, 10.0)
DEFAULT_GRID_J = (-2, -1, 0)
SYNTH_KEYS = {"n": int, "d": int, "sparsity": float, "noise_sd": float, "seed": int, "feature_mean": float}


class SpecError(ValueError):
    """Invalid run specification; the message says what to change."""


def step_grid(js=DEFAULT_GRID_J):
    """``{1, 2.5, 5, 7.5, 10} x 10^j`` over ``js``, sorted and de-duplicated."""
    vals = {float(f"{c}e{j}") for j in js for c in GRID_MANTISSAS}
    return sorted(vals)


def parse_synth(text):
    """``"n=500,d=20,noise_sd=0.1"`` -> dict."""
    out = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        key, sep, val = part.partition("=")
        if not sep or key not in SYNTH_KEYS:
            raise SpecError(f"bad synth parameter {part!r}; use key=value with keys {', '.join(SYNTH_KEYS)}")
        try:
            out[key] = SYNTH_KEYS[key](val)
        except ValueError:
            raise SpecError(f"synth parameter {key} needs {'an integer' if SYNTH_KEYS[key] is int else 'a number'}, got {val!r}") from None
    if "n" not in out or "d" not in out:
        raise SpecError("synth parameters need at least n and d")
    return out


def parse_reg(text):
    """``none``, ``ridge:L1``, ``lasso:L2`` or ``elastic:L1:L2`` -> ``(kind, lam1, lam2)``."""
    kind, *vals = text.split(":")
    need = {"none": 0, "ridge": 1, "lasso": 1, "elastic": 2}
    if kind not in need:
        raise SpecError(f"unknown regularizer {kind!r}; use none, ridge:LAM, lasso:LAM or elastic:LAM1:LAM2")
    if len(vals) != need[kind]:
        raise SpecError(f"{kind} takes {need[kind]} weight(s), got {text!r}")
    try:
        nums = [float(v) for v in vals]
    except ValueError:
        raise SpecError(f"regularization weights must be numbers: {text!r}") from None
    if not all(v >= 0 for v in nums):
        raise SpecError(f"regularization weights must be non-negative: {text!r}")
    if kind == "ridge":
        return kind, nums[0], 0.0
    if kind == "lasso":
        return kind, 0.0, nums[0]
    if kind == "elastic":
        return kind, nums[0], nums[1]
    return kind, 0.0, 0.0


@dataclass(frozen=True)
class RunSpec:
    """Everything ``cmd_run`` needs. ``etas`` overrides the ``grid_j`` grid; ``alpha`` overrides both."""

    out: str
    data: str = None
    synth: dict = None
    normalize: bool = True
    reg: str = "ridge:1e-4"
    solvers: tuple = ("all",)
    grid_j: tuple = DEFAULT_GRID_J
    etas: tuple = None
    alpha: float = None
    epochs: int = 30
    m: int = None
    m1: int = None
    sigma: float = 0.5
    delta: float = 0.1
    convexity: str = SC
    fastnorm: str = "auto"
    seeds: tuple = (0,)
    target_gap: float = 1e-8
    jobs: int = 1
    timing: bool = True
    write_json: bool = False

    def validate(self):
        if (self.data is None) == (self.synth is None):
            raise SpecError("give exactly one data source: --data PATH or --synth n=..,d=..")
        _, lam1, lam2 = parse_reg(self.reg)
        if lam1 < 0 or lam2 < 0:
            raise SpecError("regularization weights must be >= 0")
        if self.alpha is None and not self.grid():
            raise SpecError("step-size grid is empty")
        if any(not e > 0 for e in self.grid()):
            raise SpecError("step sizes must be positive")
        if not self.seeds:
            raise SpecError("need at least one seed")
        if self.epochs < 1:
            raise SpecError("epochs must be >= 1")
        if self.jobs < 1:
            raise SpecError("jobs must be >= 1")
        if not self.target_gap > 0:
            raise SpecError("target gap must be positive")
        for s in self.solvers:
            if s != "all" and s not in ALGORITHMS:
                raise SpecError(f"unknown solver {s!r}; choose from {', '.join(ALGORITHMS)} or all")
        if self.data is not None and not os.path.exists(self.data):
            raise SpecError(f"data file not found: {self.data}")

    def grid(self):
        if self.etas is not None:
            return sorted(float(e) for e in self.etas)
        return step_grid(self.grid_j)


def load_problem(spec):
    kind, lam1, lam2 = parse_reg(spec.reg)
    if spec.data is not None:
        ds = read_libsvm(spec.data)
    else:
        ds, _ = synth_regression(**spec.synth)
    if spec.normalize:
        ds = normalize_rows(ds)
    if kind == "ridge":
        return Problem.ridge(ds, lam1)
    if kind == "lasso":
        return Problem.lasso(ds, lam2)
    if kind == "elastic":
        return Problem.elastic_net(ds, lam1, lam2)
    return Problem(ds)


def resolve_solvers(spec, p):
    """Expand ``all``; plain SVRG stands in for Prox-SVRG only when ``r = 0``."""
    out = []
    for s in spec.solvers:
        if s == "all":
            base = SVRG if p.reg.l1 == 0 and p.reg.l2 == 0 else PROX_SVRG
            out.extend([base, SAGA, SVRG_SD, SAGA_SD])
        else:
            if s == SVRG and (p.reg.l1 > 0 or p.reg.l2 > 0):
                raise SpecError("svrg needs an unregularized or ridge problem; use prox-svrg for lasso/elastic")
            out.append(s)
    return list(dict.fromkeys(out))


def cells(spec, solvers):
    steps = [("alpha", spec.alpha)] if spec.alpha is not None else [("eta", e) for e in spec.grid()]
    for solver in solvers:
        for key, val in steps:
            for seed in spec.seeds:
                yield solver, key, val, seed


def config_for(spec, solver, key, val, seed):
    return SolverConfig(
        algorithm=solver,
        epochs=spec.epochs,
        m=spec.m,
        m1=spec.m1,
        sigma=spec.sigma,
        delta=spec.delta,
        convexity=spec.convexity if solver == SVRG_SD else SC,
        fastnorm=spec.fastnorm,
        seed=seed,
        **{key: val},
    )


def trace_name(solver, key, val, seed):
    return f"{solver}_{key}{val!r}_seed{seed}.csv"


def _run_cell(p, spec, F_star, cell):
    solver, key, val, seed = cell
    _, trace = run(p, config_for(spec, solver, key, val, seed))
    if not spec.timing:
        trace.records = [replace(r, wall_ns=0) for r in trace.records]
    path = os.path.join(spec.out, "traces", trace_name(*cell))
    write_trace_csv([trace], path, F_star=F_star)
    if spec.write_json:
        from .trace import write_trace_json

        write_trace_json([trace], path[:-4] + ".json")
    return cell, trace


def summarize(results, spec, F_star):
    """Per solver: median passes to the target gap per step size and the best step size.

    Diverged runs count as never reaching the target and a step size whose
    runs all diverged is excluded. Ties on passes go to the lower median gap
    at the crossing record.
    """
    by_solver = {}
    for (solver, key, val, seed), trace in results:
        by_solver.setdefault(solver, {}).setdefault(val, []).append(trace)
    summary = {}
    for solver, grid in by_solver.items():
        rows = {}
        for val, traces in sorted(grid.items()):
            ok = [t for t in traces if not t.diverged]
            ps = [passes_to_gap(t, F_star, spec.target_gap) if not t.diverged else math.inf for t in traces]
            rows[val] = {
                "median_passes": float(np.median(ps)),
                "diverged": len(traces) - len(ok),
                "final_gap": float(np.median([max(t.records[-1].objective - F_star, GAP_FLOOR) for t in ok])) if ok else None,
                "curve": _median_curve(ok, F_star) if ok else None,
            }
        live = {v: r for v, r in rows.items() if r["diverged"] < len(grid[v])}
        entry = {"grid": {repr(v): _public(r) for v, r in rows.items()}}
        if not live:
            entry.update(status="all_diverged", best=None, best_passes=None)
        else:
            best = min(live, key=lambda v: (live[v]["median_passes"], _gap_at_crossing(live[v], live[v]), v))
            bp = live[best]["median_passes"]
            entry.update(
                status="ok" if math.isfinite(bp) else "target_not_reached",
                best=best,
                best_passes=bp if math.isfinite(bp) else None,
                best_dominates=_dominates(live, best),
            )
        summary[solver] = entry
    return summary


def _median_curve(traces, F_star):
    k = min(len(t.records) for t in traces)
    gaps = np.array([[max(r.objective - F_star, GAP_FLOOR) for r in t.records[:k]] for t in traces])
    return {"passes": [r.passes for r in traces[0].records[:k]], "gap": np.median(gaps, axis=0).tolist()}


def _crossing_index(row):
    ps = row["curve"]["passes"]
    target = row["median_passes"]
    if not math.isfinite(target):
        return len(ps) - 1
    return min(range(len(ps)), key=lambda k: abs(ps[k] - target))


def _gap_at_crossing(row, ref_row):
    k = _crossing_index(ref_row)
    gaps = row["curve"]["gap"]
    return gaps[min(k, len(gaps) - 1)]


def _dominates(live, best):
    """At the best step size's crossing record its gap is no larger than any other grid member's."""
    g_best = _gap_at_crossing(live[best], live[best])
    k = _crossing_index(live[best])
    for v, r in live.items():
        if v != best and k < len(r["curve"]["gap"]) and r["curve"]["gap"][k] < g_best:
            return False
    return True


def _public(row):
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items() if k != "curve"}


def cmd_run(spec, log=print):
    """Run the grid. Returns ``(exit_code, summary_dict)``.

    Exit codes: 0 success, 3 when some solver diverged at every step size.
    """
    spec.validate()
    p = load_problem(spec)
    solvers = resolve_solvers(spec, p)
    ref = reference_optimum(p)
    todo = list(cells(spec, solvers))
    log(f"{p.data.name}: n={p.n} d={p.d} L={p.L:.6g}; F*={ref.F_star!r} ({ref.method}); {len(todo)} runs")
    os.makedirs(os.path.join(spec.out, "traces"), exist_ok=True)
    if spec.jobs > 1:
        with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(lambda c: _run_cell(p, spec, ref.F_star, c), todo))
    else:
        results = [_run_cell(p, spec, ref.F_star, c) for c in todo]
    per_solver = summarize(results, spec, ref.F_star)
    summary = {
        "problem": p.describe(),
        "F_star": ref.F_star,
        "optimum_method": ref.method,
        "optimum_residual": ref.residual_check,
        "target_gap": spec.target_gap,
        "spec": _spec_dict(spec),
        "solvers": per_solver,
    }
    _atomic_write(os.path.join(spec.out, "summary.json"), json.dumps(summary, indent=1, default=_json_default))
    code = 0
    for solver, entry in per_solver.items():
        if entry["status"] == "all_diverged":
            log(f"{solver}: every step size diverged")
            code = 3
        else:
            bp = entry["best_passes"]
            log(f"{solver}: best step {entry['best']!r}, " + (f"{bp:g} passes to gap {spec.target_gap:g}" if bp is not None else "target gap not reached"))
    return code, summary


def _spec_dict(spec):
    d = asdict(spec)
    d["grid"] = spec.grid()
    return d


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def load_config(path):
    """Read a TOML config whose keys are ``RunSpec`` fields."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = set(RunSpec.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise SpecError(f"{path}: unknown config key(s) {', '.join(unknown)}")
    if isinstance(raw.get("synth"), str):
        raw["synth"] = parse_synth(raw["synth"])
    for key in ("solvers", "grid_j", "etas", "seeds"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(raw[key]) if isinstance(raw[key], list) else raw[key]
    return raw

