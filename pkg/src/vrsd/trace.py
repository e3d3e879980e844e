"""Run traces, reference optima and trace (de)serialization."""

import csv
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .problem import full_grad, objective, prox

CSV_FIELDS = ["solver", "dataset", "seed", "epoch", "passes", "wall_ns", "objective", "gap"]
GAP_FLOOR = 1e-16


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    epoch: int
    passes: float
    wall_ns: int
    objective: float


@dataclass
class Trace:
    solver: str
    dataset: str
    seed: int
    records: list = field(default_factory=list)
    config_hash: str = field(default="", compare=False)
    status: str = field(default="ok", compare=False)
    stats: dict = field(default_factory=dict, compare=False)

    def add(self, epoch, passes, wall_ns, obj):
        self.records.append(TraceRecord(int(epoch), float(passes), int(wall_ns), float(obj)))

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])

    @property
    def passes(self):
        return np.array([r.passes for r in self.records])

    @property
    def wall_ns(self):
        return np.array([r.wall_ns for r in self.records])

    @property
    def diverged(self):
        return self.status == "diverged"

    def to_dict(self):
        return {
            "solver": self.solver,
            "dataset": self.dataset,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "status": self.status,
            "stats": self.stats,
            "records": [asdict(r) for r in self.records],
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            solver=obj["solver"],
            dataset=obj["dataset"],
            seed=int(obj["seed"]),
            records=[TraceRecord(int(r["epoch"]), float(r["passes"]), int(r["wall_ns"]), float(r["objective"])) for r in obj["records"]],
            config_hash=obj.get("config_hash", ""),
            status=obj.get("status", "ok"),
            stats=obj.get("stats", {}),
        )


@dataclass(frozen=True, eq=False)
class ReferenceOptimum:
    x_star: np.ndarray
    F_star: float
    method: str
    residual_check: float
    dataset: str = ""


NORMAL_EQUATIONS = "normal_equations"
LONG_PROX_GRADIENT = "long_prox_gradient"


def reference_optimum(p, max_iter=200_000, rel_tol=1e-14):
    """Solver-independent minimizer of ``F``.

    Problems without an L1 term are solved from the normal equations
    ``(A^T A / n + lambda I) x = A^T b / n``. Everything else, and singular
    unregularized systems, go through long proximal gradient descent.
    """
    ds = p.data
    A = ds.to_csr()
    gram = np.asarray((A.T @ A).todense()) / ds.n
    rhs = np.asarray(A.T @ ds.labels) / ds.n
    lam = p.total_l2
    if p.reg.l1 == 0.0:
        H = gram + lam * np.eye(ds.d)
        try:
            c, low = _cho_factor(H)
        except np.linalg.LinAlgError:
            c = None
        if c is not None:
            from scipy.linalg import cho_solve

            x = cho_solve((c, low), rhs)
            # one step of iterative refinement
            x = x + cho_solve((c, low), rhs - H @ x)
            res = float(np.abs(full_grad(p, x) + p.reg.l2 * x).max())
            return ReferenceOptimum(x, objective(p, x), NORMAL_EQUATIONS, res, ds.name)
    return _prox_gradient_optimum(p, gram, rhs, max_iter, rel_tol)


def _cho_factor(H):
    from scipy.linalg import cho_factor

    if np.linalg.cond(H) > 1e13:
        raise np.linalg.LinAlgError("ill-conditioned")
    return cho_factor(H)


def _prox_gradient_optimum(p, gram, rhs, max_iter, rel_tol):
    H = gram + p.smooth_l2 * np.eye(p.d)
    lip = float(np.linalg.eigvalsh(H)[-1]) if p.d else 0.0
    eta = 1.0 / lip if lip > 0 else 1.0
    x = np.zeros(p.d)
    for _ in range(max_iter):
        x_new = prox(p.reg, eta, x - eta * (H @ x - rhs))
        change = float(np.linalg.norm(x_new - x))
        x = x_new
        if change <= rel_tol * max(1.0, float(np.linalg.norm(x))):
            break
    grad = H @ x - rhs
    mapping = (x - prox(p.reg, eta, x - eta * grad)) / eta
    res = float(np.abs(mapping).max()) if p.d else 0.0
    return ReferenceOptimum(x, objective(p, x), LONG_PROX_GRADIENT, res, p.data.name)


def gap(trace, ref, check_dataset=True):
    """``[(passes, F - F*, wall_ns), ...]`` with the gap floored at 1e-16."""
    if check_dataset and ref.dataset and trace.dataset != ref.dataset:
        raise ValueError(f"trace is for {trace.dataset!r} but optimum is for {ref.dataset!r}")
    return [(r.passes, max(r.objective - ref.F_star, GAP_FLOOR), r.wall_ns) for r in trace.records]


def passes_to_gap(trace, F_star, target):
    """Effective passes at the first record whose gap is at most ``target`` (inf if never)."""
    for r in trace.records:
        if math.isfinite(r.objective) and r.objective - F_star <= target:
            return r.passes
    return math.inf


def _fmt(v):
    return repr(float(v))


def _atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace_csv(traces, path, F_star=None):
    """Write traces under the header ``solver,dataset,seed,epoch,passes,wall_ns,objective,gap``.

    Doubles use shortest round-trip rendering. ``gap`` is left empty when no
    optimum is supplied.
    """
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for t in traces:
        for r in t.records:
            g = "" if F_star is None else _fmt(max(r.objective - F_star, GAP_FLOOR))
            w.writerow([t.solver, t.dataset, t.seed, r.epoch, _fmt(r.passes), r.wall_ns, _fmt(r.objective), g])
    _atomic_write(path, buf.getvalue())


def read_trace_csv(path):
    traces = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_FIELDS:
            raise TraceFormatError(f"{path}: bad header {header!r}")
        current = None
        for rowno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_FIELDS):
                raise TraceFormatError(f"{path}: row {rowno} has {len(row)} fields, expected {len(CSV_FIELDS)}")
            solver, dataset, seed, epoch, passes, wall_ns, obj, _gap = row
            try:
                key = (solver, dataset, int(seed))
                rec = TraceRecord(int(epoch), float(passes), int(wall_ns), float(obj))
            except ValueError as exc:
                raise TraceFormatError(f"{path}: row {rowno}: {exc}") from None
            if current is None or (current.solver, current.dataset, current.seed) != key:
                current = Trace(*key)
                traces.append(current)
            current.records.append(rec)
    return traces


def write_trace_json(traces, path):
    _atomic_write(path, json.dumps([t.to_dict() for t in traces], indent=1))


def read_trace_json(path):
    with open(path) as fh:
        return [Trace.from_dict(obj) for obj in json.load(fh)]
