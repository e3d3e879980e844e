"""LIBSVM parsing, row normalization and synthetic regression data.

Rows are held in CSR form (``indptr``/``indices``/``data``) with 0-based,
strictly increasing column indices and no explicit zeros.
"""

import gzip
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


class LibsvmParseError(ValueError):
    def __init__(self, message, line, column=None):
        self.line = line
        self.column = column
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable row-major sparse design matrix with regression labels."""

    n: int
    d: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    row_norm_sq: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.row_norm_sq is None:
            object.__setattr__(self, "row_norm_sq", _row_norm_sq(self.indptr, self.data))
        for arr in (self.indptr, self.indices, self.data, self.labels, self.row_norm_sq):
            arr.setflags(write=False)

    @classmethod
    def from_rows(cls, rows, labels, d=None, name="dataset"):
        """Build from a list of ``[(index, value), ...]`` rows (0-based)."""
        indptr = [0]
        indices, data = [], []
        for row in rows:
            for j, v in row:
                if v != 0.0:
                    indices.append(int(j))
                    data.append(float(v))
            indptr.append(len(indices))
        max_idx = max(indices) + 1 if indices else 0
        d = max_idx if d is None else max(d, max_idx)
        return cls(
            n=len(rows),
            d=d,
            indptr=np.asarray(indptr, dtype=np.int64),
            indices=np.asarray(indices, dtype=np.int64),
            data=np.asarray(data, dtype=np.float64),
            labels=np.asarray(labels, dtype=np.float64),
            name=name,
        )

    @classmethod
    def from_dense(cls, A, b, name="dataset"):
        A = np.asarray(A, dtype=np.float64)
        csr = sparse.csr_matrix(A)
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(
            n=A.shape[0],
            d=A.shape[1],
            indptr=csr.indptr.astype(np.int64),
            indices=csr.indices.astype(np.int64),
            data=csr.data.astype(np.float64),
            labels=np.asarray(b, dtype=np.float64).copy(),
            name=name,
        )

    @property
    def nnz(self):
        return int(self.indptr[-1]) if len(self.indptr) else 0

    @property
    def density(self):
        if self.n == 0 or self.d == 0:
            return 0.0
        return self.nnz / (self.n * self.d)

    @property
    def rows(self):
        out = []
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out.append([(int(j), float(v)) for j, v in zip(self.indices[lo:hi], self.data[lo:hi])])
        return out

    def row(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def to_csr(self):
        return sparse.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.d))

    def to_dense(self):
        return self.to_csr().toarray()

    def same_as(self, other):
        return (
            self.n == other.n
            and self.d == other.d
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
            and np.array_equal(self.labels, other.labels)
        )


def _row_norm_sq(indptr, data):
    if len(indptr) <= 1:
        return np.zeros(0)
    sq = data * data
    # per-row sums in storage order
    out = np.zeros(len(indptr) - 1)
    for i in range(len(out)):
        out[i] = sq[indptr[i]:indptr[i + 1]].sum()
    return out


def parse_libsvm(text, expected_dim=None, name="dataset"):
    """Parse LIBSVM lines ``label idx:val ...`` (1-based indices).

    ``text`` may be ``bytes`` or ``str``. Anything after ``#`` is ignored.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    indptr = [0]
    indices, data, labels = [], [], []
    max_idx = 0
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        tokens = _tokens_with_columns(line)
        label_tok, label_col = tokens[0]
        try:
            labels.append(float(label_tok))
        except ValueError:
            raise LibsvmParseError(f"non-numeric label {label_tok!r}", lineno, label_col) from None
        prev = 0
        for tok, col in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError(f"expected idx:val, got {tok!r}", lineno, col)
            try:
                idx = int(idx_s)
            except ValueError:
                raise LibsvmParseError(f"non-integer index {idx_s!r}", lineno, col) from None
            try:
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError(f"non-numeric value {val_s!r}", lineno, col + len(idx_s) + 1) from None
            if idx <= 0:
                raise LibsvmParseError(f"index must be >= 1, got {idx}", lineno, col)
            if idx == prev:
                raise LibsvmParseError(f"duplicate index {idx}", lineno, col)
            if idx < prev:
                raise LibsvmParseError(f"indices not increasing ({idx} after {prev})", lineno, col)
            prev = idx
            max_idx = max(max_idx, idx)
            if val != 0.0:
                indices.append(idx - 1)
                data.append(val)
        indptr.append(len(indices))
    d = max_idx if expected_dim is None else max(max_idx, int(expected_dim))
    return Dataset(
        n=len(labels),
        d=d,
        indptr=np.asarray(indptr, dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int64),
        data=np.asarray(data, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.float64),
        name=name,
    )


def _tokens_with_columns(line):
    out = []
    col = 0
    for part in line.split(" "):
        for sub in part.split("\t"):
            if sub.strip():
                out.append((sub.strip(), col + 1 + (len(sub) - len(sub.lstrip()))))
            col += len(sub) + 1
    return out


def read_libsvm(path, expected_dim=None):
    """Read a LIBSVM file; ``.gz`` files are decompressed transparently."""
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    stem = path.rsplit("/", 1)[-1]
    return parse_libsvm(raw, expected_dim=expected_dim, name=stem)


def format_libsvm(ds):
    lines = []
    for i in range(ds.n):
        idx, val = ds.row(i)
        parts = [repr(float(ds.labels[i]))]
        parts += [f"{j + 1}:{v!r}" for j, v in zip(idx.tolist(), val.tolist())]
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def write_libsvm(ds, path):
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wt") as fh:
        fh.write(format_libsvm(ds))


def normalize_rows(ds):
    """Scale every non-zero row to unit Euclidean norm; zero rows are kept."""
    data = ds.data.copy()
    norms = np.sqrt(ds.row_norm_sq)
    for i in range(ds.n):
        if norms[i] > 0.0:
            lo, hi = ds.indptr[i], ds.indptr[i + 1]
            data[lo:hi] /= norms[i]
    return Dataset(
        n=ds.n,
        d=ds.d,
        indptr=ds.indptr.copy(),
        indices=ds.indices.copy(),
        data=data,
        labels=ds.labels.copy(),
        name=ds.name,
    )


def synth_regression(n, d, sparsity=1.0, noise_sd=0.0, seed=0, name=None, feature_mean=0.0):
    """Random sparse regression problem ``b = A @ planted + noise``.

    Entries of A are normal with mean ``feature_mean`` and unit variance,
    each kept with probability ``sparsity``. A non-zero mean mimics the
    uncentered features of typical LIBSVM data and raises the condition
    number. Returns ``(dataset, planted_x)``.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if not 0.0 < sparsity <= 1.0:
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    if feature_mean:
        A += feature_mean
    if sparsity < 1.0:
        A *= rng.random((n, d)) < sparsity
    planted = rng.standard_normal(d)
    b = A @ planted
    if noise_sd > 0.0:
        b = b + noise_sd * rng.standard_normal(n)
    name = name or f"synth-n{n}-d{d}-s{seed}"
    return Dataset.from_dense(A, b, name=name), planted
