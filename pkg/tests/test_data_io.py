import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrsd.data_io import (
    Dataset,
    LibsvmParseError,
    format_libsvm,
    normalize_rows,
    parse_libsvm,
    read_libsvm,
    synth_regression,
    write_libsvm,
)


def test_parse_basic_example():
    ds = parse_libsvm("1 1:0.5 3:2.0\n-1 2:1.0")
    assert (ds.n, ds.d) == (2, 3)
    assert ds.rows == [[(0, 0.5), (2, 2.0)], [(1, 1.0)]]
    assert ds.labels.tolist() == [1.0, -1.0]


def test_parse_empty():
    ds = parse_libsvm("")
    assert (ds.n, ds.d) == (0, 0)


def test_parse_bytes_comments_and_expected_dim():
    ds = parse_libsvm(b"# header\n2.5 4:1 # trailing\n\n0 1:-3\n", expected_dim=10)
    assert ds.n == 2 and ds.d == 10
    assert ds.rows == [[(3, 1.0)], [(0, -3.0)]]
    assert ds.labels.tolist() == [2.5, 0.0]


def test_expected_dim_smaller_than_observed_keeps_max():
    assert parse_libsvm("1 5:1", expected_dim=2).d == 5


def test_explicit_zeros_dropped():
    ds = parse_libsvm("1 1:0 2:3")
    assert ds.rows == [[(1, 3.0)]]
    assert ds.nnz == 1


@pytest.mark.parametrize(
    "text, line",
    [
        ("1 2:abc", 1),
        ("1 1:1\nx 1:2", 2),
        ("1 0:1", 1),
        ("1 -2:1", 1),
        ("1 2:1 2:3", 1),
        ("1 3:1 2:3", 1),
        ("1 1.5:2", 1),
        ("1 12", 1),
    ],
)
def test_parse_errors_report_line(text, line):
    with pytest.raises(LibsvmParseError) as exc:
        parse_libsvm(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_parse_error_has_column():
    with pytest.raises(LibsvmParseError) as exc:
        parse_libsvm("1 1:2 2:abc")
    # 1-based column of the offending value
    assert exc.value.column == 9


def test_dataset_invariants_after_parse():
    ds = parse_libsvm("1 1:3 4:4\n2 2:1\n3")
    for i in range(ds.n):
        idx, val = ds.row(i)
        assert np.all(np.diff(idx) > 0)
        assert np.all(idx < ds.d)
        assert np.all(val != 0)
    np.testing.assert_allclose(ds.row_norm_sq, [25.0, 1.0, 0.0])


def test_dataset_is_read_only():
    ds = parse_libsvm("1 1:3")
    with pytest.raises(ValueError):
        ds.data[0] = 2.0


def test_normalize_examples():
    ds = normalize_rows(Dataset.from_dense([[3.0, 4.0], [0.0, 0.0]], [1.0, 2.0]))
    np.testing.assert_allclose(ds.to_dense()[0], [0.6, 0.8], rtol=0, atol=1e-15)
    assert ds.to_dense()[1].tolist() == [0.0, 0.0]
    assert ds.row_norm_sq[1] == 0.0
    assert abs(ds.row_norm_sq[0] - 1.0) <= 1e-12


def test_gzip_round_trip(tmp_path):
    ds, _ = synth_regression(20, 5, sparsity=0.5, noise_sd=0.1, seed=3)
    path = tmp_path / "d.libsvm.gz"
    write_libsvm(ds, path)
    with gzip.open(path, "rt") as fh:
        assert fh.readline().count(":") == len(ds.row(0)[0])
    assert read_libsvm(path).same_as(ds)


def test_ijcnn1_shape_parses(tmp_path):
    rng = np.random.default_rng(0)
    n, d = 49_990, 22
    lines = []
    for i in range(n):
        k = rng.integers(1, d + 1)
        cols = np.sort(rng.choice(d, size=k, replace=False)) + 1
        if i == 0:
            cols = np.arange(1, d + 1)
        lines.append(("1" if i % 2 else "-1") + "".join(f" {c}:{rng.random() + 0.1:.4f}" for c in cols))
    path = tmp_path / "ijcnn1"
    path.write_text("\n".join(lines) + "\n")
    ds = read_libsvm(path)
    assert (ds.n, ds.d) == (49_990, 22)


def test_synth_zero_noise_exact():
    ds, planted = synth_regression(4, 2, sparsity=1.0, noise_sd=0.0, seed=7)
    np.testing.assert_array_equal(ds.labels, ds.to_dense() @ planted)


def test_synth_deterministic():
    a, pa = synth_regression(30, 6, sparsity=0.4, noise_sd=0.2, seed=9)
    b, pb = synth_regression(30, 6, sparsity=0.4, noise_sd=0.2, seed=9)
    assert a.same_as(b) and np.array_equal(pa, pb)


def test_synth_planted_beats_zero():
    ds, planted = synth_regression(100, 10, noise_sd=0.01, seed=1)
    A = ds.to_dense()
    assert np.linalg.norm(A @ planted - ds.labels) <= np.linalg.norm(ds.labels)


@pytest.mark.parametrize("sparsity", [0.0, -0.1, 1.5])
def test_synth_rejects_bad_sparsity(sparsity):
    with pytest.raises(ValueError):
        synth_regression(5, 2, sparsity=sparsity)


def test_synth_feature_mean_shifts_columns():
    ds, _ = synth_regression(2000, 3, seed=0, feature_mean=2.0)
    np.testing.assert_allclose(ds.to_dense().mean(axis=0), 2.0, atol=0.1)


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False).filter(lambda v: v != 0.0)


@st.composite
def datasets(draw):
    n = draw(st.integers(0, 6))
    d = draw(st.integers(1, 6))
    rows = []
    for _ in range(n):
        cols = draw(st.lists(st.integers(0, d - 1), unique=True, max_size=d))
        rows.append([(j, draw(finite)) for j in sorted(cols)])
    labels = draw(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=n, max_size=n))
    return Dataset.from_rows(rows, labels, d=d)


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_serialize_parse_round_trip(ds):
    back = parse_libsvm(format_libsvm(ds), expected_dim=ds.d)
    assert back.same_as(ds)


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_normalize_idempotent_and_unit(ds):
    once = normalize_rows(ds)
    twice = normalize_rows(once)
    np.testing.assert_allclose(twice.data, once.data, rtol=0, atol=1e-15)
    nz = once.row_norm_sq > 0
    assert np.all(np.abs(np.sqrt(once.row_norm_sq[nz]) - 1.0) <= 1e-12)


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_row_norm_cache_matches_recomputed(ds):
    recomputed = (ds.to_dense() ** 2).sum(axis=1)
    np.testing.assert_allclose(ds.row_norm_sq, recomputed, rtol=1e-12, atol=0)
