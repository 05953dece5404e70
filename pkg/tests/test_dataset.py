import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from gettree.dataset import (DataError, Dataset, NormalizationTransform, SplitSpec, load_csv,
                             normalize, split)


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_named_target(tmp_path):
    raw = load_csv(write(tmp_path, "a,b,y\n0,1,2\n1,0,3\n2,2,4"), "y", has_header=True)
    np.testing.assert_array_equal(raw.X, [[0, 1], [1, 0], [2, 2]])
    np.testing.assert_array_equal(raw.y, [2, 3, 4])
    assert raw.feature_names == ["a", "b"]


def test_load_csv_index_target_without_header(tmp_path):
    raw = load_csv(write(tmp_path, "0,1,2\n1,0,3\n"), -1)
    np.testing.assert_array_equal(raw.y, [2, 3])


def test_load_csv_empty_file(tmp_path):
    with pytest.raises(DataError, match="no rows"):
        load_csv(write(tmp_path, ""), 0)


def test_load_csv_nan_names_row(tmp_path):
    with pytest.raises(DataError, match="row 3"):
        load_csv(write(tmp_path, "a,y\n1,2\nNaN,3\n"), "y", has_header=True)


@pytest.mark.parametrize("text,target,match", [
    ("a,y\n1,2\n", "z", "missing target"),
    ("a,y\n1,2\n1\n", "y", "expected 2 columns"),
    ("a,y\n1,abc\n", "y", "cannot parse"),
    ("a,y\n1,inf\n", "y", "non-finite"),
])
def test_load_csv_errors(tmp_path, text, target, match):
    with pytest.raises(DataError, match=match):
        load_csv(write(tmp_path, text), target, has_header=True)


def test_normalize_examples():
    X = np.array([[2.0, 5.0, 0.0], [4.0, 5.0, 1.0], [6.0, 5.0, 1.0]])
    ds = normalize(X, y=np.array([0.0, 1.0, 0.5]))
    np.testing.assert_array_equal(ds.X[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(ds.X[:, 1], [0.0, 0.0, 0.0])
    np.testing.assert_array_equal(ds.X[:, 2], [0.0, 1.0, 1.0])
    np.testing.assert_array_equal(ds.y, [0.0, 1.0, 0.5])


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(float, st.tuples(st.integers(2, 20), st.integers(1, 4)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_round_trip(X):
    y = X[:, 0].copy()
    ds = normalize(X, y=y)
    assert np.all((ds.X >= 0) & (ds.X <= 1)) and np.all((ds.y >= 0) & (ds.y <= 1))
    back = ds.norm.inverse_X(ds.X)
    varying = ds.norm.x_max > ds.norm.x_min
    scale = np.maximum(np.abs(X[:, varying]), np.ptp(X[:, varying], axis=0))
    assert np.all(np.abs(back[:, varying] - X[:, varying]) <= 1e-12 * np.maximum(scale, 1e-300))
    if np.ptp(y) > 0:
        np.testing.assert_allclose(ds.norm.inverse_y(ds.y), y, rtol=1e-12,
                                   atol=1e-12 * np.abs(y).max())


def test_normalize_uses_fit_rows():
    X = np.array([[0.0], [10.0], [20.0]])
    ds = normalize(X, y=np.array([0.0, 1.0, 2.0]), fit_rows=[0, 1])
    np.testing.assert_array_equal(ds.X[:, 0], [0.0, 1.0, 2.0])


def test_transform_dict_round_trip():
    t = NormalizationTransform.fit(np.array([[1.0, 2.0], [3.0, 5.0]]), np.array([1.0, 9.0]))
    t2 = NormalizationTransform.from_dict(t.to_dict())
    np.testing.assert_array_equal(t.x_min, t2.x_min)
    assert t.y_max == t2.y_max


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(DataError):
        Dataset(np.zeros((0, 2)), np.zeros(0))


@pytest.mark.parametrize("mode,sizes", [("holdout_75_25", (75, 25)),
                                        ("holdout_50_25_25", (50, 25, 25))])
def test_split_sizes(mode, sizes):
    part = split(100, SplitSpec(mode, seed=0))
    got = (len(part.train), len(part.test)) if len(sizes) == 2 else (
        len(part.train), len(part.validation), len(part.test))
    assert got == sizes
    pieces = [part.train, part.test] + ([part.validation] if part.validation is not None else [])
    union = np.concatenate(pieces)
    assert sorted(union.tolist()) == list(range(100))


def test_split_deterministic():
    a = split(57, SplitSpec("holdout_50_25_25", seed=3))
    b = split(57, SplitSpec("holdout_50_25_25", seed=3))
    np.testing.assert_array_equal(a.train, b.train)
    np.testing.assert_array_equal(a.validation, b.validation)
    c = split(57, SplitSpec("holdout_50_25_25", seed=4))
    assert not np.array_equal(a.train, c.train)


def test_kfold_partition():
    part = split(23, SplitSpec("kfold", seed=1, k=4))
    vals = np.concatenate([va for _, va in part.folds])
    assert sorted(vals.tolist()) == list(range(23))
    for tr, va in part.folds:
        assert not set(tr) & set(va)
        assert len(tr) + len(va) == 23


def test_split_empty_partition():
    with pytest.raises(DataError, match="empty"):
        split(2, SplitSpec("holdout_50_25_25"))


def test_split_spec_parse():
    assert SplitSpec.parse("75/25").mode == "holdout_75_25"
    assert SplitSpec.parse("cv:5", seed=2) == SplitSpec("kfold", 2, 5)
    with pytest.raises(DataError):
        SplitSpec.parse("60/40")
