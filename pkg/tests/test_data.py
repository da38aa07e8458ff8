import numpy as np
import pytest

from krrsolve.data import Dataset, load_csv, load_libsvm
from krrsolve.errors import InputError


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset(np.empty((0, 2)))
    with pytest.raises(InputError):
        Dataset(np.ones((3, 2)), np.ones(2))


def test_libsvm_roundtrip(tmp_path):
    p = tmp_path / "toy.txt"
    p.write_text("1 1:0.5 3:-2\n-1 2:4\n+1\n")
    ds = load_libsvm(str(p))
    np.testing.assert_array_equal(ds.targets, [1, -1, 1])
    np.testing.assert_array_equal(
        ds.features,
        [[0.5, 0.0, -2.0], [0.0, 4.0, 0.0], [0.0, 0.0, 0.0]],
    )


def test_libsvm_bad_rows(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 0:2\n")
    with pytest.raises(InputError, match="1-based"):
        load_libsvm(str(p))
    p.write_text("1 2:nan\n")
    with pytest.raises(InputError, match="bad.txt:1"):
        load_libsvm(str(p))
    p.write_text("x 1:2\n")
    with pytest.raises(InputError, match="label"):
        load_libsvm(str(p))


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("a,target,b\n1,10,2\n3,20,4\n")
    ds = load_csv(str(p), target_column="target")
    np.testing.assert_array_equal(ds.targets, [10.0, 20.0])
    np.testing.assert_array_equal(ds.features, [[1.0, 2.0], [3.0, 4.0]])


def test_csv_errors(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InputError, match="no column"):
        load_csv(str(p), target_column="missing")
    p.write_text("a,b\n1,oops\n")
    with pytest.raises(InputError, match="toy.csv:2"):
        load_csv(str(p))
    p.write_text("a,b\n1,inf\n")
    with pytest.raises(InputError, match="toy.csv:2"):
        load_csv(str(p))


def test_csv_without_target(tmp_path):
    p = tmp_path / "feat.csv"
    p.write_text("a,b\n1,2\n3,4\n")
    ds = load_csv(str(p))
    assert ds.targets is None
    assert ds.features.shape == (2, 2)
