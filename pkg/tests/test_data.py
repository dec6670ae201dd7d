import numpy as np
import pytest

from kcontrol.data import (CLASSIFICATION, Dataset, SchemaError, load_csv,
                           sample_support, synthetic_classification, toy_linear3,
                           toy_sine, write_csv)
from kcontrol.rkhs import KernelSpec


def test_toy_sine_shape_and_targets():
    ds = toy_sine(50, seed=0)
    assert ds.inputs.shape == (50, 1)
    assert np.all(np.abs(ds.inputs) <= np.pi)
    assert np.allclose(ds.targets, np.sin(ds.inputs[:, 0]))
    again = toy_sine(50, seed=0)
    assert np.array_equal(ds.inputs, again.inputs)


def test_toy_linear3_targets():
    ds = toy_linear3(40, seed=1)
    assert ds.inputs.shape == (40, 3)
    assert np.all(np.abs(ds.inputs) <= 3.0)
    expected = 0.5 * ds.inputs[:, 0] - 0.2 * ds.inputs[:, 1] + 0.1 * ds.inputs[:, 2]
    assert np.allclose(ds.targets, expected)


def test_synthetic_classification_separation():
    ds = synthetic_classification(4000, seed=0, d=5, separation=4.0)
    assert ds.task == CLASSIFICATION
    assert set(np.unique(ds.targets)) == {0.0, 1.0}
    mu1 = ds.inputs[ds.targets == 1.0].mean(axis=0)
    mu0 = ds.inputs[ds.targets == 0.0].mean(axis=0)
    assert np.linalg.norm(mu1 - mu0) == pytest.approx(4.0, abs=0.2)


def test_dataset_validation_and_standardize():
    with pytest.raises(ValueError):
        Dataset(inputs=np.zeros((3, 2)), targets=np.zeros(4))
    with pytest.raises(SchemaError):
        Dataset(inputs=np.zeros((2, 1)), targets=np.array([0.0, 0.3]),
                task=CLASSIFICATION)
    ds = Dataset(inputs=np.array([[1.0], [3.0], [5.0]]),
                 targets=np.zeros(3)).standardize()
    assert ds.inputs.mean() == pytest.approx(0.0, abs=1e-12)
    assert ds.inputs.std() == pytest.approx(1.0, abs=1e-12)
    other = Dataset(inputs=np.array([[3.0]]), targets=np.zeros(1))
    mapped = other.standardize(ds.feature_mean, ds.feature_std)
    assert mapped.inputs[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_sample_support_distinct_points_from_train():
    train = toy_sine(100, seed=2)
    support = sample_support(train, 10, seed=0, kernel=KernelSpec(scale=1.0))
    assert support.m == 10
    # every support point is an actual training point
    for p in support.points:
        assert np.any(np.all(np.isclose(train.inputs, p), axis=1))
    tiny = Dataset(inputs=np.array([[0.0], [0.0]]), targets=np.zeros(2))
    with pytest.raises(ValueError):
        sample_support(tiny, 2, seed=0, kernel=KernelSpec(scale=1.0))


def test_csv_round_trip(tmp_path):
    ds = toy_linear3(20, seed=3)
    path = tmp_path / "data.csv"
    write_csv(ds, path, label_column="y", header_comment="generated fixture")
    back = load_csv(path, label_column="y")
    assert np.array_equal(back.inputs, ds.inputs)
    assert np.array_equal(back.targets, ds.targets)


def test_load_csv_schema_and_row_handling(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text("# comment line\n"
                    "id,a,b,target\n"
                    "1,0.5,1.5,2.0\n"
                    "2,oops,1.0,1.0\n"
                    "3,0.25,-1.0,0.5\n")
    ds = load_csv(path, label_column="target")
    # the id column is dropped and the unparsable row skipped
    assert ds.inputs.shape == (2, 2)
    assert np.array_equal(ds.targets, np.array([2.0, 0.5]))
    with pytest.raises(SchemaError):
        load_csv(path, label_column="missing")
    with pytest.raises(SchemaError):
        load_csv(path, label_column="target", feature_columns=["a", "nope"])
    empty = tmp_path / "empty.csv"
    empty.write_text("# nothing\n")
    with pytest.raises(ValueError):
        load_csv(empty, label_column="target")
