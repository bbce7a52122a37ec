import numpy as np
import pytest

from pisurrogate.dataset import Dataset


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    d = Dataset(("a", "b", "y"), rng.normal(size=(7, 3)) * 1e-7, output="y")
    d.to_csv(tmp_path / "d.csv")
    back = Dataset.from_csv(tmp_path / "d.csv", output="y")
    np.testing.assert_array_equal(back.values, d.values)
    assert back.checksum() == d.checksum()
    assert back.input_columns == ("a", "b")


def test_validation():
    with pytest.raises(ValueError):
        Dataset(("a",), np.array([[np.nan]]))
    with pytest.raises(ValueError):
        Dataset(("a", "a"), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        Dataset(("a",), np.zeros((2, 1)), output="y")


def test_values_are_read_only():
    d = Dataset(("a",), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        d.values[0, 0] = 1.0


def test_missing_column():
    d = Dataset(("a",), np.zeros((2, 1)))
    with pytest.raises(KeyError):
        d.column("b")
