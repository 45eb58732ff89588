"""Tests for dataset loading, toy generation, splitting and standardization."""

import numpy as np
import pytest

from sgpbench import datasets
from sgpbench.errors import (
    EmptyDataset,
    NonNumericColumn,
    ParseError,
    UnknownGenerator,
)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadDataset:
    def test_split_sizes_twenty_rows(self, tmp_path):
        rows = "\n".join(f"{i},{i * 2},{i * 3.0}" for i in range(20))
        path = _write(tmp_path, "a,b,target\n" + rows)
        ds = datasets.load_dataset(path, seed=0)
        assert ds.x_train.shape == (17, 2)
        assert ds.x_test.shape == (3, 2)

    def test_standardization_uses_train_statistics(self, tmp_path):
        rng = np.random.default_rng(0)
        body = "\n".join(
            ",".join(format(v, ".10g") for v in row)
            for row in rng.normal(5.0, 3.0, size=(200, 3))
        )
        ds = datasets.load_dataset(_write(tmp_path, "a,b,y\n" + body), seed=1)
        np.testing.assert_allclose(ds.x_train.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(ds.x_train.std(axis=0), 1.0, atol=1e-8)
        assert abs(float(ds.y_train.mean())) < 1e-10
        assert float(ds.y_train.std()) == pytest.approx(1.0, abs=1e-8)
        # test columns use the train statistics, so they are close to but
        # not exactly standardized
        assert abs(float(ds.x_test.mean())) < 0.5

    def test_constant_target_column(self, tmp_path):
        rows = "\n".join(f"{i},7.0" for i in range(30))
        ds = datasets.load_dataset(_write(tmp_path, "x,y\n" + rows), seed=0)
        np.testing.assert_allclose(ds.y_train, 0.0, atol=1e-12)
        assert ds.y_scale == 1.0

    def test_same_path_and_seed_is_bit_identical(self, tmp_path):
        rows = "\n".join(f"{i},{i % 7},{3 * i}" for i in range(40))
        path = _write(tmp_path, "a,b,y\n" + rows)
        first = datasets.load_dataset(path, seed=3)
        second = datasets.load_dataset(path, seed=3)
        np.testing.assert_array_equal(first.x_train, second.x_train)
        np.testing.assert_array_equal(first.y_test, second.y_test)

    def test_different_seeds_differ(self, tmp_path):
        rows = "\n".join(f"{i},{3 * i}" for i in range(50))
        path = _write(tmp_path, "a,y\n" + rows)
        first = datasets.load_dataset(path, seed=0)
        second = datasets.load_dataset(path, seed=1)
        assert not np.array_equal(first.x_train, second.x_train)

    def test_target_by_name_and_index(self, tmp_path):
        rows = "\n".join(f"{i},{10 * i},{100 * i}" for i in range(20))
        path = _write(tmp_path, "a,b,c\n" + rows)
        by_name = datasets.load_dataset(path, target_column="b", seed=0)
        by_index = datasets.load_dataset(path, target_column=1, seed=0)
        np.testing.assert_array_equal(by_name.y_train, by_index.y_train)
        assert by_name.x_train.shape[1] == 2

    def test_whitespace_delimited(self, tmp_path):
        rows = "\n".join(f"{i}  {2 * i}" for i in range(20))
        ds = datasets.load_dataset(_write(tmp_path, "a y\n" + rows), seed=0)
        assert ds.input_dim == 1

    def test_nan_rows_are_rejected(self, tmp_path):
        rows = ["x,y"] + [f"{i},{i}" for i in range(20)] + ["nan,3.0"]
        ds = datasets.load_dataset(_write(tmp_path, "\n".join(rows)), seed=0)
        assert ds.n_train + ds.x_test.shape[0] == 20

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,2\n3\n")
        with pytest.raises(ParseError) as err:
            datasets.load_dataset(path)
        assert err.value.line_number == 3

    def test_non_numeric_column(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,2\nfoo,3\n")
        with pytest.raises(NonNumericColumn):
            datasets.load_dataset(path)

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyDataset):
            datasets.load_dataset(_write(tmp_path, "a,y\n"))

    def test_unknown_target(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,2\n3,4\n")
        with pytest.raises(ParseError):
            datasets.load_dataset(path, target_column="nope")


class TestToyGenerators:
    def test_noiseless_step_is_sign(self):
        x, y = datasets.toy_raw("step1d", 50, noise_sd=0.0, seed=0)
        assert set(np.unique(y)) <= {-1.0, 1.0}
        np.testing.assert_array_equal(y, np.sign(x[:, 0]))

    def test_smooth_is_deterministic(self):
        first = datasets.generate_toy("smooth1d", 100, seed=5)
        second = datasets.generate_toy("smooth1d", 100, seed=5)
        np.testing.assert_array_equal(first.x_train, second.x_train)
        np.testing.assert_array_equal(first.y_train, second.y_train)

    def test_smooth_matches_formula(self):
        x, y = datasets.toy_raw("smooth1d", 64, noise_sd=0.0, seed=2)
        np.testing.assert_allclose(
            y, np.sin(2 * x[:, 0]) + 0.4 * np.cos(5 * x[:, 0]), rtol=1e-12
        )
        assert x.min() >= 0.0 and x.max() <= 6.0

    def test_unknown_generator(self):
        with pytest.raises(UnknownGenerator):
            datasets.generate_toy("sawtooth", 100)

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            datasets.generate_toy("smooth1d", 5)

    def test_split_statistics(self):
        ds = datasets.generate_toy("smooth1d", 200, seed=0)
        assert ds.n_train == 170
        assert ds.x_test.shape[0] == 30
        assert abs(float(ds.y_train.mean())) < 1e-10


class TestSaveCsv:
    def test_round_trip(self, tmp_path):
        x, y = datasets.toy_raw("step1d", 40, seed=1)
        path = str(tmp_path / "toy.csv")
        datasets.save_csv(path, x, y)
        via_file = datasets.load_dataset(path, seed=1)
        direct = datasets.generate_toy("step1d", 40, seed=1)
        np.testing.assert_allclose(via_file.x_train, direct.x_train, rtol=1e-15)
        np.testing.assert_allclose(via_file.y_train, direct.y_train, rtol=1e-15)
