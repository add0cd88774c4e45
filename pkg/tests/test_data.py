import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pasa.data import (
    CategoricalColumn,
    CsvSchema,
    NumericColumn,
    SimSpec,
    read_csv_batches,
    simulate,
    simulate_full,
    split_train_test,
    write_csv,
)
from pasa.errors import ConfigError, IngestionError
from pasa.executor import partition
from pasa.glm import BatchData


def offdiag_corr(X):
    C = np.corrcoef(X, rowvar=False)
    return C[~np.eye(len(C), dtype=bool)]


class TestSimulate:
    @pytest.mark.parametrize("rho", [0.0, 0.5])
    def test_compound_symmetry(self, rho):
        b = simulate_full(SimSpec("gaussian", 100_000, rho=rho, seed=1))
        np.testing.assert_array_equal(b.X[:, 0], 1.0)
        np.testing.assert_allclose(offdiag_corr(b.X[:, 1:]), rho, atol=0.02)
        np.testing.assert_allclose(b.X[:, 1:].var(axis=0), 1.0, atol=0.02)

    def test_negative_rho(self):
        b = simulate_full(SimSpec("gaussian", 100_000, rho=-0.2, seed=2))
        np.testing.assert_allclose(offdiag_corr(b.X[:, 1:]), -0.2, atol=0.02)

    def test_bernoulli_null_mean(self):
        b = simulate_full(SimSpec("bernoulli", 100_000, beta0=(0.0,) * 5, seed=3))
        assert abs(b.y.mean() - 0.5) <= 0.01
        assert set(np.unique(b.y)) == {0.0, 1.0}

    def test_gaussian_noise_variance(self):
        spec = SimSpec("gaussian", 100_000, seed=4)
        b = simulate_full(spec)
        resid = b.y - b.X @ np.asarray(spec.beta0)
        assert resid.var() == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("rho", [1.0, -1.0, -0.4])
    def test_invalid_rho(self, rho):
        with pytest.raises(ConfigError):
            SimSpec("gaussian", 10, rho=rho)

    def test_beta_length_defines_p(self):
        assert SimSpec("gaussian", 10, beta0=(1.0, 2.0, 3.0)).p == 3
        b = simulate_full(SimSpec("gaussian", 10, beta0=(1.0, 2.0), intercept=False))
        assert b.X.shape == (10, 2)

    def test_reproducible_and_restartable(self):
        spec = SimSpec("bernoulli", 20_000, seed=5)
        stream = simulate(spec, 3000)
        a = [b.X for b in stream]
        b = [b.X for b in stream]
        c = [b.X for b in simulate(spec, 3000)]
        for x, y, z in zip(a, b, c):
            np.testing.assert_array_equal(x, y)
            np.testing.assert_array_equal(x, z)
        other = simulate_full(SimSpec("bernoulli", 20_000, seed=6))
        assert not np.array_equal(np.vstack(a), other.X)

    @settings(max_examples=15, deadline=None)
    @given(size=st.integers(1, 20_000))
    def test_batch_size_invariance(self, size):
        spec = SimSpec("gaussian", 17_000, seed=7)
        full = simulate_full(spec)
        batches = list(simulate(spec, size))
        assert all(b.s == size for b in batches[:-1])
        assert batches[-1].s <= size
        joined = BatchData.concat(batches)
        np.testing.assert_array_equal(joined.X, full.X)
        np.testing.assert_array_equal(joined.y, full.y)


def write_text(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestCsv:
    def test_dummy_coding(self, tmp_path):
        path = write_text(tmp_path, "y,g\n1,a\n0,b\n1,b\n")
        schema = CsvSchema("y", categorical=[CategoricalColumn("g", ("a", "b"), "a")])
        (b,) = read_csv_batches(path, schema, 10)
        assert schema.column_names == ["(Intercept)", "g_b"]
        np.testing.assert_array_equal(b.X[:, 1], [0, 1, 1])
        np.testing.assert_array_equal(b.y, [1, 0, 1])

    def test_interaction_is_product(self, tmp_path):
        path = write_text(tmp_path, "y,clicks,g\n0,2.5,g3\n1,4,g1\n0,-1,g3\n")
        schema = CsvSchema("y", numeric=["clicks"],
                           categorical=[CategoricalColumn("g", ("g1", "g2", "g3"), "g1")],
                           interactions=[("g_g3", "clicks")], p=5)
        (b,) = read_csv_batches(path, schema, 10)
        cols = schema.column_names
        assert cols == ["(Intercept)", "clicks", "g_g2", "g_g3", "g_g3:clicks"]
        np.testing.assert_array_equal(b.X[:, 4], b.X[:, 1] * b.X[:, 3])
        np.testing.assert_array_equal(b.X[:, 4], [2.5, 0, -1])

    def test_declared_width(self):
        with pytest.raises(ConfigError):
            CsvSchema("y", numeric=["a", "b"], p=4)

    def test_duplicate_names(self):
        with pytest.raises(ConfigError):
            CsvSchema("y", numeric=["a", "a"])

    def test_unknown_reference(self):
        with pytest.raises(ConfigError):
            CategoricalColumn("g", ("a", "b"), "c")

    def test_round_trip_bit_exact(self, tmp_path):
        spec = SimSpec("gaussian", 3000, seed=9)
        cols = ["(Intercept)", "x2", "x3", "x4", "x5"]
        path = tmp_path / "sim.csv"
        assert write_csv(path, simulate(spec, 700), cols) == 3000
        schema = CsvSchema("y", numeric=cols[1:])
        back = BatchData.concat(list(read_csv_batches(path, schema, 1000)))
        full = simulate_full(spec)
        np.testing.assert_array_equal(back.X, full.X)
        np.testing.assert_array_equal(back.y, full.y)

    def test_batching(self, tmp_path):
        path = write_text(tmp_path, "y,a\n" + "".join(f"{i % 2},{i}\n" for i in range(7)))
        sizes = [b.s for b in read_csv_batches(path, CsvSchema("y", numeric=["a"]), 3)]
        assert sizes == [3, 3, 1]

    def test_two_pass_standardization(self, tmp_path):
        vals = [1.0, 2.0, 3.0, 6.0]
        path = write_text(tmp_path, "y,a\n" + "".join(f"0,{v}\n" for v in vals))
        schema = CsvSchema("y", numeric=[NumericColumn("a", standardize=True)], two_pass=True)
        (b,) = read_csv_batches(path, schema, 10)
        expected = (np.array(vals) - np.mean(vals)) / np.std(vals, ddof=1)
        np.testing.assert_allclose(b.X[:, 1], expected, rtol=1e-14)

    def test_supplied_constants(self, tmp_path):
        path = write_text(tmp_path, "y,a\n0,5\n1,7\n")
        schema = CsvSchema("y", numeric=[NumericColumn("a", True, center=5.0, scale=2.0)])
        (b,) = read_csv_batches(path, schema, 10)
        np.testing.assert_array_equal(b.X[:, 1], [0.0, 1.0])

    def test_standardize_needs_constants(self):
        with pytest.raises(ConfigError):
            CsvSchema("y", numeric=[NumericColumn("a", standardize=True)])

    @pytest.mark.parametrize("text, needle", [
        ("y,b\n1,2\n", "missing column"),
        ("y,a\n1,2\n0,oops\n", "row 3, column 'a'"),
        ("y,a,g\n1,2,z\n", "unknown level 'z'"),
        ("y,a,g\n1,2\n", "row 2"),
        ("", "header"),
    ])
    def test_ingestion_errors(self, tmp_path, text, needle):
        path = write_text(tmp_path, text)
        schema = CsvSchema("y", numeric=["a"],
                           categorical=[CategoricalColumn("g", ("x", "w"), "x")]) \
            if "g" in text else CsvSchema("y", numeric=["a"])
        with pytest.raises(IngestionError, match=needle):
            list(read_csv_batches(path, schema, 10))


class TestSplit:
    def test_first_blocks_train(self):
        plan = partition(2000, 20, 1, p=5, seed=1)
        train, test = split_train_test(plan, 15)
        assert train.K == 15 and train.N == 1500
        np.testing.assert_array_equal(
            test, np.concatenate([plan.block_rows(k) for k in range(15, 20)]))

    def test_half_half(self):
        plan = partition(101, 2, 1, p=5, seed=2)
        train, test = split_train_test(plan, 1)
        assert (train.N, len(test)) == (51, 50)

    def test_disjoint_cover(self):
        plan = partition(997, 7, 3, p=5, seed=3)
        train, test = split_train_test(plan, 4)
        rows = np.concatenate([train.assignment, test])
        assert np.array_equal(np.sort(rows), np.arange(997))
        train.validate(5)

    @pytest.mark.parametrize("t", [0, 7, 9])
    def test_bad_count(self, t):
        with pytest.raises(ConfigError):
            split_train_test(partition(700, 7, 1, p=5), t)
