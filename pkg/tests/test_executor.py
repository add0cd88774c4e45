import numpy as np
import pytest

from pasa import BERNOULLI, GAUSSIAN
from pasa.errors import ConfigError, NumericalError
from pasa.executor import (
    ArrayDataSource,
    BlockFailure,
    PartitionedData,
    RunConfig,
    partition,
    run_mapreduce,
    run_offline,
    run_pasa,
    run_strategy,
)
from pasa.glm import fit_mle

from conftest import make_batch, ols


def source(kind, N, seed):
    b = make_batch(kind, N, seed=seed)
    return ArrayDataSource(b.y, b.X)


class TestPartition:
    def test_exact_division(self):
        plan = partition(100, 4, 5, p=5)
        assert plan.batch_sizes == ((5,) * 5,) * 4

    def test_remainder_rule(self):
        assert partition(103, 4, 1, p=5).block_sizes == [26, 26, 26, 25]

    def test_batch_remainder(self):
        plan = partition(103, 2, 3, p=5)
        assert plan.batch_sizes == ((18, 17, 17), (17, 17, 17))

    def test_bijection(self):
        plan = partition(1000, 7, 3, p=5, seed=4)
        assert np.array_equal(np.sort(plan.assignment), np.arange(1000))
        rows = np.concatenate([plan.block_rows(k) for k in range(7)])
        assert np.array_equal(rows, plan.assignment)

    def test_seed_determinism(self):
        a, b = partition(500, 5, 2, 5, seed=9), partition(500, 5, 2, 5, seed=9)
        c = partition(500, 5, 2, 5, seed=10)
        assert np.array_equal(a.assignment, b.assignment)
        assert not np.array_equal(a.assignment, c.assignment)

    @pytest.mark.parametrize("N, K, Q, p, needle", [
        (10, 4, 3, 1, "K*Q"),
        (100, 10, 3, 5, "p=5"),
        (100, 0, 1, 1, "at least 1"),
    ])
    def test_infeasible(self, N, K, Q, p, needle):
        with pytest.raises(ConfigError, match=needle):
            partition(N, K, Q, p)

    def test_validate_first_batch(self):
        plan = partition(100, 2, 1, p=5)
        with pytest.raises(ConfigError):
            plan.validate(60)


class TestPartitionedData:
    def test_batches_follow_assignment(self):
        src = source("gaussian", 200, 1)
        plan = partition(200, 3, 4, p=5, seed=2)
        parts = PartitionedData(src, plan)
        got = np.concatenate([b.y for k in range(3) for b in parts.batches(k)])
        np.testing.assert_array_equal(got, src.data.y[plan.assignment])
        for k in range(3):
            np.testing.assert_array_equal(parts.block(k).X, src.data.X[plan.block_rows(k)])

    def test_bad_plan(self):
        with pytest.raises(ConfigError):
            PartitionedData(source("gaussian", 50, 1), partition(100, 2, 1, p=5))


class TestRunPasa:
    def test_degenerate_plan_is_mle(self):
        for kind, fam, tol in [("gaussian", GAUSSIAN, 1e-10), ("bernoulli", BERNOULLI, 1e-8)]:
            src = source(kind, 5000, 3)
            est = run_pasa(fam, src, partition(5000, 1, 1, p=5))
            np.testing.assert_allclose(est.beta, fit_mle(fam, src.data).beta, atol=tol, rtol=0)

    def test_gaussian_exactness_at_scale(self):
        src = source("gaussian", 100_000, 4)
        cfg = RunConfig(K=10, Q=10, dispersion="pooled")
        est = run_pasa(GAUSSIAN, src, partition(100_000, 10, 10, p=5), cfg)
        beta, _, cov = ols(src.data.X, src.data.y)
        np.testing.assert_allclose(est.beta, beta, atol=1e-8, rtol=0)
        # pooled phi omits the between-block residual, so only close
        np.testing.assert_allclose(est.cov, cov, rtol=1e-3)

    @pytest.mark.parametrize("fam, kind", [(GAUSSIAN, "gaussian"), (BERNOULLI, "bernoulli")])
    def test_thread_count_determinism(self, fam, kind):
        src = source(kind, 20_000, 5)
        plan = partition(20_000, 8, 5, p=5, seed=1)
        a = run_pasa(fam, src, plan, RunConfig(threads=1))
        b = run_pasa(fam, src, plan, RunConfig(threads=8))
        np.testing.assert_array_equal(a.beta, b.beta)
        np.testing.assert_array_equal(a.cov, b.cov)

    def test_timing_fields(self):
        src = source("bernoulli", 10_000, 6)
        est = run_pasa(BERNOULLI, src, partition(10_000, 4, 2, p=5), RunConfig(threads=2))
        t = est.timing
        assert len(t["block_stream_s"]) == 4
        assert t["c_time_s"] == pytest.approx(sum(t["block_stream_s"]) + t["combine_s"])
        assert t["r_time_s"] > 0 and t["stream_max_s"] <= t["c_time_s"]

    def test_block_failure_carries_context(self):
        b = make_batch("bernoulli", 400, seed=7)
        X = b.X.copy()
        # block 1 of the identity plan gets a duplicated column
        X[200:, 2] = X[200:, 1]
        plan = partition(400, 2, 1, p=5, seed=0)
        plan = type(plan)(plan.N, plan.K, plan.batch_sizes, np.arange(400), 0)
        with pytest.raises(BlockFailure) as info:
            run_pasa(BERNOULLI, ArrayDataSource(b.y, X), plan, RunConfig(threads=1))
        assert info.value.context["block"] == 1
        assert len(info.value.context["partial"]) == 1
        assert isinstance(info.value, NumericalError)


class TestLattice:
    @pytest.mark.parametrize("fam, kind, tol", [(GAUSSIAN, "gaussian", 1e-10),
                                                (BERNOULLI, "bernoulli", 1e-8)])
    def test_special_cases_agree(self, fam, kind, tol):
        src = source(kind, 5000, 8)
        plan = partition(5000, 1, 1, p=5, seed=3)
        off = run_offline(fam, src)
        pasa = run_pasa(fam, src, plan)
        mr = run_mapreduce(fam, src, plan)
        np.testing.assert_allclose(pasa.beta, off.beta, atol=tol, rtol=0)
        np.testing.assert_allclose(mr.beta, off.beta, atol=tol, rtol=0)
        np.testing.assert_allclose(pasa.se, off.se, rtol=1e-8)

    def test_mapreduce_is_pasa_with_one_batch(self):
        src = source("bernoulli", 20_000, 9)
        plan = partition(20_000, 10, 4, p=5, seed=2)
        mr = run_mapreduce(BERNOULLI, src, plan)
        pasa = run_pasa(BERNOULLI, src, plan.single_batch())
        np.testing.assert_array_equal(mr.beta, pasa.beta)
        np.testing.assert_array_equal(mr.cov, pasa.cov)
        for a, b in zip(mr.per_block, pasa.per_block):
            np.testing.assert_array_equal(a.beta_k, b.beta_k)

    def test_offline_noiseless(self, rng):
        X = np.column_stack([np.ones(100), rng.standard_normal((100, 3))])
        beta = np.array([1.0, 2.0, -1.0, 0.5])
        est = run_offline(GAUSSIAN, ArrayDataSource(X @ beta, X))
        np.testing.assert_allclose(est.beta, beta, atol=1e-12)


class TestRunStrategy:
    @pytest.mark.parametrize("strategy", ["offline", "mapreduce", "pasa"])
    def test_dispatch(self, strategy):
        src = source("bernoulli", 10_000, 10)
        cfg = RunConfig(strategy=strategy, K=5, Q=4, seed=1)
        est = run_strategy(BERNOULLI, src, cfg)
        assert est.k_blocks == (1 if strategy == "offline" else 5)
        assert est.total_n == 10_000

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            RunConfig(strategy="sgd")
        with pytest.raises(ConfigError):
            RunConfig(threads=0)
