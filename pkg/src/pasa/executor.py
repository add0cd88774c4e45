"""Partitioning and parallel orchestration of the three estimators.

Timing vocabulary used in every report:

* ``r_time_s`` -- wall clock of the whole run (critical path).
* ``c_time_s`` -- sum over workers of the time each spent streaming its
  block, plus the combine step.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .combine import PasaEstimate, combine
from .errors import ConfigError, NumericalError, PasaError
from .glm import BatchData, GlmFamily, SolverConfig, fit_mle
from .linalg import SpdFactor
from .stream import PHI_FLOOR, BlockSummary, stream_block

STRATEGIES = ("offline", "mapreduce", "pasa")


def _even_split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + 1 if i < extra else base for i in range(parts)]


@dataclass(frozen=True)
class PartitionPlan:
    """Random assignment of ``N`` rows to ``K`` blocks of sequential batches.

    ``assignment`` is a permutation; block ``k`` owns the contiguous slice of
    it given by ``block_offsets``.
    """

    N: int
    K: int
    batch_sizes: tuple[tuple[int, ...], ...]
    assignment: np.ndarray
    seed: int | None = None

    @property
    def block_sizes(self) -> list[int]:
        return [sum(b) for b in self.batch_sizes]

    @property
    def block_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(np.int64)

    def block_rows(self, k: int) -> np.ndarray:
        off = self.block_offsets
        return self.assignment[off[k]:off[k + 1]]

    def validate(self, p: int) -> None:
        sizes = [s for blk in self.batch_sizes for s in blk]
        if sum(sizes) != self.N:
            raise ConfigError(f"batch sizes sum to {sum(sizes)}, expected N={self.N}")
        if min(sizes) < 1:
            raise ConfigError("every batch needs at least one row")
        short = [k for k, blk in enumerate(self.batch_sizes) if blk[0] < p]
        if short:
            raise ConfigError(f"first batch of block(s) {short} has fewer than p={p} rows")
        if len(self.assignment) != self.N:
            raise ConfigError("assignment length differs from N")

    def single_batch(self) -> "PartitionPlan":
        """Same blocks and assignment with each block processed in one batch."""
        return replace(self, batch_sizes=tuple((sum(b),) for b in self.batch_sizes))


def partition(N: int, K: int, Q: int, p: int, seed: int | None = 0) -> PartitionPlan:
    """Equal-split plan with remainder rows spread over the first blocks/batches."""
    if K < 1 or Q < 1:
        raise ConfigError("K and Q must be at least 1")
    if N < K * Q:
        raise ConfigError(f"N={N} < K*Q={K * Q}: some batch would be empty")
    if N // (K * Q) < p:
        raise ConfigError(f"floor(N/(K*Q))={N // (K * Q)} < p={p}: "
                          "first batches cannot identify the model")
    sizes = tuple(tuple(_even_split(n_k, Q)) for n_k in _even_split(N, K))
    assignment = np.random.default_rng(seed).permutation(N)
    return PartitionPlan(N, K, sizes, assignment, seed)


class ArrayDataSource:
    """In-memory rows with read-only random access."""

    def __init__(self, y: np.ndarray, X: np.ndarray):
        self.data = BatchData(y, X)

    @classmethod
    def from_batches(cls, batches) -> "ArrayDataSource":
        full = BatchData.concat(list(batches))
        return cls(full.y, full.X)

    @property
    def N(self) -> int:
        return self.data.s

    @property
    def p(self) -> int:
        return self.data.p

    def take(self, rows: np.ndarray) -> BatchData:
        return BatchData(self.data.y[rows], self.data.X[rows])

    def all(self) -> BatchData:
        return self.data


class PartitionedData:
    """Rows laid out in plan order so batches are contiguous views.

    Building this is the data-distribution step and is excluded from the
    estimation timings.
    """

    def __init__(self, source: ArrayDataSource, plan: PartitionPlan):
        a = plan.assignment
        if len(a) != plan.N or (plan.N and (a.min() < 0 or a.max() >= source.N)):
            raise ConfigError(f"plan rows do not index a source of {source.N} rows")
        self.plan = plan
        self.data = source.take(plan.assignment)

    def regrouped(self, plan: PartitionPlan) -> "PartitionedData":
        """Reuse the laid-out rows for a plan with the same assignment."""
        if plan.assignment is not self.plan.assignment and not np.array_equal(
                plan.assignment, self.plan.assignment):
            raise ConfigError("plans differ in row assignment")
        out = object.__new__(PartitionedData)
        out.plan, out.data = plan, self.data
        return out

    def batches(self, k: int) -> Iterator[BatchData]:
        start = int(self.plan.block_offsets[k])
        for s in self.plan.batch_sizes[k]:
            yield BatchData(self.data.y[start:start + s], self.data.X[start:start + s])
            start += s

    def block(self, k: int) -> BatchData:
        off = self.plan.block_offsets
        return BatchData(self.data.y[off[k]:off[k + 1]], self.data.X[off[k]:off[k + 1]])


@dataclass(frozen=True)
class RunConfig:
    strategy: str = "pasa"
    K: int = 10
    Q: int = 10
    solver: SolverConfig = field(default_factory=SolverConfig)
    threads: int | None = None
    seed: int = 0
    dispersion: str = "block"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.dispersion not in ("block", "pooled"):
            raise ConfigError("dispersion must be 'block' or 'pooled'")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def effective_Q(self) -> int:
        return 1 if self.strategy == "mapreduce" else self.Q

    @property
    def n_threads(self) -> int:
        return self.threads or os.cpu_count() or 1


class BlockFailure(NumericalError):
    """A block worker failed; ``partial`` lists summaries that did finish."""


def _as_partitioned(data, plan: PartitionPlan) -> PartitionedData:
    if isinstance(data, PartitionedData):
        return data if data.plan is plan else data.regrouped(plan)
    return PartitionedData(data, plan)


def run_pasa(family: GlmFamily, data, plan: PartitionPlan,
             config: RunConfig | None = None) -> PasaEstimate:
    """Stream every block on a worker pool, then combine in block order."""
    config = config or RunConfig()
    parts = _as_partitioned(data, plan)
    plan.validate(parts.data.p)
    solver = config.solver

    def work(k: int):
        t = time.perf_counter()
        summary = stream_block(family, parts.batches(k), solver, block_id=k)
        return summary, time.perf_counter() - t

    t0 = time.perf_counter()
    results: list = [None] * plan.K
    errors: dict[int, PasaError] = {}
    threads = min(config.n_threads, plan.K)
    if threads == 1:
        for k in range(plan.K):
            try:
                results[k] = work(k)
            except PasaError as exc:
                errors[k] = exc
                break
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, k) for k in range(plan.K)]
            for k, fut in enumerate(futures):
                try:
                    results[k] = fut.result()
                except PasaError as exc:
                    errors[k] = exc
    if errors:
        k, exc = min(errors.items())
        partial = [r[0] for r in results if r is not None]
        raise BlockFailure(f"block {k} failed: {exc}", block=k,
                           partial=partial) from exc

    summaries = [r[0] for r in results]
    stream_times = [r[1] for r in results]
    t1 = time.perf_counter()
    estimate = combine(summaries, config.dispersion)
    t2 = time.perf_counter()
    timing = {
        "r_time_s": t2 - t0,
        "c_time_s": sum(stream_times) + (t2 - t1),
        "combine_s": t2 - t1,
        "stream_max_s": max(stream_times),
        "block_stream_s": stream_times,
    }
    return replace(estimate, timing=timing)


def run_mapreduce(family: GlmFamily, data, plan: PartitionPlan,
                  config: RunConfig | None = None) -> PasaEstimate:
    """Divide-and-combine without streaming: one batch per block."""
    config = config or RunConfig(strategy="mapreduce")
    return run_pasa(family, data, plan.single_batch(), config)


def offline_dispersion(family: GlmFamily, batch: BatchData, beta: np.ndarray) -> float:
    """Dispersion for the one-shot fit: RSS/(n-p) if Gaussian, fixed otherwise."""
    if family.dispersion_fixed is not None:
        return family.dispersion_fixed
    rss = float(np.sum((batch.y - batch.X @ beta) ** 2))
    return max(rss / (batch.s - batch.p), PHI_FLOOR)


def run_offline(family: GlmFamily, data, config: RunConfig | None = None) -> PasaEstimate:
    """Gold-standard MLE on all rows, reported as a one-block estimate."""
    config = config or RunConfig(strategy="offline")
    full = data.all() if hasattr(data, "all") else data
    if isinstance(full, PartitionedData):
        full = full.data
    t0 = time.perf_counter()
    fit = fit_mle(family, full, config.solver)
    phi = offline_dispersion(family, full, fit.beta)
    cov = phi * SpdFactor(fit.J).inverse()
    elapsed = time.perf_counter() - t0
    summary = BlockSummary(fit.beta, fit.J / fit.n, phi, fit.n, 0)
    timing = {"r_time_s": elapsed, "c_time_s": elapsed, "combine_s": 0.0,
              "stream_max_s": elapsed, "block_stream_s": [elapsed]}
    return PasaEstimate(fit.beta, cov, fit.n, 1, (summary,), timing)


def run_strategy(family: GlmFamily, data, config: RunConfig,
                 plan: PartitionPlan | None = None) -> PasaEstimate:
    """Dispatch on ``config.strategy``; builds the plan when not supplied."""
    if config.strategy == "offline":
        return run_offline(family, data, config)
    if plan is None:
        src = data if isinstance(data, ArrayDataSource) else None
        n, p = (src.N, src.p) if src else (data.plan.N, data.data.p)
        plan = partition(n, config.K, config.effective_Q, p, config.seed)
    if config.strategy == "mapreduce":
        return run_mapreduce(family, data, plan, config)
    return run_pasa(family, data, plan, config)
