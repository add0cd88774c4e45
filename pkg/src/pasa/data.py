"""Synthetic data streams, CSV ingestion and train/test splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, IngestionError
from .executor import PartitionPlan
from .glm import BatchData, GlmFamily, get_family

# rows per internally seeded chunk; batch boundaries never change the rows
CHUNK_ROWS = 8192

DEFAULT_BETA0 = (0.2, -0.2, 0.2, -0.2, 0.2)


@dataclass(frozen=True)
class SimSpec:
    """Design for simulated GLM data.

    Non-intercept covariates are standard normal with compound-symmetry
    correlation ``rho``. ``phi0`` is the Gaussian noise variance.
    """

    family: GlmFamily
    N: int
    beta0: tuple[float, ...] = DEFAULT_BETA0
    rho: float = 0.5
    intercept: bool = True
    seed: int = 0
    phi0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", get_family(self.family))
        object.__setattr__(self, "beta0", tuple(float(b) for b in self.beta0))
        if self.N < 1:
            raise ConfigError("N must be positive")
        q = self.n_random
        if q < 0:
            raise ConfigError("intercept needs at least one coefficient")
        if not -1.0 < self.rho < 1.0:
            raise ConfigError(f"rho={self.rho} must satisfy |rho| < 1")
        if q > 1 and self.rho <= -1.0 / (q - 1):
            raise ConfigError(f"rho={self.rho} <= -1/{q - 1}: covariance not positive definite")
        if self.phi0 < 0:
            raise ConfigError("phi0 must be non-negative (0 gives noiseless outcomes)")

    @property
    def p(self) -> int:
        return len(self.beta0)

    @property
    def n_random(self) -> int:
        return self.p - 1 if self.intercept else self.p

    def covariance(self) -> np.ndarray:
        q = self.n_random
        return (1.0 - self.rho) * np.eye(q) + self.rho * np.ones((q, q))


class SimStream:
    """Restartable stream of simulated batches.

    Rows are produced in fixed chunks, each with its own child seed, so the
    same rows come out whatever ``batch_size`` is and iteration can restart.
    """

    def __init__(self, spec: SimSpec, batch_size: int | None = None):
        self.spec = spec
        self.batch_size = batch_size or CHUNK_ROWS
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if spec.rho < 0 and spec.n_random > 1:
            self._chol = np.linalg.cholesky(spec.covariance())
        else:
            self._chol = None

    def _chunk(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        spec = self.spec
        m = min(CHUNK_ROWS, spec.N - j * CHUNK_ROWS)
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(j,)))
        q = spec.n_random
        z = rng.standard_normal((m, q))
        w = rng.standard_normal(m)
        if self._chol is not None:
            x = z @ self._chol.T
        else:
            x = math.sqrt(1.0 - spec.rho) * z + math.sqrt(max(spec.rho, 0.0)) * w[:, None]
        X = np.hstack([np.ones((m, 1)), x]) if spec.intercept else x
        eta = X @ np.asarray(spec.beta0)
        if spec.family.is_gaussian:
            y = eta + math.sqrt(spec.phi0) * rng.standard_normal(m)
        else:
            y = (rng.random(m) < spec.family.mean(eta)).astype(float)
        return y, X

    def __iter__(self) -> Iterator[BatchData]:
        n_chunks = -(-self.spec.N // CHUNK_ROWS)
        pend_y: list[np.ndarray] = []
        pend_X: list[np.ndarray] = []
        pending = 0
        for j in range(n_chunks):
            y, X = self._chunk(j)
            pend_y.append(y)
            pend_X.append(X)
            pending += len(y)
            if pending < self.batch_size:
                continue
            ys, Xs = np.concatenate(pend_y), np.concatenate(pend_X)
            cut = (pending // self.batch_size) * self.batch_size
            for a in range(0, cut, self.batch_size):
                yield BatchData(ys[a:a + self.batch_size], Xs[a:a + self.batch_size])
            pend_y, pend_X, pending = [ys[cut:]], [Xs[cut:]], pending - cut
        if pending:
            yield BatchData(np.concatenate(pend_y), np.concatenate(pend_X))


def simulate(spec: SimSpec, batch_size: int | None = None) -> SimStream:
    return SimStream(spec, batch_size)


def simulate_full(spec: SimSpec) -> BatchData:
    """All ``N`` rows at once (for harnesses that need random access)."""
    return BatchData.concat(list(SimStream(spec, CHUNK_ROWS)))


# --------------------------------------------------------------------------
# CSV

@dataclass(frozen=True)
class NumericColumn:
    name: str
    standardize: bool = False
    center: float | None = None
    scale: float | None = None


@dataclass(frozen=True)
class CategoricalColumn:
    name: str
    levels: tuple[str, ...]
    reference: str

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if str(self.reference) not in self.levels:
            raise ConfigError(f"reference level {self.reference!r} of {self.name!r} "
                              f"is not among its levels {self.levels}")

    def dummy_names(self) -> list[str]:
        return [f"{self.name}_{lv}" for lv in self.levels if lv != str(self.reference)]


@dataclass(frozen=True)
class CsvSchema:
    """How CSV columns become a design matrix.

    Expanded column order: intercept, numeric columns, dummy columns (one per
    non-reference level, named ``<column>_<level>``), then interactions,
    named by joining their parents with ``:``.
    """

    outcome: str
    numeric: tuple[NumericColumn, ...] = ()
    categorical: tuple[CategoricalColumn, ...] = ()
    interactions: tuple[tuple[str, ...], ...] = ()
    intercept: bool = True
    two_pass: bool = False
    p: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "numeric", tuple(
            c if isinstance(c, NumericColumn) else NumericColumn(**c) if isinstance(c, dict)
            else NumericColumn(c) for c in self.numeric))
        object.__setattr__(self, "categorical", tuple(
            c if isinstance(c, CategoricalColumn) else CategoricalColumn(**c)
            for c in self.categorical))
        object.__setattr__(self, "interactions", tuple(tuple(t) for t in self.interactions))
        names = self.base_names
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate expanded column names in {names}")
        for term in self.interactions:
            missing = [t for t in term if t not in names]
            if missing:
                raise ConfigError(f"interaction {term} refers to unknown columns {missing}")
        full = self.column_names
        if len(set(full)) != len(full):
            raise ConfigError(f"duplicate expanded column names in {full}")
        if self.p is not None and self.p != len(full):
            raise ConfigError(f"schema declares p={self.p} but expands to {len(full)} columns")
        for c in self.numeric:
            if c.standardize and (c.center is None or c.scale is None) and not self.two_pass:
                raise ConfigError(f"column {c.name!r} is standardized without constants; "
                                  "supply center/scale or set two_pass")

    @property
    def base_names(self) -> list[str]:
        names = ["(Intercept)"] if self.intercept else []
        names += [c.name for c in self.numeric]
        for c in self.categorical:
            names += c.dummy_names()
        return names

    @property
    def column_names(self) -> list[str]:
        return self.base_names + [":".join(t) for t in self.interactions]

    @property
    def width(self) -> int:
        return len(self.column_names)

    @property
    def source_columns(self) -> list[str]:
        return [self.outcome] + [c.name for c in self.numeric] + [c.name for c in self.categorical]


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise IngestionError(f"row {row}, column {col!r}: cannot parse {cell!r}") from None


def _open_reader(path, schema: CsvSchema):
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        raise IngestionError(f"{path}: empty file, header required") from None
    index = {name: i for i, name in enumerate(header)}
    missing = [c for c in schema.source_columns if c not in index]
    if missing:
        fh.close()
        raise IngestionError(f"{path}: missing column(s) {missing}")
    return fh, reader, index


def _standardization(path, schema: CsvSchema) -> dict[str, tuple[float, float]]:
    consts = {c.name: (c.center, c.scale) for c in schema.numeric
              if c.standardize and c.center is not None and c.scale is not None}
    todo = [c.name for c in schema.numeric if c.standardize and c.name not in consts]
    if not todo:
        return consts
    fh, reader, index = _open_reader(path, schema)
    n, tot, sq = 0, dict.fromkeys(todo, 0.0), dict.fromkeys(todo, 0.0)
    with fh:
        for r, row in enumerate(reader, start=2):
            n += 1
            for name in todo:
                v = _parse_float(row[index[name]], r, name)
                tot[name] += v
                sq[name] += v * v
    for name in todo:
        mu = tot[name] / n
        var = (sq[name] - n * mu * mu) / (n - 1) if n > 1 else 0.0
        if var <= 0:
            raise IngestionError(f"column {name!r} has zero variance; cannot standardize")
        consts[name] = (mu, math.sqrt(var))
    return consts


def read_csv_batches(path, schema: CsvSchema, batch_size: int) -> Iterator[BatchData]:
    """Stream a CSV file as expanded design batches of ``batch_size`` rows."""
    if batch_size < 1:
        raise ConfigError("batch_size must be positive")
    consts = _standardization(path, schema) if any(c.standardize for c in schema.numeric) else {}
    names = schema.base_names
    pos = {n: i for i, n in enumerate(names)}
    inter_idx = [[pos[t] for t in term] for term in schema.interactions]
    n_base = len(names)
    width = schema.width
    fh, reader, index = _open_reader(path, schema)
    with fh:
        ys: list[float] = []
        rows: list[np.ndarray] = []
        n_fields = max(index.values()) + 1
        for r, row in enumerate(reader, start=2):
            if len(row) != n_fields:
                raise IngestionError(f"row {r}: expected {n_fields} fields, got {len(row)}")
            x = np.empty(width)
            j = 0
            if schema.intercept:
                x[0] = 1.0
                j = 1
            for c in schema.numeric:
                v = _parse_float(row[index[c.name]], r, c.name)
                if c.standardize:
                    mu, sd = consts[c.name]
                    v = (v - mu) / sd
                x[j] = v
                j += 1
            for c in schema.categorical:
                level = row[index[c.name]]
                if level not in c.levels:
                    raise IngestionError(f"row {r}, column {c.name!r}: unknown level {level!r}")
                for lv in c.levels:
                    if lv == c.reference:
                        continue
                    x[j] = 1.0 if level == lv else 0.0
                    j += 1
            for t, idx in enumerate(inter_idx):
                x[n_base + t] = np.prod(x[idx])
            ys.append(_parse_float(row[index[schema.outcome]], r, schema.outcome))
            rows.append(x)
            if len(ys) == batch_size:
                yield BatchData(np.array(ys), np.vstack(rows))
                ys, rows = [], []
        if ys:
            yield BatchData(np.array(ys), np.vstack(rows))


def write_csv(path, batches, columns: Sequence[str], outcome: str = "y") -> int:
    """Write batches as CSV using shortest round-trip float formatting."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([outcome, *columns])
        for b in batches:
            if b.p != len(columns):
                raise ConfigError(f"{len(columns)} column names for {b.p} columns")
            for yi, xi in zip(b.y.tolist(), b.X.tolist()):
                w.writerow([repr(yi), *map(repr, xi)])
            n += b.s
    return n


def split_train_test(plan: PartitionPlan, train_blocks: int) -> tuple[PartitionPlan, np.ndarray]:
    """First ``train_blocks`` blocks train; rows of the rest form the test set."""
    if not 1 <= train_blocks < plan.K:
        raise ConfigError(f"train_blocks={train_blocks} must lie in [1, K={plan.K})")
    cut = int(plan.block_offsets[train_blocks])
    # the training plan indexes the original rows, so it runs on the full source
    train = PartitionPlan(cut, train_blocks, plan.batch_sizes[:train_blocks],
                          plan.assignment[:cut], plan.seed)
    return train, plan.assignment[cut:].copy()
