"""Forward selection of interaction terms by held-out AUC."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import CsvSchema, read_csv_batches, split_train_test
from .errors import ConfigError, NumericalError
from .executor import ArrayDataSource, PartitionedData, RunConfig, partition, run_mapreduce, run_offline, run_pasa
from .glm import BERNOULLI, BatchData
from .metrics import auc

Term = tuple[str, ...]


def term_name(term: Term) -> str:
    return ":".join(term)


def as_term(term) -> Term:
    if isinstance(term, str):
        return tuple(term.split(":"))
    return tuple(term)


@dataclass(frozen=True)
class Table:
    """Outcome plus named, already expanded, base columns."""

    y: np.ndarray
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        n = len(self.y)
        for name, col in self.columns.items():
            if len(col) != n:
                raise ConfigError(f"column {name!r} has {len(col)} rows, outcome has {n}")

    @property
    def N(self) -> int:
        return len(self.y)

    def design(self, terms: Sequence[Term], intercept: bool = True) -> np.ndarray:
        cols = [np.ones(self.N)] if intercept else []
        for term in terms:
            missing = [t for t in term if t not in self.columns]
            if missing:
                raise ConfigError(f"term {term_name(term)!r} uses unknown columns {missing}")
            col = np.asarray(self.columns[term[0]], dtype=float)
            for t in term[1:]:
                col = col * self.columns[t]
            cols.append(col)
        return np.column_stack(cols)

    @classmethod
    def from_csv(cls, path, schema: CsvSchema, batch_size: int = 65536) -> "Table":
        """Load the schema's base (non-interaction) expanded columns."""
        if schema.interactions:
            schema = CsvSchema(schema.outcome, schema.numeric, schema.categorical, (),
                               schema.intercept, schema.two_pass)
        full = BatchData.concat(list(read_csv_batches(path, schema, batch_size)))
        names = schema.base_names
        cols = {n: full.X[:, i] for i, n in enumerate(names) if n != "(Intercept)"}
        return cls(full.y, cols)


def pairwise_interactions(names: Sequence[str]) -> list[Term]:
    return [tuple(pair) for pair in itertools.combinations(names, 2)]


@dataclass(frozen=True)
class SelectionStep:
    step: int
    evaluated: dict[str, float]
    removed: dict[str, str]
    chosen: str | None
    auc: float


@dataclass(frozen=True)
class SelectionTrace:
    base_terms: list[str]
    base_auc: float
    steps: list[SelectionStep]
    path: list[str]
    final_terms: list[str]
    final_auc: float
    models_evaluated: int
    total_time_s: float

    def to_dict(self) -> dict:
        return {
            "base_terms": self.base_terms, "base_auc": self.base_auc,
            "steps": [vars(s) for s in self.steps], "path": self.path,
            "final_terms": self.final_terms, "final_auc": self.final_auc,
            "models_evaluated": self.models_evaluated,
            "total_time_s": self.total_time_s,
        }


class _Evaluator:
    def __init__(self, table: Table, run_config: RunConfig, train_blocks: int):
        self.table = table
        self.config = run_config
        self.y = np.asarray(table.y, dtype=float)
        if np.any((self.y != 0) & (self.y != 1)):
            raise ConfigError("forward selection needs a binary outcome")
        # block sizes only depend on N, K, Q; p is checked again per fit
        full = partition(table.N, run_config.K, run_config.effective_Q, 1, run_config.seed)
        self.train_plan, self.test_rows = split_train_test(full, train_blocks)
        self.count = 0

    def __call__(self, terms: Sequence[Term]) -> float:
        self.count += 1
        X = self.table.design(terms)
        source = ArrayDataSource(self.y, X)
        cfg = self.config
        if cfg.strategy == "offline":
            est = run_offline(BERNOULLI, source.take(self.train_plan.assignment), cfg)
        else:
            parts = PartitionedData(source, self.train_plan)
            runner = run_mapreduce if cfg.strategy == "mapreduce" else run_pasa
            est = runner(BERNOULLI, parts, self.train_plan, cfg)
        scores = BERNOULLI.mean(X[self.test_rows] @ est.beta)
        return auc(scores, self.y[self.test_rows])


def forward_select(base_terms, candidate_terms, schema: CsvSchema | None, data,
                   run_config: RunConfig | None = None, train_blocks: int | None = None,
                   ) -> SelectionTrace:
    """Greedy forward selection of ``candidate_terms`` on top of ``base_terms``.

    Every model is fit on the first ``train_blocks`` blocks and scored by AUC
    on the remaining ones. Each step adds the candidate with the highest AUC
    (ties go to the lexicographically smallest name). Candidates whose fit
    fails for numerical reasons are dropped from the pool. The search stops
    at the first step without improvement; the reported model is the
    highest-AUC prefix of the path.

    ``data`` is a :class:`Table`, or a CSV path read through ``schema``.
    """
    t0 = time.perf_counter()
    run_config = run_config or RunConfig(strategy="pasa", K=20, Q=10)
    if train_blocks is None:
        train_blocks = max(1, (3 * run_config.K) // 4)
    if not isinstance(data, Table):
        if schema is None:
            raise ConfigError("a schema is required to read CSV data")
        data = Table.from_csv(data, schema)
    base = [as_term(t) for t in base_terms]
    pool = sorted({term_name(as_term(t)): as_term(t) for t in candidate_terms}.items())
    pool = [(n, t) for n, t in pool if t not in base]
    if not pool:
        raise ConfigError("forward selection needs at least one candidate term")

    evaluate = _Evaluator(data, run_config, train_blocks)
    try:
        current_auc = evaluate(base)
    except NumericalError as exc:
        raise NumericalError(f"base model could not be fit: {exc}") from exc
    base_auc = current_auc
    selected: list[Term] = []
    steps: list[SelectionStep] = []
    aucs_on_path = [base_auc]

    step = 0
    while pool:
        step += 1
        evaluated: dict[str, float] = {}
        removed: dict[str, str] = {}
        best_name, best_auc = None, -np.inf
        for name, term in pool:
            try:
                a = evaluate(base + selected + [term])
            except NumericalError as exc:
                removed[name] = f"{type(exc).__name__}: {exc}"
                continue
            evaluated[name] = a
            if a > best_auc:
                best_name, best_auc = name, a
        pool = [(n, t) for n, t in pool if n not in removed]
        if best_name is None or best_auc <= current_auc:
            steps.append(SelectionStep(step, evaluated, removed, None, current_auc))
            break
        selected.append(dict(pool)[best_name])
        pool = [(n, t) for n, t in pool if n != best_name]
        current_auc = best_auc
        aucs_on_path.append(best_auc)
        steps.append(SelectionStep(step, evaluated, removed, best_name, best_auc))

    best_len = int(np.argmax(aucs_on_path))
    final = base + selected[:best_len]
    return SelectionTrace(
        base_terms=[term_name(t) for t in base],
        base_auc=base_auc,
        steps=steps,
        path=[term_name(t) for t in selected],
        final_terms=[term_name(t) for t in final],
        final_auc=aucs_on_path[best_len],
        models_evaluated=evaluate.count,
        total_time_s=time.perf_counter() - t0,
    )


def planted_interaction_table(N: int, seed: int, planted: Term = ("d2", "x1"),
                              effect: float = 0.5) -> Table:
    """Synthetic binary-outcome table with one true interaction.

    Base columns: ``x1, x2`` standard normal and dummies ``d1, d2, d3``. The
    ten pairwise products of these are natural candidates, and exactly one
    (``planted``) enters the true linear predictor.
    """
    rng = np.random.default_rng(seed)
    cols = {
        "x1": rng.standard_normal(N),
        "x2": rng.standard_normal(N),
        "d1": (rng.random(N) < 0.3).astype(float),
        "d2": (rng.random(N) < 0.5).astype(float),
        "d3": (rng.random(N) < 0.4).astype(float),
    }
    eta = (-1.0 + 0.5 * cols["x1"] - 0.3 * cols["x2"] + 0.4 * cols["d1"]
           + 0.3 * cols["d2"] - 0.2 * cols["d3"])
    eta = eta + effect * np.prod([cols[c] for c in planted], axis=0)
    y = (rng.random(N) < BERNOULLI.mean(eta)).astype(float)
    return Table(y, cols)
