"""Monte-Carlo replication harness, timing benchmark and report emission.

Per-cell metrics follow the usual simulation-table definitions, aggregated
over the ``p`` coefficients:

* ``a_bias`` -- mean over replications and coordinates of ``|b_j - b0_j|``
* ``ase``    -- mean estimated standard error
* ``ese``    -- per-coordinate standard deviation of the estimates across
  replications (``ddof=1``), averaged over coordinates
* ``cp``     -- share of (replication, coordinate) Wald intervals covering
  the truth
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .combine import wald_intervals
from .data import SimSpec, simulate_full
from .errors import ConfigError, NumericalError
from .executor import ArrayDataSource, PartitionedData, RunConfig, partition, run_strategy
from .glm import SolverConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Cell:
    strategy: str
    K: int = 1
    Q: int = 1

    def __post_init__(self):
        if self.strategy == "offline":
            object.__setattr__(self, "K", 1)
            object.__setattr__(self, "Q", 1)
        if self.strategy == "mapreduce":
            object.__setattr__(self, "Q", 1)

    @property
    def label(self) -> str:
        return f"{self.strategy}(K={self.K},Q={self.Q})"


@dataclass
class ReplicationReport:
    family: str
    strategy: str
    K: int
    Q: int
    N: int
    p: int
    reps: int
    a_bias: float
    ase: float
    ese: float
    cp: float
    c_time_s: float
    r_time_s: float
    failures: int = 0
    per_rep: list | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("a report needs at least one replication")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["per_rep"] is None:
            del d["per_rep"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReplicationReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _one_replication(spec: SimSpec, cells: Sequence[Cell], solver: SolverConfig,
                     threads: int, level: float) -> list[dict]:
    data = ArrayDataSource.from_batches([simulate_full(spec)])
    out = []
    layouts: dict[tuple, PartitionedData] = {}
    for cell in cells:
        cfg = RunConfig(cell.strategy, cell.K, cell.Q, solver, threads, spec.seed)
        try:
            if cell.strategy == "offline":
                est = run_strategy(spec.family, data, cfg)
            else:
                plan = partition(spec.N, cell.K, cfg.effective_Q, spec.p, spec.seed)
                key = (cell.K,)
                if key not in layouts:
                    layouts[key] = PartitionedData(data, plan)
                est = run_strategy(spec.family, layouts[key].regrouped(plan), cfg, plan)
        except NumericalError as exc:
            out.append({"error": f"{type(exc).__name__}: {exc}"})
            continue
        ci = wald_intervals(est, level)
        out.append({
            "beta": est.beta.tolist(),
            "se": ci.se.tolist(),
            "hit": ci.covers(spec.beta0).tolist(),
            "c_time_s": est.timing["c_time_s"],
            "r_time_s": est.timing["r_time_s"],
        })
    return out


def _rep_task(args):
    spec, cells, solver, threads, level = args
    return _one_replication(spec, cells, solver, threads, level)


def summarize(spec: SimSpec, cell: Cell, records: list[dict], reps: int,
              keep_per_rep: bool = False) -> ReplicationReport:
    ok = [r for r in records if "error" not in r]
    failures = len(records) - len(ok)
    if not ok:
        raise NumericalError(f"every replication failed for {cell.label}")
    beta = np.array([r["beta"] for r in ok])
    se = np.array([r["se"] for r in ok])
    hit = np.array([r["hit"] for r in ok], dtype=bool)
    truth = np.asarray(spec.beta0)
    ese = beta.std(axis=0, ddof=1).mean() if len(ok) > 1 else 0.0
    return ReplicationReport(
        family=spec.family.name, strategy=cell.strategy, K=cell.K, Q=cell.Q,
        N=spec.N, p=spec.p, reps=reps,
        a_bias=float(np.abs(beta - truth).mean()),
        ase=float(se.mean()),
        ese=float(ese),
        cp=float(hit.mean()),
        c_time_s=float(np.median([r["c_time_s"] for r in ok])),
        r_time_s=float(np.median([r["r_time_s"] for r in ok])),
        failures=failures,
        per_rep=records if keep_per_rep else None,
    )


def run_replications(spec: SimSpec, cells: Sequence[Cell], reps: int,
                     base_seed: int | None = None, solver: SolverConfig | None = None,
                     threads: int = 1, workers: int = 1, level: float = 0.95,
                     keep_per_rep: bool = False, max_failure_rate: float = 0.01,
                     ) -> list[ReplicationReport]:
    """Simulate ``reps`` datasets and run every cell on each of them.

    Replication ``r`` uses seed ``base_seed + r`` for both the data and the
    block partition, so cells sharing ``K`` see identical blocks. Workers
    parallelize over replications; ``threads`` sets block parallelism within
    one run. The two are not meant to be combined.
    """
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    cells = list(cells)
    solver = solver or SolverConfig()
    base_seed = spec.seed if base_seed is None else base_seed
    tasks = [(SimSpec(spec.family, spec.N, spec.beta0, spec.rho, spec.intercept,
                      base_seed + r, spec.phi0), cells, solver, threads, level)
             for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_rep_task, tasks, chunksize=max(1, reps // (4 * workers))))
    else:
        results = [_rep_task(t) for t in tasks]

    reports = []
    for i, cell in enumerate(cells):
        records = [res[i] for res in results]
        failed = sum("error" in r for r in records)
        if failed:
            log.warning("%s: %d of %d replications failed", cell.label, failed, reps)
        if failed > max_failure_rate * reps:
            first = next(r["error"] for r in records if "error" in r)
            raise NumericalError(f"{cell.label}: {failed} of {reps} replications "
                                 f"failed (first: {first})")
        reports.append(summarize(spec, cell, records, reps, keep_per_rep))
    return reports


def run_benchmark(spec: SimSpec, cells: Sequence[Cell], runs: int,
                  solver: SolverConfig | None = None, threads: int | None = None,
                  ) -> list[dict]:
    """Time each cell ``runs`` times on one simulated dataset.

    Partition layout happens before the clock starts. Cells are interleaved
    within each run so slow drift in machine load hits them alike.
    """
    solver = solver or SolverConfig()
    data = ArrayDataSource.from_batches([simulate_full(spec)])
    layouts = {}
    for cell in cells:
        if cell.strategy != "offline" and cell.K not in layouts:
            plan = partition(spec.N, cell.K, 1, spec.p, spec.seed)
            layouts[cell.K] = PartitionedData(data, plan)
    rows = []
    for run in range(runs):
        for cell in cells:
            cfg = RunConfig(cell.strategy, cell.K, cell.Q, solver, threads, spec.seed)
            if cell.strategy == "offline":
                est = run_strategy(spec.family, data, cfg)
            else:
                plan = partition(spec.N, cell.K, cfg.effective_Q, spec.p, spec.seed)
                est = run_strategy(spec.family, layouts[cell.K].regrouped(plan), cfg, plan)
            rows.append({"family": spec.family.name, "strategy": cell.strategy,
                         "K": cell.K, "Q": cell.Q, "N": spec.N, "run": run,
                         "r_time_s": est.timing["r_time_s"],
                         "c_time_s": est.timing["c_time_s"]})
    return rows


def benchmark_medians(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["family"], r["strategy"], r["K"], r["Q"], r["N"]), []).append(r)
    return [{"family": f, "strategy": s, "K": K, "Q": Q, "N": N, "runs": len(g),
             "r_time_s": float(np.median([r["r_time_s"] for r in g])),
             "c_time_s": float(np.median([r["c_time_s"] for r in g]))}
            for (f, s, K, Q, N), g in groups.items()]


# --------------------------------------------------------------------------
# emission

REPORT_FIELDS = ["family", "strategy", "K", "Q", "N", "p", "reps", "a_bias", "ase",
                 "ese", "cp", "c_time_s", "r_time_s", "failures"]

_TABLE_COLUMNS = [
    ("Method", 10, lambda r: r.strategy),
    ("K", 5, lambda r: str(r.K)),
    ("Q", 5, lambda r: str(r.Q)),
    ("A.bias(1e-3)", 13, lambda r: f"{1e3 * r.a_bias:.3f}"),
    ("ASE(1e-3)", 10, lambda r: f"{1e3 * r.ase:.3f}"),
    ("ESE(1e-3)", 10, lambda r: f"{1e3 * r.ese:.3f}"),
    ("CP", 6, lambda r: f"{r.cp:.3f}"),
    ("C.Time(s)", 10, lambda r: f"{r.c_time_s:.3f}"),
    ("R.Time(s)", 10, lambda r: f"{r.r_time_s:.3f}"),
]


def emit_report(reports: ReplicationReport | Sequence[ReplicationReport],
                fmt: str = "json") -> str:
    if isinstance(reports, ReplicationReport):
        reports = [reports]
    reports = list(reports)
    if fmt == "json":
        return json.dumps({"schema_version": SCHEMA_VERSION,
                           "reports": [r.to_dict() for r in reports]}, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow({k: getattr(r, k) for k in REPORT_FIELDS})
        return buf.getvalue()
    if fmt == "table":
        lines = ["".join(name.rjust(width) for name, width, _ in _TABLE_COLUMNS)]
        for r in reports:
            lines.append("".join(get(r).rjust(width) for _, width, get in _TABLE_COLUMNS))
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}")


def parse_report_json(text: str) -> list[ReplicationReport]:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported report schema_version {doc.get('schema_version')!r}")
    return [ReplicationReport.from_dict(d) for d in doc["reports"]]


def emit_rows(rows: list[dict], fmt: str = "csv") -> str:
    """Plain records (benchmark timings) as CSV, JSON or a padded table."""
    if not rows:
        return ""
    keys = list(rows[0])
    if fmt == "json":
        return json.dumps({"schema_version": SCHEMA_VERSION, "rows": rows}, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "table":
        cells = [[k for k in keys]] + [[f"{r[k]:.4f}" if isinstance(r[k], float) else str(r[k])
                                        for k in keys] for r in rows]
        widths = [max(len(row[i]) for row in cells) + 2 for i in range(len(keys))]
        return "\n".join("".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells) + "\n"
    raise ConfigError(f"unknown format {fmt!r}")
