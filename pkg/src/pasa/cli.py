"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .combine import combine, wald_intervals
from .data import read_csv_batches, simulate, write_csv
from .errors import ConfigError, NumericalError, PasaError
from .executor import ArrayDataSource, PartitionedData, partition, run_mapreduce, run_offline, run_pasa
from .glm import get_family
from .report import benchmark_medians, emit_report, emit_rows, run_benchmark, run_replications
from .selection import Table, forward_select, pairwise_interactions, planted_interaction_table
from .stream import BlockSummary

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("pasa")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=d)
    parser.add_argument("--threads", type=int, default=d, help="block worker cap")
    parser.add_argument("--format", choices=["json", "csv", "table"], default=d,
                        help="output format (default json; csv for bench)")
    parser.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pasa", description="Parallel-and-stream GLM estimation and benchmarking.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    p = add("simulate", "write simulated data to CSV")
    p.add_argument("--family")
    p.add_argument("-n", "--n", type=int, dest="N")
    p.add_argument("--rho", type=float)
    p.add_argument("--out", required=True)

    p = add("fit", "fit a GLM on CSV or simulated data")
    p.add_argument("--data", help="CSV file read through the [schema] table")
    p.add_argument("--family")
    p.add_argument("-n", "--n", type=int, dest="N", help="simulate N rows when no --data")
    p.add_argument("--strategy", choices=["offline", "mapreduce", "pasa"])
    p.add_argument("-K", type=int)
    p.add_argument("-Q", type=int)
    p.add_argument("--summaries-dir", help="also write one BlockSummary JSON per block")
    p.add_argument("--level", type=float, default=0.95)

    p = add("combine", "combine BlockSummary JSON files from a directory")
    p.add_argument("directory")
    p.add_argument("--level", type=float, default=0.95)

    p = add("replicate", "Monte-Carlo replication of simulation metrics")
    p.add_argument("--family")
    p.add_argument("-n", "--n", type=int, dest="N")
    p.add_argument("--reps", type=int)
    p.add_argument("--cells", help="comma list of strategy[:K[:Q]]")
    p.add_argument("--workers", type=int, help="processes over replications")
    p.add_argument("--out", help="also write the report here")

    p = add("bench", "wall-clock benchmark, plot-ready CSV")
    p.add_argument("--family")
    p.add_argument("-n", "--n", type=int, dest="N")
    p.add_argument("--runs", type=int)
    p.add_argument("--cells")
    p.add_argument("--raw", action="store_true", help="emit every run, not medians")

    p = add("select", "forward selection of interactions by held-out AUC")
    p.add_argument("--data", help="CSV file read through the [schema] table")
    p.add_argument("--synthetic", type=int, metavar="N",
                   help="use a synthetic table with one planted interaction")
    p.add_argument("--base", help="comma list of base terms (default: all columns)")
    p.add_argument("--candidates", help="comma list of terms, a:b for products "
                                        "(default: all pairwise interactions)")
    p.add_argument("--strategy", choices=["offline", "mapreduce", "pasa"])
    p.add_argument("-K", type=int)
    p.add_argument("-Q", type=int)
    p.add_argument("--train-blocks", type=int)
    return parser


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _estimate_output(est, fmt: str, level: float) -> str:
    doc = est.to_dict(level)
    if fmt == "json":
        return json.dumps(doc, indent=2)
    ci = wald_intervals(est, level)
    rows = [{"coef": j, "beta": float(est.beta[j]), "se": float(ci.se[j]),
             "lower": float(ci.lower[j]), "upper": float(ci.upper[j])}
            for j in range(len(est.beta))]
    return emit_rows(rows, fmt)


def cmd_simulate(args, doc) -> int:
    spec = cfgmod.sim_spec(doc, family=args.family, N=args.N, rho=args.rho, seed=args.seed)
    cols = [f"x{j}" for j in range(1, spec.p + 1)]
    n = write_csv(args.out, simulate(spec), cols)
    log.info("wrote %d rows to %s", n, args.out)
    return EXIT_OK


def cmd_fit(args, doc) -> int:
    run = cfgmod.run_config(doc, strategy=args.strategy, K=args.K, Q=args.Q,
                            threads=args.threads, seed=args.seed)
    if args.data:
        schema = cfgmod.csv_schema(doc)
        family = get_family(args.family or doc.get("sim", {}).get("family", "gaussian"))
        source = ArrayDataSource.from_batches(read_csv_batches(args.data, schema, 65536))
    else:
        spec = cfgmod.sim_spec(doc, family=args.family, N=args.N, seed=args.seed)
        family = spec.family
        source = ArrayDataSource.from_batches(simulate(spec))
    if run.strategy == "offline":
        est = run_offline(family, source, run)
    else:
        plan = partition(source.N, run.K, run.effective_Q, source.p, run.seed)
        runner = run_pasa if run.strategy == "pasa" else run_mapreduce
        est = runner(family, PartitionedData(source, plan), plan, run)
    if args.summaries_dir:
        d = Path(args.summaries_dir)
        d.mkdir(parents=True, exist_ok=True)
        for b in est.per_block:
            (d / f"block_{b.block_id:05d}.json").write_text(b.to_json() + "\n")
    _out(_estimate_output(est, args.format, args.level))
    return EXIT_OK


def cmd_combine(args, doc) -> int:
    d = Path(args.directory)
    if not d.is_dir():
        raise ConfigError(f"{d} is not a directory")
    files = sorted(d.glob("*.json"))
    if not files:
        raise ConfigError(f"no *.json block summaries in {d}")
    blocks = []
    for f in files:
        try:
            blocks.append(BlockSummary.from_json(f.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{f}: {exc}") from None
    ids = [b.block_id for b in blocks]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate block ids in {d}")
    _out(_estimate_output(combine(blocks), args.format, args.level))
    return EXIT_OK


def cmd_replicate(args, doc) -> int:
    table = doc.get("replicate", {})
    spec = cfgmod.sim_spec(doc, family=args.family, N=args.N, seed=args.seed)
    cells = cfgmod.parse_cells(args.cells or table.get("cells", "offline,mapreduce:10,pasa:10:10"))
    reports = run_replications(
        spec, cells, reps=args.reps or table.get("reps", 100),
        solver=cfgmod.solver_config(doc), threads=args.threads or 1,
        workers=args.workers or table.get("workers", 1),
        level=table.get("level", 0.95))
    text = emit_report(reports, args.format)
    if args.out:
        Path(args.out).write_text(text)
    _out(text)
    return EXIT_OK


def cmd_bench(args, doc) -> int:
    table = doc.get("bench", {})
    spec = cfgmod.sim_spec(doc, family=args.family, N=args.N or table.get("N"), seed=args.seed)
    cells = cfgmod.parse_cells(args.cells or table.get(
        "cells", "offline,mapreduce:10,pasa:10:10"))
    rows = run_benchmark(spec, cells, args.runs or table.get("runs", 10),
                         cfgmod.solver_config(doc), args.threads)
    _out(emit_rows(rows if args.raw else benchmark_medians(rows), args.format))
    return EXIT_OK


def cmd_select(args, doc) -> int:
    table_cfg = doc.get("select", {})
    run = cfgmod.run_config(doc, strategy=args.strategy or "pasa", K=args.K or 20,
                            Q=args.Q or 10, threads=args.threads, seed=args.seed)
    if args.synthetic:
        data = planted_interaction_table(args.synthetic, run.seed)
    elif args.data:
        data = Table.from_csv(args.data, cfgmod.csv_schema(doc))
    else:
        raise ConfigError("select needs --data or --synthetic")
    base = (args.base.split(",") if args.base else table_cfg.get("base_terms")) \
        or sorted(data.columns)
    if args.candidates:
        cands = args.candidates.split(",")
    else:
        cands = table_cfg.get("candidates") or pairwise_interactions(
            [b for b in base if ":" not in b])
    trace = forward_select(base, cands, None, data, run,
                           args.train_blocks or table_cfg.get("train_blocks"))
    d = trace.to_dict()
    if args.format == "json":
        _out(json.dumps(d, indent=2))
    else:
        rows = [{"step": s.step, "chosen": s.chosen or "(stop)", "auc": s.auc,
                 "evaluated": len(s.evaluated), "removed": len(s.removed)}
                for s in trace.steps]
        _out(emit_rows(rows, args.format))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "combine": cmd_combine,
            "replicate": cmd_replicate, "bench": cmd_bench, "select": cmd_select}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.format is None:
        args.format = "csv" if args.command == "bench" else "json"
    try:
        doc = cfgmod.load(args.config)
        if args.seed is None:
            args.seed = doc.get("run", {}).get("seed", doc.get("sim", {}).get("seed", 0))
        return COMMANDS[args.command](args, doc)
    except ConfigError as exc:
        print(f"pasa: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"pasa: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"pasa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PasaError as exc:  # pragma: no cover - every subclass is mapped above
        print(f"pasa: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
