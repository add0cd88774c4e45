"""TOML configuration: one table per concern (sim, run, solver, schema, ...)."""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path
from typing import Any

import tomli

from .data import CategoricalColumn, CsvSchema, NumericColumn, SimSpec
from .errors import ConfigError
from .executor import RunConfig
from .glm import SolverConfig
from .report import Cell


def load_toml(path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _pick(cls, table: dict, section: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys {sorted(unknown)}")
    return dict(table)


def solver_config(doc: dict) -> SolverConfig:
    return SolverConfig(**_pick(SolverConfig, doc.get("solver", {}), "solver"))


def sim_spec(doc: dict, **overrides) -> SimSpec:
    table = _pick(SimSpec, doc.get("sim", {}), "sim")
    table.setdefault("family", "gaussian")
    table.setdefault("N", 100_000)
    table.update({k: v for k, v in overrides.items() if v is not None})
    if "beta0" in table:
        table["beta0"] = tuple(table["beta0"])
    return SimSpec(**table)


def run_config(doc: dict, **overrides) -> RunConfig:
    table = _pick(RunConfig, doc.get("run", {}), "run")
    table.pop("solver", None)
    table.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(solver=solver_config(doc), **table)


def csv_schema(doc: dict) -> CsvSchema:
    table = doc.get("schema")
    if not table:
        raise ConfigError("a [schema] table is required to read CSV data")
    table = _pick(CsvSchema, table, "schema")
    if "outcome" not in table:
        raise ConfigError("[schema] needs an 'outcome' column")
    table["numeric"] = tuple(NumericColumn(**c) if isinstance(c, dict) else NumericColumn(c)
                             for c in table.get("numeric", ()))
    try:
        table["categorical"] = tuple(CategoricalColumn(c["name"], tuple(c["levels"]),
                                                       str(c["reference"]))
                                     for c in table.get("categorical", ()))
    except KeyError as exc:
        raise ConfigError(f"[schema] categorical entry lacks {exc.args[0]!r}") from None
    table["interactions"] = tuple(tuple(t) for t in table.get("interactions", ()))
    return CsvSchema(**table)


def parse_cells(spec) -> list[Cell]:
    """Cells from TOML dicts or the ``strategy[:K[:Q]]`` shorthand."""
    cells = []
    items = spec.split(",") if isinstance(spec, str) else spec
    for item in items:
        if isinstance(item, dict):
            cells.append(Cell(item["strategy"], int(item.get("K", 1)), int(item.get("Q", 1))))
            continue
        parts = str(item).strip().split(":")
        try:
            nums = [int(x) for x in parts[1:]]
        except ValueError:
            raise ConfigError(f"bad cell {item!r}; expected strategy[:K[:Q]]") from None
        cells.append(Cell(parts[0], *nums))
    if not cells:
        raise ConfigError("no cells given")
    for c in cells:
        RunConfig(strategy=c.strategy)  # validates the name
    return cells


def load(path: str | Path | None) -> dict[str, Any]:
    return load_toml(path) if path else {}
