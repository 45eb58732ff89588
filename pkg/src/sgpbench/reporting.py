"""Benchmark output: long-form rows, seed-averaged pivot tables, file sinks.

Two artefacts are produced per run or run-group:

* a long-form table with one row per (method, seed, checkpoint), columns
  ``dataset, method, kernel, seed, m, elapsed_s, bound_kind, bound_value,
  upper_bound, rmse, nlpd, note``;
* a pivot with one column per scheduled budget M plus a ``final`` column,
  with cells averaged over seeds, one block per metric.

Floats are serialized with 17 significant digits so emitted files are
round-trippable and byte-identical across re-emissions of the same records.
Writes are atomic (temp file then rename).
"""

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["SCHEMA_VERSION", "RunManifest", "MetricRow", "pivot_table", "emit_report"]

SCHEMA_VERSION = 1

LONG_COLUMNS = (
    "dataset",
    "method",
    "kernel",
    "seed",
    "m",
    "elapsed_s",
    "bound_kind",
    "bound_value",
    "upper_bound",
    "rmse",
    "nlpd",
    "note",
)

_PIVOT_METRICS = ("bound_value", "rmse", "nlpd")


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run."""

    dataset: str
    method: str  # SGPR-baseline | GPR | SVGP | Linear | ConstantMean
    kernel: str
    seed: int
    config: dict = field(default_factory=dict)
    output_path: str = ""

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}


@dataclass(frozen=True)
class MetricRow:
    dataset: str
    method: str
    kernel: str
    seed: int
    m: int  # None for methods without a budget axis
    elapsed_s: float
    bound_kind: str  # "elbo" | "lml" | "train_loglik"
    bound_value: float
    upper_bound: float  # NaN for methods without one
    rmse: float
    nlpd: float
    note: str = ""


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _row_values(row):
    d = asdict(row)
    return [_fmt(d[c]) for c in LONG_COLUMNS]


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def pivot_table(rows):
    """Seed-averaged values per (metric, method) across budget columns.

    Returns ``{"columns": [...m values..., "final"], "cells": {metric:
    {method: {column: mean}}}}``.  The ``final`` column averages each seed's
    last checkpoint, whatever its budget; methods with no budget axis only
    fill ``final``.
    """
    m_values = sorted({row.m for row in rows if row.m is not None})
    columns = [str(m) for m in m_values] + ["final"]
    cells = {}
    for metric in _PIVOT_METRICS:
        per_method = {}
        methods = sorted({row.method for row in rows})
        for method in methods:
            method_rows = [r for r in rows if r.method == method]
            col_values = {}
            for m in m_values:
                vals = [getattr(r, metric) for r in method_rows if r.m == m]
                if vals:
                    col_values[str(m)] = float(np.mean(vals))
            finals = []
            for seed in sorted({r.seed for r in method_rows}):
                seed_rows = [r for r in method_rows if r.seed == seed]
                finals.append(getattr(seed_rows[-1], metric))
            col_values["final"] = float(np.mean(finals))
            per_method[method] = col_values
        cells[metric] = per_method
    return {"columns": columns, "cells": cells}


def _long_csv(rows):
    lines = [",".join(LONG_COLUMNS)]
    for row in rows:
        lines.append(",".join(_row_values(row)))
    return "\n".join(lines) + "\n"


def _pivot_csv(pivot):
    lines = ["metric,method," + ",".join(pivot["columns"])]
    for metric, per_method in pivot["cells"].items():
        for method, col_values in per_method.items():
            cells = [
                _fmt(col_values[c]) if c in col_values else ""
                for c in pivot["columns"]
            ]
            lines.append(",".join([metric, method] + cells))
    return "\n".join(lines) + "\n"


def emit_report(rows, manifest, out_dir, fmt="csv", prefix="report"):
    """Write the report files; returns the list of paths written.

    ``fmt="csv"`` writes ``<prefix>_long.csv``, ``<prefix>_pivot.csv`` and a
    ``<prefix>_manifest.json`` sidecar; ``fmt="json"`` writes a single
    ``<prefix>.json`` holding records, pivot and manifest.
    """
    if not rows:
        raise ValueError("need at least one record to emit")
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    pivot = pivot_table(rows)
    written = []
    if fmt == "csv":
        targets = {
            os.path.join(out_dir, f"{prefix}_long.csv"): _long_csv(rows),
            os.path.join(out_dir, f"{prefix}_pivot.csv"): _pivot_csv(pivot),
            os.path.join(out_dir, f"{prefix}_manifest.json"): json.dumps(
                manifest.to_dict(), indent=2, sort_keys=True
            )
            + "\n",
        }
    else:
        document = {
            "schema_version": SCHEMA_VERSION,
            "manifest": manifest.to_dict(),
            "columns": list(LONG_COLUMNS),
            "records": [
                {c: getattr(row, c) for c in LONG_COLUMNS} for row in rows
            ],
            "pivot": pivot,
        }
        targets = {
            os.path.join(out_dir, f"{prefix}.json"): json.dumps(
                document, indent=2, sort_keys=True, allow_nan=True
            )
            + "\n"
        }
    for path, text in targets.items():
        _atomic_write(path, text)
        written.append(path)
    return written
