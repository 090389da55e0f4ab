"""Tabular output as CSV (with a ``#`` config header) or JSON lines."""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    meta: dict[str, Any] = field(default_factory=dict)


def _plain(x):
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    return x


def complex_columns(name: str) -> list[str]:
    return [f"{name}_re", f"{name}_im"]


def _cell(x) -> str:
    x = _plain(x)
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def _parse_cell(s: str):
    if s == "true":
        return True
    if s == "false":
        return False
    if s == "":
        return None
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    for key, value in table.meta.items():
        buf.write(f"# {key}: {json.dumps(_plain(value), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def to_jsonl(table: Table) -> str:
    lines = [json.dumps({"meta": _plain(table.meta)}, sort_keys=True)]
    for row in table.rows:
        lines.append(json.dumps(dict(zip(table.columns, _plain(list(row))))))
    return "\n".join(lines) + "\n"


def emit_report(table: Table, fmt: str = "csv", path: str | Path | None = None) -> None:
    text = to_csv(table) if fmt == "csv" else to_jsonl(table)
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text)


def read_csv(path: str | Path) -> Table:
    return parse_csv(Path(path).read_text())


def parse_csv(text: str) -> Table:
    """Inverse of :func:`to_csv`."""
    meta: dict[str, Any] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [[_parse_cell(c) for c in r] for r in reader]
    return Table(columns, rows, meta)


def read_jsonl(path: str | Path) -> Table:
    records = [json.loads(line) for line in Path(path).read_text().splitlines() if line]
    meta = records[0].get("meta", {})
    columns: Sequence[str] = list(records[1].keys()) if len(records) > 1 else []
    rows = [[r[c] for c in columns] for r in records[1:]]
    return Table(list(columns), rows, meta)
