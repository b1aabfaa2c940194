"""CSV serialisation of coverage reports.

Floats are written with ``repr`` so that reading a file back reproduces every
value bit for bit, and two runs that agree numerically produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

REPORT_COLUMNS = (
    "setting", "method", "size_s", "coverage", "width_min", "width_med", "width_max",
    "total_coverage", "n", "d", "k", "alpha", "reps", "b", "seed",
)
_INT = {"method", "size_s", "n", "d", "k", "reps", "b", "seed"}
_STR = {"setting"}


def _fmt(key: str, value) -> str:
    if key in _STR:
        return str(value)
    if key in _INT:
        return str(int(value))
    return repr(float(value))


def write_rows(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in rows:
            w.writerow([_fmt(c, row[c]) for c in REPORT_COLUMNS])


def report_csv(report, path: str | Path) -> None:
    """Write a :class:`SimReport` (or a sequence of them) to ``path``."""
    reports = report if isinstance(report, (list, tuple)) else [report]
    write_rows([row for r in reports for row in r.rows()], path)


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for raw in reader:
            row = {}
            for k, v in raw.items():
                row[k] = v if k in _STR else int(v) if k in _INT else float(v)
            out.append(row)
    return out


def total_coverage_table(rows: Sequence[dict]) -> tuple[list[str], dict[int, dict[str, float]]]:
    """Method-by-setting table of simultaneous coverage over the whole collection."""
    settings: list[str] = []
    table: dict[int, dict[str, float]] = {}
    for row in rows:
        if row["setting"] not in settings:
            settings.append(row["setting"])
        table.setdefault(row["method"], {})[row["setting"]] = row["total_coverage"]
    return settings, dict(sorted(table.items()))


def format_total_table(rows: Sequence[dict]) -> str:
    settings, table = total_coverage_table(rows)
    lines = ["method," + ",".join(settings)]
    for method, vals in table.items():
        lines.append(f"method {method}," + ",".join(f"{vals.get(s, float('nan')):.3f}" for s in settings))
    return "\n".join(lines) + "\n"
