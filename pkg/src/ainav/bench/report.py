"""Table renderings of metrics rows (csv, json, markdown) and their readers."""

from __future__ import annotations

import csv
import io
import json
import os
from enum import Enum
from pathlib import Path
from typing import Sequence

from .metrics import METRICS, MetricsRow

COLUMNS = ("scenario", "method") + METRICS
UNDEFINED = "-"
DIGITS = 6


class ReportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    MARKDOWN = "markdown"

    @classmethod
    def from_path(cls, path: str | os.PathLike) -> "ReportFormat":
        suffix = Path(path).suffix.lower()
        return {".json": cls.JSON, ".md": cls.MARKDOWN, ".markdown": cls.MARKDOWN}.get(suffix, cls.CSV)


class ReportError(ValueError):
    pass


def _number(value: float | None) -> float | None:
    return None if value is None else round(value, DIGITS) + 0.0


def _cell(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.{DIGITS}f}"


def table_records(rows: Sequence[MetricsRow]) -> list[dict]:
    """The shared table: one record per scenario x method, metrics rounded once."""
    out = []
    for row in rows:
        rec = {"scenario": row.scenario, "method": row.method}
        rec.update({k: _number(v) for k, v in row.metrics().items()})
        out.append(rec)
    return out


def render(rows: Sequence[MetricsRow], fmt: ReportFormat | str) -> str:
    fmt = ReportFormat(fmt)
    if not rows:
        raise ReportError("nothing to report")
    records = table_records(rows)
    if fmt == ReportFormat.JSON:
        for rec, row in zip(records, rows):
            rec["trials"] = row.trials
            rec["failure_histogram"] = dict(row.failure_histogram)
        return json.dumps(records, indent=2) + "\n"
    text = [[rec["scenario"], rec["method"]] + [_cell(rec[m]) for m in METRICS] for rec in records]
    if fmt == ReportFormat.CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(text)
        return buf.getvalue()
    lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
    lines += ["| " + " | ".join(r) + " |" for r in text]
    return "\n".join(lines) + "\n"


def emit_report(rows: Sequence[MetricsRow], path: str | os.PathLike, fmt: ReportFormat | str | None = None) -> Path:
    """Write ``rows`` to ``path``; the format defaults to the file extension."""
    path = Path(path)
    body = render(rows, fmt or ReportFormat.from_path(path))
    try:
        path.write_text(body)
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return path


def _parse_cell(text: str) -> float | None:
    text = text.strip()
    return None if text == UNDEFINED else float(text)


def _from_cells(cells: Sequence[str]) -> dict:
    if len(cells) != len(COLUMNS):
        raise ReportError(f"expected {len(COLUMNS)} columns, got {len(cells)}")
    rec = {"scenario": cells[0].strip(), "method": cells[1].strip()}
    rec.update({m: _parse_cell(c) for m, c in zip(METRICS, cells[2:])})
    return rec


def parse_json(text: str) -> list[dict]:
    return [{k: rec[k] for k in COLUMNS} for rec in json.loads(text)]


def parse_csv(text: str) -> list[dict]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ReportError("csv header does not match the metrics columns")
    return [_from_cells(r) for r in rows[1:] if r]


def parse_markdown(text: str) -> list[dict]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip().startswith("|")]
    if len(lines) < 2:
        raise ReportError("no markdown table found")
    header = tuple(c.strip() for c in lines[0].strip("|").split("|"))
    if header != COLUMNS:
        raise ReportError("markdown header does not match the metrics columns")
    return [_from_cells(ln.strip("|").split("|")) for ln in lines[2:]]


def markdown_to_json(text: str) -> str:
    """Re-encode a markdown table in the json layout (without the per-row extras)."""
    return json.dumps(parse_markdown(text), indent=2) + "\n"


def read_report(path: str | os.PathLike, fmt: ReportFormat | str | None = None) -> list[dict]:
    path = Path(path)
    fmt = ReportFormat(fmt or ReportFormat.from_path(path))
    parser = {ReportFormat.JSON: parse_json, ReportFormat.CSV: parse_csv, ReportFormat.MARKDOWN: parse_markdown}[fmt]
    return parser(path.read_text())


__all__ = [
    "COLUMNS",
    "ReportError",
    "ReportFormat",
    "emit_report",
    "markdown_to_json",
    "parse_csv",
    "parse_json",
    "parse_markdown",
    "read_report",
    "render",
    "table_records",
]
