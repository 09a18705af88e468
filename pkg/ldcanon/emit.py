"""
Output emission - validated CSV and JSON writers.

Emission boundary: every record is validated against its schema before
anything is written; a failing record aborts the write (fail closed).
Floats are written with 17 significant digits in CSV. JSON uses the
shortest repr that parses back to the same double, so a JSON float round-trips
bit-exactly without a fixed digit count. NaN and infinities become null.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from ldcanon.errors import OutputValidationError
from schemas.study_report import TABLE_VALIDATORS, validate_manifest, validate_study_report

logger = logging.getLogger(__name__)

FAILED_MARKER = "FAILED"
CSV_FLOAT_FORMAT = "{:.17g}"
HUMAN_FLOAT_FORMAT = "{:.6g}"


def canonicalize(value: Any) -> Any:
    """Plain JSON-safe Python values; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): canonicalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonicalize(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return CSV_FLOAT_FORMAT.format(value)
    return str(value)


def _validate(rows: Sequence[Dict[str, Any]], validator: Optional[Callable[[Any], None]], name: str) -> None:
    if validator is None:
        return
    for index, row in enumerate(rows):
        try:
            validator(row)
        except ValueError as exc:
            logger.error(f"{name} row {index} failed validation: {exc}")
            raise OutputValidationError(f"{name} row {index}: {exc}") from exc


def csv_text(rows: Sequence[Dict[str, Any]], fields: Optional[Sequence[str]] = None) -> str:
    """CSV (comma, LF, header row) for rows; fields default to the union in first-seen order."""
    rows = [canonicalize(r) for r in rows]
    if fields is None:
        fields = []
        for row in rows:
            fields.extend(k for k in row if k not in fields)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([_csv_cell(row.get(f)) for f in fields])
    return buffer.getvalue()


def json_text(payload: Any) -> str:
    return json.dumps(canonicalize(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_csv(path: Path, rows: Sequence[Dict[str, Any]], validator: Optional[Callable[[Any], None]] = None,
              fields: Optional[Sequence[str]] = None) -> Path:
    rows = [canonicalize(r) for r in rows]
    _validate(rows, validator, Path(path).name)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(rows, fields), encoding="utf-8")
    return path


def write_json(path: Path, payload: Any, validator: Optional[Callable[[Any], None]] = None) -> Path:
    payload = canonicalize(payload)
    if validator is not None:
        try:
            validator(payload)
        except ValueError as exc:
            raise OutputValidationError(f"{Path(path).name}: {exc}") from exc
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json_text(payload), encoding="utf-8")
    return path


def write_report(report, out_dir: Path) -> List[Path]:
    """
    Write a StudyReport: <kind>.csv (primary table), <kind>_<table>.csv for
    the others, and the <kind>.json mirror. Returns the written paths.
    """
    out_dir = Path(out_dir)
    kind = report.kind.value
    paths = []
    for name, rows in report.tables.items():
        filename = f"{kind}.csv" if name == report.primary else f"{kind}_{name}.csv"
        paths.append(write_csv(out_dir / filename, rows, TABLE_VALIDATORS.get(name)))
    paths.append(write_json(out_dir / f"{kind}.json", report.to_dict(), validate_study_report))
    return paths


def write_manifest_json(path: Path, manifest: Dict[str, Any]) -> Path:
    return write_json(path, manifest, validate_manifest)


def write_failed_marker(out_dir: Path, reason: str) -> Path:
    path = Path(out_dir) / FAILED_MARKER
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(reason.rstrip() + "\n", encoding="utf-8")
    return path


def format_table(rows: Iterable[Dict[str, Any]], fields: Sequence[str]) -> str:
    """Aligned human-readable table, floats at 6 significant digits."""
    def cell(value: Any) -> str:
        if value is None:
            return "NA"
        if isinstance(value, float):
            return HUMAN_FLOAT_FORMAT.format(value)
        return str(value)

    body = [[cell(canonicalize(row).get(f)) for f in fields] for row in rows]
    widths = [max([len(f)] + [len(r[k]) for r in body]) for k, f in enumerate(fields)]
    lines = ["  ".join(f.ljust(w) for f, w in zip(fields, widths))]
    lines.extend("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body)
    return "\n".join(lines)


__all__ = [
    "FAILED_MARKER",
    "canonicalize",
    "csv_text",
    "json_text",
    "write_csv",
    "write_json",
    "write_report",
    "write_manifest_json",
    "write_failed_marker",
    "format_table",
]
