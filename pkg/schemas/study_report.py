"""Schema + validation for ldcanon output records (study reports, pairwise rows, manifests)."""

from __future__ import annotations

import math
from typing import Any, Dict

# Study kinds (must match ldcanon.simulation.StudyKind values)
STUDY_KINDS = {"mse", "kendall", "distribution"}
BINNINGS = {"both", "row", "min"}

MSE_FIELDS = (
    "measure", "estimator", "prior", "n", "mse", "std_error", "replicates",
    "excluded", "mse_strict", "std_error_strict", "excluded_strict",
)
KENDALL_FIELDS = ("bin_lo", "bin_hi", "binning", "tables", "tau_dprime_lambda", "tau_dprime_eta", "eta")
SUMMARY_FIELDS = ("measure", "draws", "ks_statistic", "ks_pvalue", "iqr", "mean")
HISTOGRAM_FIELDS = ("series", "bin_lo", "bin_hi", "count", "density")
PAIR_FIELDS = ("marker_i", "marker_j", "n_complete", "estimate")
MANIFEST_FIELDS = ("command", "argv", "flags", "seed", "tool_version", "timestamp", "inputs", "outputs")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require_fields(record: Any, fields) -> None:
    if not isinstance(record, dict):
        raise ValueError("record must be dict")
    missing = [f for f in fields if f not in record]
    if missing:
        raise ValueError(f"record missing fields: {missing}")


def _finite(record: Dict[str, Any], key: str, nullable: bool = False) -> None:
    value = record.get(key)
    if value is None and nullable:
        return
    if not _is_number(value) or not math.isfinite(value):
        raise ValueError(f"{key} must be a finite number, got: {value!r}")


def _count(record: Dict[str, Any], key: str, minimum: int = 0) -> None:
    value = record.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ValueError(f"{key} must be an integer >= {minimum}, got: {value!r}")


def _label(record: Dict[str, Any], key: str) -> None:
    value = record.get(key)
    if not isinstance(value, str) or not value:
        raise ValueError(f"{key} must be a non-empty string")


def validate_mse_row(row: Any) -> None:
    """Validate one MSE study row."""
    _require_fields(row, MSE_FIELDS)
    for key in ("measure", "estimator", "prior"):
        _label(row, key)
    _count(row, "n", 1)
    _count(row, "replicates", 0)
    for mse_key, se_key, excluded_key in (("mse", "std_error", "excluded"),
                                          ("mse_strict", "std_error_strict", "excluded_strict")):
        _count(row, excluded_key, 0)
        if row[excluded_key] > row["replicates"]:
            raise ValueError(f"{excluded_key} exceeds replicates")
        _finite(row, mse_key, nullable=True)
        _finite(row, se_key, nullable=True)
        if row[mse_key] is not None and row[mse_key] < 0.0:
            raise ValueError(f"{mse_key} must be >= 0")
        if row[se_key] is not None and row[se_key] < 0.0:
            raise ValueError(f"{se_key} must be >= 0")
        if row[mse_key] is None and row[excluded_key] != row["replicates"]:
            raise ValueError(f"{mse_key} is null but not every replicate was excluded")


def validate_kendall_row(row: Any) -> None:
    """Validate one Kendall study row."""
    _require_fields(row, KENDALL_FIELDS)
    _finite(row, "bin_lo")
    _finite(row, "bin_hi")
    if not (0.0 <= row["bin_lo"] < row["bin_hi"] <= 0.5):
        raise ValueError("bin must satisfy 0 <= bin_lo < bin_hi <= 0.5")
    if row["binning"] not in BINNINGS:
        raise ValueError(f"binning must be one of {sorted(BINNINGS)}")
    _count(row, "tables", 1)
    for key in ("tau_dprime_lambda", "tau_dprime_eta"):
        _finite(row, key)
        if not -1.0 <= row[key] <= 1.0:
            raise ValueError(f"{key} must lie in [-1, 1]")
    _label(row, "eta")


def validate_summary_row(row: Any) -> None:
    """Validate one distribution-study summary row."""
    _require_fields(row, SUMMARY_FIELDS)
    _label(row, "measure")
    _count(row, "draws", 1)
    for key in ("ks_statistic", "ks_pvalue"):
        _finite(row, key)
        if not 0.0 <= row[key] <= 1.0:
            raise ValueError(f"{key} must lie in [0, 1]")
    _finite(row, "iqr")
    _finite(row, "mean")


def validate_histogram_row(row: Any) -> None:
    """Validate one histogram row (measure or log-lambda series)."""
    _require_fields(row, HISTOGRAM_FIELDS)
    _label(row, "series")
    _finite(row, "bin_lo")
    _finite(row, "bin_hi")
    if row["bin_lo"] >= row["bin_hi"]:
        raise ValueError("bin_lo must be < bin_hi")
    _count(row, "count", 0)
    _finite(row, "density")
    if row["density"] < 0.0:
        raise ValueError("density must be >= 0")
    if "reference_density" in row:
        _finite(row, "reference_density", nullable=True)


def validate_scatter_row(row: Any) -> None:
    """Validate one scatter sample row."""
    if not isinstance(row, dict) or "index" not in row:
        raise ValueError("scatter row must be dict with index")
    _count(row, "index", 0)
    for key, value in row.items():
        if key == "index":
            continue
        if value is not None and not _is_number(value):
            raise ValueError(f"scatter value {key} must be numeric or null")
        if value is not None and math.isnan(value):
            raise ValueError(f"scatter value {key} must not be NaN")


def validate_pair_row(row: Any) -> None:
    """Validate one pairwise LD row."""
    _require_fields(row, PAIR_FIELDS)
    _label(row, "marker_i")
    _label(row, "marker_j")
    if row["marker_i"] == row["marker_j"]:
        raise ValueError("pair must name two distinct markers")
    _count(row, "n_complete", 0)
    _finite(row, "estimate", nullable=True)


def validate_measure_record(record: Any) -> None:
    """Validate one `measure` command output record."""
    _require_fields(record, ("measure", "estimator", "value", "defined", "inflated"))
    _label(record, "measure")
    _label(record, "estimator")
    if not isinstance(record["defined"], bool) or not isinstance(record["inflated"], bool):
        raise ValueError("defined and inflated must be booleans")
    if record["defined"]:
        _finite(record, "value")
    elif record["value"] is not None:
        raise ValueError("undefined value must be null")
    if record.get("std_error") is not None:
        _finite(record, "std_error")


def validate_manifest(payload: Any) -> None:
    """Validate a run manifest."""
    _require_fields(payload, MANIFEST_FIELDS)
    _label(payload, "command")
    if not isinstance(payload["argv"], list) or not all(isinstance(a, str) for a in payload["argv"]):
        raise ValueError("argv must be list of strings")
    if not isinstance(payload["flags"], dict):
        raise ValueError("flags must be dict")
    seed = payload["seed"]
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise ValueError("seed must be integer or null")
    for key in ("inputs", "outputs"):
        digests = payload[key]
        if not isinstance(digests, dict):
            raise ValueError(f"{key} must be dict")
        for name, digest in digests.items():
            if not isinstance(digest, str) or len(digest) != 64:
                raise ValueError(f"{key}[{name}] must be a sha256 hex digest")


TABLE_VALIDATORS = {
    "mse": validate_mse_row,
    "kendall": validate_kendall_row,
    "summary": validate_summary_row,
    "histogram": validate_histogram_row,
    "log_lambda": validate_histogram_row,
    "scatter": validate_scatter_row,
    "pairs": validate_pair_row,
    "measures": validate_measure_record,
}


def validate_study_report(payload: Any) -> None:
    """Validate the JSON form of a study report (every table, every row)."""
    _require_fields(payload, ("kind", "complete", "config", "metadata", "primary", "tables"))
    if payload["kind"] not in STUDY_KINDS:
        raise ValueError(f"kind must be one of {sorted(STUDY_KINDS)}")
    if not isinstance(payload["tables"], dict) or payload["primary"] not in payload["tables"]:
        raise ValueError("primary must name one of the tables")
    for name, rows in payload["tables"].items():
        validator = TABLE_VALIDATORS.get(name)
        if validator is None:
            raise ValueError(f"unknown table {name!r}")
        if not isinstance(rows, list):
            raise ValueError(f"table {name} must be a list")
        for row in rows:
            validator(row)


__all__ = [
    "validate_mse_row",
    "validate_kendall_row",
    "validate_summary_row",
    "validate_histogram_row",
    "validate_scatter_row",
    "validate_pair_row",
    "validate_measure_record",
    "validate_manifest",
    "validate_study_report",
    "TABLE_VALIDATORS",
]
