"""Schema + validation for eta calibration files."""

from __future__ import annotations

import math
from typing import Any, Dict

CALIBRATION_MAGIC = "ldcanon-calibration"
SUPPORTED_VERSIONS = {"v1"}

# Calibration methods (must match ldcanon.canonical.CalibrationMethod values)
METHODS = {"analytic_1", "analytic_half", "quadrature", "monte_carlo"}

# Optional header fields and their types
OPTIONAL_FIELDS = {"tolerance": float, "samples": int, "seed": int}


def parse_calibration_header(line: str) -> Dict[str, Any]:
    """
    Parse the first line of a calibration file.

        # ldcanon-calibration v1 alpha=<a> method=<m> [tolerance=..] [samples=..] [seed=..]

    Returns:
        dict with alpha (float), method (str) and any optional fields present

    Raises:
        ValueError: If the header is malformed
    """
    if not isinstance(line, str):
        raise ValueError("header must be str")
    tokens = line.split()
    if len(tokens) < 3 or tokens[0] != "#" or tokens[1] != CALIBRATION_MAGIC:
        raise ValueError(f"not a calibration file header: {line!r}")
    if tokens[2] not in SUPPORTED_VERSIONS:
        raise ValueError(f"unsupported calibration version: {tokens[2]}")

    fields: Dict[str, str] = {}
    for token in tokens[3:]:
        key, sep, value = token.partition("=")
        if not sep or not value:
            raise ValueError(f"malformed header field: {token!r}")
        if key in fields:
            raise ValueError(f"duplicate header field: {key}")
        fields[key] = value

    if "alpha" not in fields:
        raise ValueError("header requires alpha")
    if "method" not in fields:
        raise ValueError("header requires method")
    unknown = set(fields) - {"alpha", "method"} - set(OPTIONAL_FIELDS)
    if unknown:
        raise ValueError(f"unknown header fields: {sorted(unknown)}")

    try:
        alpha = float(fields["alpha"])
    except ValueError:
        raise ValueError(f"alpha must be numeric, got: {fields['alpha']}")
    if not math.isfinite(alpha) or alpha <= 0.0:
        raise ValueError(f"alpha must be finite and > 0, got: {alpha}")

    method = fields["method"]
    if method not in METHODS:
        raise ValueError(f"method must be one of {sorted(METHODS)}, got: {method}")

    meta: Dict[str, Any] = {"alpha": alpha, "method": method}
    for key, kind in OPTIONAL_FIELDS.items():
        if key not in fields:
            continue
        try:
            meta[key] = kind(fields[key])
        except ValueError:
            raise ValueError(f"{key} must be {kind.__name__}, got: {fields[key]}")

    if "tolerance" in meta and not (meta["tolerance"] > 0.0):
        raise ValueError("tolerance must be > 0")
    if "samples" in meta and meta["samples"] < 1:
        raise ValueError("samples must be >= 1")
    return meta


__all__ = ["parse_calibration_header", "METHODS", "CALIBRATION_MAGIC"]
