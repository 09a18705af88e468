"""
Classical LD measures.

Each measure is defined on ProbTable (public functions) and as a vectorized
kernel over an (n, 4) array of cells ordered (p00, p01, p10, p11). Kernels
accept boundary cells (zeros) and return NaN where the formula is 0/0; the
plug-in estimators read that as "undefined".
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.special import xlogy

from ldcanon.tables import ProbTable, SymmetryElement, marginals, odds_ratio


class MeasureId(str, Enum):
    """Supported LD measures."""

    D = "d"
    DPRIME = "dprime"
    R = "r"
    LAMBDA = "lambda"
    Q = "q"
    MI = "mi"
    ETA = "eta"


# Measures whose value flips sign when a single allele is relabeled
SIGNED_MEASURES = frozenset({MeasureId.D, MeasureId.DPRIME, MeasureId.R, MeasureId.Q, MeasureId.ETA})

# Measures that are functions of the odds ratio alone
ODDS_MEASURES = frozenset({MeasureId.LAMBDA, MeasureId.Q, MeasureId.ETA})


@dataclass(frozen=True)
class MeasureValue:
    """
    Tagged measure result.

    defined=False marks a 0/0 evaluation (zero cells); value is then NaN.
    inflated=True marks a plug-in value that sits on the boundary of the
    measure's range only because of zero cells.
    """

    measure: MeasureId
    value: float
    defined: bool = True
    inflated: bool = False
    std_error: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["measure"] = self.measure.value
        if not self.defined:
            d["value"] = None
        return d


def symmetry_image(measure: MeasureId, value: float, s: SymmetryElement) -> float:
    """Value of `measure` on the relabeled table, given its value on the original."""
    if s.sign > 0:
        return value
    if measure in SIGNED_MEASURES:
        return -value
    if measure == MeasureId.LAMBDA:
        return 1.0 / value
    return value


# ---------------------------
# Vectorized kernels
# ---------------------------

def _split(cells: np.ndarray):
    cells = np.asarray(cells, dtype=float)
    return cells[..., 0], cells[..., 1], cells[..., 2], cells[..., 3]


def d_kernel(cells: np.ndarray) -> np.ndarray:
    p00, p01, p10, _ = _split(cells)
    return p00 - (p00 + p01) * (p00 + p10)


def dprime_kernel(cells: np.ndarray) -> np.ndarray:
    p00, p01, p10, p11 = _split(cells)
    d = p00 - (p00 + p01) * (p00 + p10)
    row0, row1 = p00 + p01, p10 + p11
    col0, col1 = p00 + p10, p01 + p11
    d_max = np.where(
        d >= 0.0,
        np.minimum(row0 * col1, col0 * row1),
        np.minimum(row0 * col0, row1 * col1),
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(d == 0.0, 0.0, d / d_max)
    return np.where((d != 0.0) & (d_max == 0.0), np.nan, out)


def r_kernel(cells: np.ndarray) -> np.ndarray:
    p00, p01, p10, p11 = _split(cells)
    d = p00 - (p00 + p01) * (p00 + p10)
    denom = np.sqrt((p00 + p01) * (p00 + p10) * (p10 + p11) * (p01 + p11))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0.0, d / denom, np.nan)


def log_lambda_kernel(cells: np.ndarray) -> np.ndarray:
    """log odds ratio; +-inf for one-sided zero cells, NaN for 0/0."""
    p00, p01, p10, p11 = _split(cells)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (np.log(p00) + np.log(p11)) - (np.log(p01) + np.log(p10))


def lambda_kernel(cells: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.exp(log_lambda_kernel(cells))


def q_kernel(cells: np.ndarray) -> np.ndarray:
    p00, p01, p10, p11 = _split(cells)
    s = log_lambda_kernel(cells)
    concordant, discordant = p00 * p11, p01 * p10
    with np.errstate(divide="ignore", invalid="ignore"):
        by_products = (concordant - discordant) / (concordant + discordant)
    return np.where(np.isnan(s), by_products, np.tanh(0.5 * s))


def mi_kernel(cells: np.ndarray) -> np.ndarray:
    p00, p01, p10, p11 = _split(cells)
    joint = xlogy(p00, p00) + xlogy(p01, p01) + xlogy(p10, p10) + xlogy(p11, p11)
    rows = xlogy(p00 + p01, p00 + p01) + xlogy(p10 + p11, p10 + p11)
    cols = xlogy(p00 + p10, p00 + p10) + xlogy(p01 + p11, p01 + p11)
    return np.maximum((joint - rows - cols) / math.log(2.0), 0.0)


CLASSICAL_KERNELS: Dict[MeasureId, Callable[[np.ndarray], np.ndarray]] = {
    MeasureId.D: d_kernel,
    MeasureId.DPRIME: dprime_kernel,
    MeasureId.R: r_kernel,
    MeasureId.LAMBDA: lambda_kernel,
    MeasureId.Q: q_kernel,
    MeasureId.MI: mi_kernel,
}


# ---------------------------
# Table-level measures
# ---------------------------

def d_coeff(t: ProbTable) -> float:
    """D = p00 - p0. p.0"""
    p0_, _, p_0, _ = marginals(t)
    return t.p00 - p0_ * p_0


def d_prime(t: ProbTable) -> float:
    """
    D' = D / D_max.

    D_max = min(p0. p.1, p.0 p1.) for D >= 0 and min(p0. p.0, p1. p.1) for D < 0.
    """
    d = d_coeff(t)
    if d == 0.0:
        return 0.0
    p0_, p1_, p_0, p_1 = marginals(t)
    if d > 0.0:
        d_max = min(p0_ * p_1, p_0 * p1_)
    else:
        d_max = min(p0_ * p_0, p1_ * p_1)
    return max(-1.0, min(1.0, d / d_max))


def correlation_r(t: ProbTable) -> float:
    p0_, p1_, p_0, p_1 = marginals(t)
    return d_coeff(t) / math.sqrt(p0_ * p_0 * p1_ * p_1)


def yules_q(t: ProbTable) -> float:
    """Q = (lambda - 1) / (lambda + 1), evaluated as tanh(log(lambda) / 2)."""
    lam = odds_ratio(t)
    if math.isfinite(lam) and lam < 1e300:
        return (lam - 1.0) / (lam + 1.0)
    return math.tanh(0.5 * math.log(lam))


def mutual_information(t: ProbTable) -> float:
    """Unnormalized mutual information in bits."""
    return float(mi_kernel(t.as_array()))


__all__ = [
    "MeasureId",
    "MeasureValue",
    "SIGNED_MEASURES",
    "ODDS_MEASURES",
    "CLASSICAL_KERNELS",
    "symmetry_image",
    "d_kernel",
    "dprime_kernel",
    "r_kernel",
    "log_lambda_kernel",
    "lambda_kernel",
    "q_kernel",
    "mi_kernel",
    "d_coeff",
    "d_prime",
    "correlation_r",
    "yules_q",
    "mutual_information",
]
