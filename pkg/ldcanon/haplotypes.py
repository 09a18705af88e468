"""
Haplotype matrix - phased 0/1 marker data and pairwise LD.

TSV format:
    header row of marker ids (unique), tab separated
    one row per haplotype, cells "0", "1" or "." (missing)

Pairs are analysed complete-case: a haplotype contributes to the (i, j)
count table only when both markers are observed.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ldcanon.errors import HaplotypeFormatError, InputError, NumericalError
from ldcanon.estimators import EstimatorSpec, MeasureRequest, estimate
from ldcanon.tables import CountTable

logger = logging.getLogger(__name__)

MISSING = -1
MISSING_TOKEN = "."
ALLELE_TOKENS = {"0": 0, "1": 1, MISSING_TOKEN: MISSING}


@dataclass(frozen=True)
class HaplotypeMatrix:
    """H haplotypes x M markers; alleles 0/1, MISSING for unobserved."""

    markers: Tuple[str, ...]
    alleles: np.ndarray

    def __post_init__(self) -> None:
        alleles = np.asarray(self.alleles, dtype=np.int8)
        if alleles.ndim != 2 or alleles.shape[1] != len(self.markers):
            raise HaplotypeFormatError(
                f"allele matrix shape {alleles.shape} does not match {len(self.markers)} markers"
            )
        if len(set(self.markers)) != len(self.markers):
            raise HaplotypeFormatError("marker ids must be unique")
        if not np.all(np.isin(alleles, (0, 1, MISSING))):
            raise HaplotypeFormatError("alleles must be 0, 1 or missing")
        object.__setattr__(self, "alleles", alleles)

    @property
    def haplotypes(self) -> int:
        return int(self.alleles.shape[0])

    @property
    def marker_count(self) -> int:
        return len(self.markers)

    def missing_fractions(self) -> np.ndarray:
        """Per-marker fraction of missing calls."""
        if self.haplotypes == 0:
            return np.ones(self.marker_count)
        return np.mean(self.alleles == MISSING, axis=0)

    def minor_allele_frequencies(self) -> np.ndarray:
        """Per-marker MAF over observed calls (0 for a marker with no calls)."""
        observed = self.alleles != MISSING
        called = observed.sum(axis=0)
        ones = ((self.alleles == 1) & observed).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            freq = np.where(called > 0, ones / np.maximum(called, 1), 0.0)
        return np.where(called > 0, np.minimum(freq, 1.0 - freq), 0.0)

    def pair_counts(self, i: int, j: int) -> Tuple[int, int, int, int]:
        """Complete-case (n00, n01, n10, n11) for markers i (rows) and j (columns)."""
        a, b = self.alleles[:, i], self.alleles[:, j]
        both = (a != MISSING) & (b != MISSING)
        a, b = a[both], b[both]
        return (
            int(np.count_nonzero((a == 0) & (b == 0))),
            int(np.count_nonzero((a == 0) & (b == 1))),
            int(np.count_nonzero((a == 1) & (b == 0))),
            int(np.count_nonzero((a == 1) & (b == 1))),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "markers": list(self.markers),
            "haplotypes": self.haplotypes,
            "missing_fractions": [float(f) for f in self.missing_fractions()],
        }


def read_haplotypes(path: Path) -> HaplotypeMatrix:
    """
    Parse a haplotype TSV.

    Raises:
        HaplotypeFormatError: On unreadable files, ragged rows, bad cells or duplicate ids.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise HaplotypeFormatError(f"cannot read haplotype file {path}: {exc}") from exc

    lines = [line.rstrip("\r") for line in text.split("\n")]
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise HaplotypeFormatError(f"{path}: empty haplotype file")

    markers = tuple(field.strip() for field in lines[0].split("\t"))
    if any(not m for m in markers):
        raise HaplotypeFormatError(f"{path}:1: empty marker id")
    seen = set()
    for marker in markers:
        if marker in seen:
            raise HaplotypeFormatError(f"{path}:1: duplicate marker id {marker!r}")
        seen.add(marker)

    rows: List[List[int]] = []
    for number, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split("\t")]
        if len(cells) != len(markers):
            raise HaplotypeFormatError(f"{path}:{number}: expected {len(markers)} cells, got {len(cells)}")
        try:
            rows.append([ALLELE_TOKENS[c] for c in cells])
        except KeyError as exc:
            raise HaplotypeFormatError(f"{path}:{number}: bad allele {exc.args[0]!r} (expected 0, 1 or .)")

    alleles = np.asarray(rows, dtype=np.int8).reshape(len(rows), len(markers))
    matrix = HaplotypeMatrix(markers=markers, alleles=alleles)
    logger.info(f"read {matrix.haplotypes} haplotypes x {matrix.marker_count} markers from {path}")
    return matrix


# ---------------------------
# Pairwise LD
# ---------------------------

@dataclass(frozen=True)
class PairEstimate:
    """One row of the pairwise output; estimate is None when not computable."""

    marker_i: str
    marker_j: str
    n_complete: int
    estimate: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "marker_i": self.marker_i,
            "marker_j": self.marker_j,
            "n_complete": self.n_complete,
            "estimate": self.estimate,
        }


def iter_pairs(matrix: HaplotypeMatrix, min_maf: float = 0.0,
               max_pairs: Optional[int] = None) -> Iterator[Tuple[int, int]]:
    """(i, j) with i < j in input order, restricted to markers with MAF > min_maf."""
    keep = [k for k, maf in enumerate(matrix.minor_allele_frequencies()) if min_maf <= 0.0 or maf > min_maf]
    emitted = 0
    for a, i in enumerate(keep):
        for j in keep[a + 1:]:
            if max_pairs is not None and emitted >= max_pairs:
                return
            yield i, j
            emitted += 1


def estimate_pair(matrix: HaplotypeMatrix, i: int, j: int, request: MeasureRequest,
                  spec: EstimatorSpec, min_n: int = 1) -> PairEstimate:
    counts = matrix.pair_counts(i, j)
    n = sum(counts)
    value: Optional[float] = None
    if n >= max(1, min_n):
        try:
            result = estimate(CountTable(*counts), request, spec)
            value = result.value if result.defined else None
        except (InputError, NumericalError) as exc:
            logger.debug(f"pair {matrix.markers[i]}/{matrix.markers[j]}: {exc}")
    else:
        logger.debug(f"pair {matrix.markers[i]}/{matrix.markers[j]} skipped: N={n} < {min_n}")
    return PairEstimate(matrix.markers[i], matrix.markers[j], n, value)


def _pair_chunk(matrix: HaplotypeMatrix, pairs: Sequence[Tuple[int, int]], request: MeasureRequest,
                spec: EstimatorSpec, min_n: int) -> List[PairEstimate]:
    return [estimate_pair(matrix, i, j, request, spec, min_n) for i, j in pairs]


def pairwise_estimates(
    matrix: HaplotypeMatrix,
    request: MeasureRequest,
    spec: EstimatorSpec,
    min_n: int = 1,
    min_maf: float = 0.0,
    max_pairs: Optional[int] = None,
    workers: int = 1,
) -> List[PairEstimate]:
    """All pair estimates in deterministic (i < j, input order) order."""
    pairs = list(iter_pairs(matrix, min_maf, max_pairs))
    if workers <= 1 or len(pairs) < 2:
        return _pair_chunk(matrix, pairs, request, spec, min_n)
    size = max(1, -(-len(pairs) // (workers * 4)))
    chunks = [pairs[k:k + size] for k in range(0, len(pairs), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_pair_chunk, matrix, chunk, request, spec, min_n) for chunk in chunks]
        return [row for future in futures for row in future.result()]


__all__ = [
    "MISSING",
    "HaplotypeMatrix",
    "PairEstimate",
    "read_haplotypes",
    "iter_pairs",
    "estimate_pair",
    "pairwise_estimates",
]
