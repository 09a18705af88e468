"""
Table types and the groups acting on them.

A ProbTable is a point of the open simplex of 2x2 haplotype tables:
four strictly positive cells summing to 1, indexed

    p00 p01
    p10 p11

Two groups act on tables:
1. The dihedral group of order 8 (transpose, row swap, column swap), which
   relabels alleles and markers. Each element carries a sign: LD measures
   flip sign under a single allele swap.
2. The selection group g(mu, nu), which rescales row 0 by mu and column 0
   by nu and renormalizes. The odds ratio is its complete invariant: every
   orbit contains exactly one table with all marginals 1/2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Iterable, Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaln

from ldcanon.errors import (
    InputError,
    InvalidCountTable,
    NonPositiveEntry,
    NonPositiveLambda,
    NonPositiveScale,
)


# ---------------------------
# Constants
# ---------------------------

RENORMALIZE_TOL = 1e-9     # larger sum deviations are misuse, not rounding
LOG_SPACE_FLOOR = 1e-12    # below this entry size the odds ratio goes through logs


# ---------------------------
# Core types
# ---------------------------

@dataclass(frozen=True)
class ProbTable:
    """Strictly positive 2x2 probability table summing to 1."""

    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self) -> None:
        cells = (self.p00, self.p01, self.p10, self.p11)
        for name, value in zip(("p00", "p01", "p10", "p11"), cells):
            if not isinstance(value, (int, float, np.floating)) or isinstance(value, bool):
                raise NonPositiveEntry(f"{name} must be numeric, got {value!r}")
            if not math.isfinite(value) or value <= 0.0:
                raise NonPositiveEntry(f"{name} must be finite and > 0, got {value!r}")
        total = math.fsum(cells)
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise InputError(f"table sums to {total!r}; use make_prob_table to normalize")
        for name, value in zip(("p00", "p01", "p10", "p11"), cells):
            object.__setattr__(self, name, float(value) / total)

    def cells(self) -> Tuple[float, float, float, float]:
        return (self.p00, self.p01, self.p10, self.p11)

    def as_array(self) -> np.ndarray:
        return np.array(self.cells(), dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class CountTable:
    """Observed 2x2 table of non-negative integer counts, N >= 1."""

    n00: int
    n01: int
    n10: int
    n11: int

    def __post_init__(self) -> None:
        cells = (self.n00, self.n01, self.n10, self.n11)
        for name, value in zip(("n00", "n01", "n10", "n11"), cells):
            if isinstance(value, bool) or int(value) != value:
                raise InvalidCountTable(f"{name} must be an integer, got {value!r}")
            if value < 0:
                raise InvalidCountTable(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, int(value))
        if sum(cells) < 1:
            raise InvalidCountTable("count table total N must be >= 1")

    @property
    def total(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11

    def cells(self) -> Tuple[int, int, int, int]:
        return (self.n00, self.n01, self.n10, self.n11)

    def margins(self) -> Tuple[int, int, int, int]:
        """Row 0, row 1, column 0, column 1 totals."""
        return (
            self.n00 + self.n01,
            self.n10 + self.n11,
            self.n00 + self.n10,
            self.n01 + self.n11,
        )

    def frequencies(self) -> Tuple[float, float, float, float]:
        n = self.total
        return (self.n00 / n, self.n01 / n, self.n10 / n, self.n11 / n)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class DirichletParams:
    """Concentration parameters of a Dirichlet distribution on 2x2 tables."""

    a00: float
    a01: float
    a10: float
    a11: float

    def __post_init__(self) -> None:
        for name, value in zip(("a00", "a01", "a10", "a11"), self.cells()):
            if not math.isfinite(value) or value <= 0.0:
                raise InputError(f"Dirichlet parameter {name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, float(value))

    @classmethod
    def of(cls, alpha: Union[float, Sequence[float], "DirichletParams"]) -> "DirichletParams":
        """Build from a scalar (symmetric prior) or four values."""
        if isinstance(alpha, DirichletParams):
            return alpha
        if isinstance(alpha, (int, float, np.floating)):
            a = float(alpha)
            return cls(a, a, a, a)
        values = [float(v) for v in alpha]
        if len(values) == 1:
            return cls(values[0], values[0], values[0], values[0])
        if len(values) != 4:
            raise InputError(f"Dirichlet parameters need 1 or 4 values, got {len(values)}")
        return cls(*values)

    def cells(self) -> Tuple[float, float, float, float]:
        return (self.a00, self.a01, self.a10, self.a11)

    def as_array(self) -> np.ndarray:
        return np.array(self.cells(), dtype=float)

    def symmetric(self) -> bool:
        return self.a00 == self.a01 == self.a10 == self.a11

    @property
    def scalar(self) -> float:
        """The common value of a symmetric prior."""
        if not self.symmetric():
            raise InputError(f"prior {self.label} is not symmetric")
        return self.a00

    @property
    def total(self) -> float:
        return math.fsum(self.cells())

    def log_beta(self) -> float:
        """log B(alpha) = sum log Gamma(a_ij) - log Gamma(sum a_ij)."""
        return float(np.sum(gammaln(self.as_array())) - gammaln(self.total))

    def posterior(self, counts: CountTable) -> "DirichletParams":
        return DirichletParams(*(a + n for a, n in zip(self.cells(), counts.cells())))

    @property
    def label(self) -> str:
        if self.symmetric():
            return f"D({self.a00:g})"
        return "D(" + ",".join(f"{a:g}" for a in self.cells()) + ")"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# ---------------------------
# Dihedral symmetry group
# ---------------------------

class SymmetryElement(str, Enum):
    """The eight relabelings of a 2x2 table."""

    IDENTITY = "identity"
    TRANSPOSE = "transpose"
    ROW_SWAP = "row_swap"
    COL_SWAP = "col_swap"
    BOTH_SWAP = "both_swap"
    ANTI_TRANSPOSE = "anti_transpose"
    TRANSPOSE_ROW_SWAP = "transpose_row_swap"
    TRANSPOSE_COL_SWAP = "transpose_col_swap"

    @property
    def permutation(self) -> Tuple[int, int, int, int]:
        return SYMMETRY_PERMUTATIONS[self]

    @property
    def sign(self) -> int:
        """+1 if the element keeps the main diagonal, -1 if it exchanges diagonals."""
        perm = self.permutation
        return 1 if {perm[0], perm[3]} == {0, 3} else -1

    def compose(self, then: "SymmetryElement") -> "SymmetryElement":
        """Element equal to applying self first, then `then`."""
        first, second = self.permutation, then.permutation
        return _ELEMENT_BY_PERMUTATION[tuple(first[second[k]] for k in range(4))]

    def inverse(self) -> "SymmetryElement":
        perm = self.permutation
        inv = [0, 0, 0, 0]
        for k, source in enumerate(perm):
            inv[source] = k
        return _ELEMENT_BY_PERMUTATION[tuple(inv)]


# new_cells[k] = old_cells[perm[k]], cells ordered (00, 01, 10, 11)
SYMMETRY_PERMUTATIONS: Dict[SymmetryElement, Tuple[int, int, int, int]] = {
    SymmetryElement.IDENTITY: (0, 1, 2, 3),
    SymmetryElement.TRANSPOSE: (0, 2, 1, 3),
    SymmetryElement.ROW_SWAP: (2, 3, 0, 1),
    SymmetryElement.COL_SWAP: (1, 0, 3, 2),
    SymmetryElement.BOTH_SWAP: (3, 2, 1, 0),
    SymmetryElement.ANTI_TRANSPOSE: (3, 1, 2, 0),
    SymmetryElement.TRANSPOSE_ROW_SWAP: (2, 0, 3, 1),
    SymmetryElement.TRANSPOSE_COL_SWAP: (1, 3, 0, 2),
}

_ELEMENT_BY_PERMUTATION: Dict[Tuple[int, ...], SymmetryElement] = {
    perm: element for element, perm in SYMMETRY_PERMUTATIONS.items()
}


# ---------------------------
# Operations
# ---------------------------

def make_prob_table(raw: Iterable[float]) -> ProbTable:
    """
    Normalize four positive reals into a ProbTable.

    Raises:
        NonPositiveEntry: If any input is <= 0 or not finite.
    """
    values = [float(v) for v in raw]
    if len(values) != 4:
        raise InputError(f"a 2x2 table needs 4 entries, got {len(values)}")
    for value in values:
        if not math.isfinite(value) or value <= 0.0:
            raise NonPositiveEntry(f"table entries must be finite and > 0, got {values}")
    total = math.fsum(values)
    return ProbTable(*(v / total for v in values))


def marginals(t: ProbTable) -> Tuple[float, float, float, float]:
    """Return (p0., p1., p.0, p.1)."""
    return (t.p00 + t.p01, t.p10 + t.p11, t.p00 + t.p10, t.p01 + t.p11)


TableLike = Union[ProbTable, CountTable]


def apply_symmetry(t: TableLike, s: SymmetryElement) -> TableLike:
    """Relabel a probability or count table by a dihedral element."""
    cells = t.cells()
    permuted = tuple(cells[i] for i in s.permutation)
    return type(t)(*permuted)


def selection_act(t: ProbTable, mu: float, nu: float) -> ProbTable:
    """
    Selection group action: (mu*nu p00, mu p01, nu p10, p11), renormalized.

    Raises:
        NonPositiveScale: If mu <= 0 or nu <= 0.
    """
    if not (mu > 0.0 and math.isfinite(mu)):
        raise NonPositiveScale(f"mu must be finite and > 0, got {mu!r}")
    if not (nu > 0.0 and math.isfinite(nu)):
        raise NonPositiveScale(f"nu must be finite and > 0, got {nu!r}")
    return make_prob_table((mu * nu * t.p00, mu * t.p01, nu * t.p10, t.p11))


def log_odds_ratio(t: ProbTable) -> float:
    return math.log(t.p00) + math.log(t.p11) - math.log(t.p01) - math.log(t.p10)


def odds_ratio(t: ProbTable) -> float:
    """lambda = p00 p11 / (p01 p10)."""
    if min(t.cells()) < LOG_SPACE_FLOOR:
        return math.exp(log_odds_ratio(t))
    return (t.p00 / t.p01) * (t.p11 / t.p10)


def canonical_representative(lam: float) -> ProbTable:
    """
    The table with all marginals 1/2 and odds ratio lam.

    Raises:
        NonPositiveLambda: If lam <= 0.
    """
    if not (lam > 0.0) or math.isnan(lam):
        raise NonPositiveLambda(f"odds ratio must be > 0, got {lam!r}")
    root = math.sqrt(lam)
    if math.isinf(root):
        raise NonPositiveLambda(f"odds ratio must be finite, got {lam!r}")
    diagonal = root / (2.0 * (1.0 + root))
    off = 1.0 / (2.0 * (1.0 + root))
    return make_prob_table((diagonal, off, off, diagonal))


def canonical_scales(t: ProbTable) -> Tuple[float, float]:
    """Selection scales (mu, nu) carrying t onto its canonical representative."""
    mu = math.sqrt((t.p11 * t.p10) / (t.p00 * t.p01))
    nu = math.sqrt((t.p11 * t.p01) / (t.p00 * t.p10))
    return mu, nu


def count_odds_ratio_hat(tN: CountTable, alpha: Union[float, DirichletParams]) -> float:
    """Pseudo-count odds ratio (n00+a00)(n11+a11) / ((n01+a01)(n10+a10))."""
    a = DirichletParams.of(alpha)
    return ((tN.n00 + a.a00) * (tN.n11 + a.a11)) / ((tN.n01 + a.a01) * (tN.n10 + a.a10))


__all__ = [
    "ProbTable",
    "CountTable",
    "DirichletParams",
    "SymmetryElement",
    "make_prob_table",
    "marginals",
    "apply_symmetry",
    "selection_act",
    "odds_ratio",
    "log_odds_ratio",
    "canonical_representative",
    "canonical_scales",
    "count_odds_ratio_hat",
]
