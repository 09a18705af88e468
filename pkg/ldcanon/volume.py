"""
Volume (rank) estimators.

Volume-eta: the observed table's pseudo-count odds ratio is ranked against
every table of the same size N, weighted by the table's probability under
the D(alpha)-mixed multinomial:

    eta_hat = 2 * sum_t' w(t') chi(lambda_hat(t'), lambda_hat(t_N)) - 1
    chi = 1 if <, 1/2 if =, 0 if >

The weighted ranking depends only on (N, alpha), so it is built once per
(N, alpha) as a sorted key array with cumulative weights; each estimate is
then two binary searches. Building costs O(N^3) time and memory.

Volume-D': the signed Dvol statistic over the fiber of tables sharing the
observed marginals.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy.special import betaln, gammaln

from ldcanon.errors import BudgetExceeded, DegenerateMarginals
from ldcanon.tables import CountTable, DirichletParams

logger = logging.getLogger(__name__)

VOLUME_BUDGET_N = 500
RATIONAL_DENOMINATOR_MAX = 1000
_EXACT_FACTOR_LIMIT = 2 ** 13  # key numerators and denominators stay below 2^26


# ---------------------------
# Table probability
# ---------------------------

def log_table_weight(counts: np.ndarray, alpha: DirichletParams) -> np.ndarray:
    """
    log w_alpha for rows of a (m, 4) integer count array.

    w = N B(N, sum alpha) / prod_{ij} n_ij B(n_ij, alpha_ij), with n B(n, x) = 1 for n = 0.
    """
    counts = np.asarray(counts, dtype=np.int64)
    a = alpha.as_array()
    n = counts.sum(axis=-1)
    log_w = np.log(n) + betaln(n, alpha.total)
    for col in range(4):
        n_ij = counts[..., col]
        present = n_ij > 0
        safe = np.where(present, n_ij, 1)
        term = np.log(safe) + betaln(safe, a[col])
        log_w = log_w - np.where(present, term, 0.0)
    return log_w


def count_tables(n: int) -> int:
    """|T_N| = C(N + 3, 3)."""
    return math.comb(n + 3, 3)


def iter_table_blocks(n: int) -> Iterator[np.ndarray]:
    """All count tables of total n, one (m, 4) block per value of n00, lexicographic."""
    for n00 in range(n + 1):
        rest = n - n00
        n01 = np.repeat(np.arange(rest + 1), rest + 1 - np.arange(rest + 1))
        starts = np.cumsum(np.concatenate(([0], rest + 1 - np.arange(rest))))
        n10 = np.arange(n01.size) - np.repeat(starts, rest + 1 - np.arange(rest + 1))
        n11 = rest - n01 - n10
        yield np.column_stack([np.full(n01.size, n00), n01, n10, n11]).astype(np.int64)


# ---------------------------
# Ranking table
# ---------------------------

def _rational_alpha(alpha: DirichletParams) -> Optional[Tuple[int, Tuple[int, int, int, int]]]:
    """Common denominator q and numerators p_ij if every alpha_ij is a small-denominator rational."""
    fractions = []
    for value in alpha.cells():
        frac = Fraction(value).limit_denominator(RATIONAL_DENOMINATOR_MAX)
        if float(frac) != value:
            return None
        fractions.append(frac)
    q = math.lcm(*(f.denominator for f in fractions))
    return q, tuple(int(f * q) for f in fractions)


@dataclass(frozen=True)
class VolumeRanking:
    """Sorted pseudo-count odds-ratio keys of T_N with cumulative D(alpha) weights."""

    n: int
    alpha: DirichletParams
    exact: bool
    rational: Optional[Tuple[int, Tuple[int, int, int, int]]]
    keys: np.ndarray
    cumulative: np.ndarray

    def key(self, counts: Tuple[int, int, int, int]) -> float:
        return float(_keys(np.asarray([counts], dtype=np.int64), self.alpha, self.rational)[0])

    def mirror_key(self, counts: Tuple[int, int, int, int]) -> float:
        n00, n01, n10, n11 = counts
        return self.key((n10, n11, n00, n01))

    def below(self, key: float) -> float:
        return float(self.cumulative[np.searchsorted(self.keys, key, side="left")])

    def at_or_below(self, key: float) -> float:
        return float(self.cumulative[np.searchsorted(self.keys, key, side="right")])


def _keys(counts: np.ndarray, alpha: DirichletParams, rational) -> np.ndarray:
    if rational is not None:
        q, (p00, p01, p10, p11) = rational
        num = (q * counts[:, 0] + p00) * (q * counts[:, 3] + p11)
        den = (q * counts[:, 1] + p01) * (q * counts[:, 2] + p10)
        return num.astype(float) / den.astype(float)
    a = alpha.as_array()
    logs = np.log(counts + a)
    return (logs[:, 0] + logs[:, 3]) - (logs[:, 1] + logs[:, 2])


@lru_cache(maxsize=4)
def volume_ranking(n: int, alpha: DirichletParams) -> VolumeRanking:
    """Build (and cache) the weighted ranking of all tables of size n."""
    rational = _rational_alpha(alpha)
    if rational is not None:
        q, p = rational
        if q * n + max(p) >= _EXACT_FACTOR_LIMIT:
            rational = None
    keys, weights = [], []
    for block in iter_table_blocks(n):
        keys.append(_keys(block, alpha, rational))
        weights.append(np.exp(log_table_weight(block, alpha)))
    keys_all = np.concatenate(keys)
    weights_all = np.concatenate(weights)
    order = np.argsort(keys_all, kind="stable")
    cumulative = np.concatenate(([0.0], np.cumsum(weights_all[order])))
    logger.info(f"volume ranking built N={n} prior={alpha.label} tables={keys_all.size} exact={rational is not None}")
    return VolumeRanking(
        n=n,
        alpha=alpha,
        exact=rational is not None,
        rational=rational,
        keys=keys_all[order],
        cumulative=cumulative,
    )


def volume_eta_value(tN: CountTable, alpha: DirichletParams,
                     cap: int = VOLUME_BUDGET_N, allow_over_cap: bool = False) -> float:
    """
    Volume estimate of eta_alpha.

    Raises:
        BudgetExceeded: If N > cap and allow_over_cap is False.
    """
    n = tN.total
    if n > cap and not allow_over_cap:
        raise BudgetExceeded(f"volume estimator enumerates O(N^3) tables; N={n} exceeds cap {cap}")
    ranking = volume_ranking(n, alpha)
    key = ranking.key(tN.cells())
    if alpha.a00 == alpha.a10 and alpha.a01 == alpha.a11:
        # row swap preserves the prior: P(key > k) = P(key < mirror k)
        return ranking.below(key) - ranking.below(ranking.mirror_key(tN.cells()))
    total = float(ranking.cumulative[-1])
    return ranking.below(key) - (total - ranking.at_or_below(key))


# ---------------------------
# Dvol
# ---------------------------

def volume_dprime_value(tN: CountTable) -> float:
    """
    Signed Dvol over the fixed-marginals fiber.

    sign(D) * (#{same sign, |D| smaller} + ties / 2) / #{same sign}, all
    fiber tables equally weighted.

    Raises:
        DegenerateMarginals: If any row or column total is 0.
    """
    row0, row1, col0, col1 = tN.margins()
    if min(row0, row1, col0, col1) == 0:
        raise DegenerateMarginals(f"Dvol needs all marginals >= 1, got rows ({row0}, {row1}) cols ({col0}, {col1})")
    n = tN.total
    observed = n * tN.n00 - row0 * col0  # N^2 D, exact integer
    if observed == 0:
        return 0.0
    fiber = np.arange(max(0, row0 + col0 - n), min(row0, col0) + 1, dtype=np.int64)
    scaled = n * fiber - row0 * col0
    same = scaled > 0 if observed > 0 else scaled < 0
    magnitude = np.abs(scaled[same])
    less = int(np.count_nonzero(magnitude < abs(observed)))
    ties = int(np.count_nonzero(magnitude == abs(observed)))
    value = (less + 0.5 * ties) / int(np.count_nonzero(same))
    return value if observed > 0 else -value


__all__ = [
    "VOLUME_BUDGET_N",
    "log_table_weight",
    "count_tables",
    "iter_table_blocks",
    "VolumeRanking",
    "volume_ranking",
    "volume_eta_value",
    "volume_dprime_value",
]
