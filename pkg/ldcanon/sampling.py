"""
Samplers for tables.

Dirichlet tables are four independent gamma variates, normalized. Gamma
variates use the Marsaglia-Tsang squeeze/rejection method; shapes below 1
are boosted, Gamma(a) = Gamma(a + 1) * U^(1/a), which is how alpha = 1/2
and 1/5 priors are served. Normalization happens in log space so heavy
low-alpha tails do not underflow.
"""

from __future__ import annotations

import math

import numpy as np

from ldcanon.errors import InputError
from ldcanon.tables import CountTable, DirichletParams, ProbTable


def _log_gamma_variates_ge1(shape: float, size: int, rng: np.random.Generator) -> np.ndarray:
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        batch = need + need // 8 + 16
        x = rng.standard_normal(batch)
        v = (1.0 + c * x) ** 3
        u = rng.random(batch)
        positive = v > 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            log_v = np.where(positive, np.log(np.where(positive, v, 1.0)), -np.inf)
        squeeze = u < 1.0 - 0.0331 * x ** 4
        with np.errstate(divide="ignore"):
            full = np.log(u) < 0.5 * x * x + d * (1.0 - v + log_v)
        accepted = positive & (squeeze | full)
        values = math.log(d) + log_v[accepted]
        take = min(need, values.size)
        out[filled:filled + take] = values[:take]
        filled += take
    return out


def log_gamma_variates(shape: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """log of `size` Gamma(shape, 1) variates."""
    if not (shape > 0.0) or not math.isfinite(shape):
        raise InputError(f"gamma shape must be finite and > 0, got {shape!r}")
    if shape >= 1.0:
        return _log_gamma_variates_ge1(shape, size, rng)
    boosted = _log_gamma_variates_ge1(shape + 1.0, size, rng)
    u = 1.0 - rng.random(size)
    return boosted + np.log(u) / shape


def gamma_variates(shape: float, size: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(log_gamma_variates(shape, size, rng))


def dirichlet_cells(alpha: DirichletParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """(size, 4) array of D(alpha) tables, cells ordered (p00, p01, p10, p11)."""
    a = DirichletParams.of(alpha)
    logs = np.column_stack([log_gamma_variates(shape, size, rng) for shape in a.cells()])
    logs -= logs.max(axis=1, keepdims=True)
    cells = np.exp(logs)
    return cells / cells.sum(axis=1, keepdims=True)


def sample_dirichlet(alpha: DirichletParams, rng: np.random.Generator) -> ProbTable:
    """One table distributed as D(alpha)."""
    return ProbTable(*(float(p) for p in dirichlet_cells(alpha, 1, rng)[0]))


def multinomial_counts(cells: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial(n, p) counts for each row of a (m, 4) probability array."""
    if n < 1:
        raise InputError(f"sample size must be >= 1, got {n}")
    probs = np.asarray(cells, dtype=float)
    probs = probs / probs.sum(axis=-1, keepdims=True)
    return rng.multinomial(n, probs)


def sample_multinomial(t: ProbTable, n: int, rng: np.random.Generator) -> CountTable:
    """Observed table of n haplotypes drawn from t."""
    counts = multinomial_counts(t.as_array(), n, rng)
    return CountTable(*(int(c) for c in counts))


def fixed_marginal_cells(row0: float, col0: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    D(1) tables conditioned on p0. = row0 and p.0 = col0.

    The D(1) density is flat, so on the fiber of fixed marginals p00 is
    uniform on [max(0, row0 + col0 - 1), min(row0, col0)].
    """
    if not (0.0 < row0 < 1.0 and 0.0 < col0 < 1.0):
        raise InputError(f"marginals must lie in (0, 1), got {row0!r}, {col0!r}")
    lo, hi = max(0.0, row0 + col0 - 1.0), min(row0, col0)
    p00 = lo + (hi - lo) * (1.0 - rng.random(size))
    p01 = row0 - p00
    p10 = col0 - p00
    p11 = 1.0 - row0 - col0 + p00
    return np.column_stack([p00, p01, p10, p11])


__all__ = [
    "log_gamma_variates",
    "gamma_variates",
    "dirichlet_cells",
    "sample_dirichlet",
    "multinomial_counts",
    "sample_multinomial",
    "fixed_marginal_cells",
]
