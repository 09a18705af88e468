"""
Sampler and Substream Tests.

Validates that:
1. Substreams are reproducible and independent of call order
2. Gamma and Dirichlet samplers match their first two moments
3. Multinomial counts and fixed-marginal tables respect their constraints
"""

import numpy as np
import pytest

from ldcanon.errors import InputError
from ldcanon.rng import substream, substream_seed
from ldcanon.sampling import (
    dirichlet_cells,
    fixed_marginal_cells,
    gamma_variates,
    log_gamma_variates,
    multinomial_counts,
    sample_dirichlet,
    sample_multinomial,
)
from ldcanon.tables import CountTable, DirichletParams, ProbTable


def test_substream_reproducible():
    a = substream(42, "truth", 7).random(5)
    b = substream(42, "truth", 7).random(5)
    assert np.array_equal(a, b)


def test_substream_keys_separate_streams():
    seeds = {
        substream_seed(42, "truth", 7),
        substream_seed(42, "truth", 8),
        substream_seed(43, "truth", 7),
        substream_seed(42, "counts", 7, 100),
    }
    assert len(seeds) == 4
    assert 0 <= substream_seed(0) < 2 ** 64


@pytest.mark.parametrize("shape", [0.2, 0.5, 1.0, 2.5])
def test_gamma_moments(shape):
    x = gamma_variates(shape, 200_000, substream(1, "gamma", shape))
    assert x.mean() == pytest.approx(shape, rel=0.02)
    assert x.var() == pytest.approx(shape, rel=0.05)


def test_log_gamma_small_shape_stays_finite():
    logs = log_gamma_variates(0.05, 10_000, substream(2, "tiny"))
    assert np.all(np.isfinite(logs))


def test_log_gamma_rejects_bad_shape():
    with pytest.raises(InputError):
        log_gamma_variates(0.0, 10, substream(0))


@pytest.mark.parametrize("alpha", [(1, 1, 1, 1), (0.5, 0.5, 0.5, 0.5), (2, 1, 0.5, 0.2)])
def test_dirichlet_moments(alpha):
    prior = DirichletParams.of(alpha)
    cells = dirichlet_cells(prior, 100_000, substream(3, "dirichlet", *alpha))
    a = prior.as_array()
    mean = a / a.sum()
    var = mean * (1 - mean) / (a.sum() + 1)
    assert cells.shape == (100_000, 4)
    assert np.allclose(cells.sum(axis=1), 1.0)
    assert cells.mean(axis=0) == pytest.approx(mean, abs=0.005)
    assert cells.var(axis=0) == pytest.approx(var, rel=0.05)


def test_dirichlet_low_alpha_has_no_zero_rows():
    cells = dirichlet_cells(DirichletParams.of(0.2), 50_000, substream(4, "low"))
    assert np.all(np.isfinite(cells))
    assert np.all(cells.max(axis=1) > 0.0)


def test_sample_dirichlet_returns_table():
    t = sample_dirichlet(DirichletParams.of(1), substream(5))
    assert isinstance(t, ProbTable)


def test_multinomial_counts_sum_to_n():
    cells = dirichlet_cells(DirichletParams.of(1), 50, substream(6))
    counts = multinomial_counts(cells, 37, substream(6, "counts"))
    assert counts.shape == (50, 4)
    assert np.all(counts.sum(axis=1) == 37)
    with pytest.raises(InputError):
        multinomial_counts(cells, 0, substream(6))


def test_sample_multinomial_returns_count_table():
    t = ProbTable(0.25, 0.25, 0.25, 0.25)
    tN = sample_multinomial(t, 20, substream(7))
    assert isinstance(tN, CountTable)
    assert tN.total == 20


def test_fixed_marginal_cells_keep_marginals():
    cells = fixed_marginal_cells(0.3, 0.2, 10_000, substream(8))
    assert np.all(cells >= -1e-15)
    assert cells[:, 0] + cells[:, 1] == pytest.approx(np.full(10_000, 0.3))
    assert cells[:, 0] + cells[:, 2] == pytest.approx(np.full(10_000, 0.2))
    # p00 uniform on [0, 0.2]
    assert cells[:, 0].mean() == pytest.approx(0.1, abs=0.003)
    with pytest.raises(InputError):
        fixed_marginal_cells(1.0, 0.2, 10, substream(8))
