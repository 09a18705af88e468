"""
Monte Carlo Study Tests.

Validates that:
1. Reports are bit-identical for every worker count
2. MSE rows account for every replicate (used + excluded) and NE is worst; SNE and BE are close
3. Interrupted studies surface a partial report
4. Kendall tau is invariant under recalibration and rises with minor frequency
   (bins are left-open and may leave gaps)
5. Distribution outputs: histograms, KS, log-lambda reference density, scatter;
   D' is uniform under D(1), unconditionally and on a fixed-marginals fiber
6. Published magnitudes (slow; LDCANON_SLOW=1)
"""

import math

import numpy as np
import pytest

from ldcanon import simulation
from ldcanon.errors import BudgetExceeded, ConfigError, EmptyBin, InsufficientSamples, StudyInterrupted
from ldcanon.estimators import parse_estimator, parse_measure
from ldcanon.simulation import (
    DEFAULT_BINS,
    HISTOGRAM_BINS,
    Binning,
    StudyConfig,
    StudyKind,
    bin_mask,
    histogram_rows,
    minor_frequencies,
    run_distribution_study,
    run_kendall_study,
    run_mse_study,
    run_study,
)
from ldcanon.tables import DirichletParams
from schemas.study_report import validate_study_report
from ldcanon.emit import canonicalize


def _mse_config(**overrides):
    base = dict(
        kind=StudyKind.MSE,
        prior=DirichletParams.of(1.0),
        sample_sizes=(20,),
        replicates=1000,
        seed=11,
        estimators=(parse_estimator("ne"), parse_estimator("sne")),
        measures=(parse_measure("dprime"), parse_measure("eta_1")),
    )
    base.update(overrides)
    return StudyConfig(**base)


def _rows_by(report, estimator, measure, n):
    matches = [r for r in report.rows if r["estimator"] == estimator and r["measure"] == measure and r["n"] == n]
    assert len(matches) == 1
    return matches[0]


# ---------------------------
# Config
# ---------------------------

def test_config_rejects_bad_bins():
    for bins in [(), ((0.2, 0.1),), ((0.0, 0.3), (0.2, 0.4)), ((0.4, 0.6),)]:
        with pytest.raises(ConfigError):
            _mse_config(bins=bins)


def test_config_accepts_left_open_and_gapped_bins():
    for bins in [((0.0, 0.1),), ((0.05, 0.1), (0.3, 0.5)), ((0.0, 0.25), (0.25, 0.5)), DEFAULT_BINS]:
        assert _mse_config(bins=bins).bins == tuple(tuple(b) for b in bins)
    with pytest.raises(ConfigError):
        _mse_config(bins=((-0.1, 0.2),))


def test_config_rejects_bad_sizes():
    with pytest.raises(ConfigError):
        _mse_config(sample_sizes=(0,))
    with pytest.raises(ConfigError):
        _mse_config(replicates=0)


# ---------------------------
# MSE
# ---------------------------

def test_mse_rows_account_for_replicates():
    report = run_mse_study(_mse_config())
    assert report.complete
    assert len(report.rows) == 4
    for row in report.rows:
        assert row["replicates"] == 1000
        assert row["mse"] is not None and row["mse"] >= 0.0
        assert row["excluded_strict"] >= row["excluded"]
    validate_study_report(canonicalize(report.to_dict()))


def test_mse_naive_worse_than_semi_naive():
    report = run_mse_study(_mse_config())
    for measure in ("dprime", "eta_1"):
        ne = _rows_by(report, "ne", measure, 20)
        sne = _rows_by(report, "sne_0.5" if measure == "dprime" else "sne_1", measure, 20)
        assert ne["mse"] > sne["mse"], measure


def test_mse_identical_across_worker_counts():
    cfg = _mse_config(estimators=(parse_estimator("ne"), parse_estimator("be", mc_samples=1000)))
    one = run_mse_study(cfg, workers=1)
    three = run_mse_study(cfg, workers=3)
    assert one.to_dict() == three.to_dict()


def test_mse_requires_enough_replicates():
    with pytest.raises(ConfigError):
        run_mse_study(_mse_config(replicates=999))
    with pytest.raises(ConfigError):
        run_mse_study(_mse_config(estimators=()))


def test_mse_volume_budget_checked_up_front():
    cfg = _mse_config(estimators=(parse_estimator("ve"),), sample_sizes=(600,))
    with pytest.raises(BudgetExceeded):
        run_mse_study(cfg)


def test_mse_volume_skips_unsupported_measures():
    cfg = _mse_config(estimators=(parse_estimator("ve"),), measures=(parse_measure("dprime"), parse_measure("r")),
                      sample_sizes=(10,))
    report = run_mse_study(cfg)
    assert [r["measure"] for r in report.rows] == ["dprime"]
    # small N leaves some fibers with a zero marginal
    assert report.rows[0]["excluded"] > 0


def test_mse_interrupt_returns_partial(monkeypatch):
    real_chunk = simulation._mse_chunk
    calls = {"n": 0}

    def flaky(cfg, lo, hi, pairs):
        calls["n"] += 1
        if calls["n"] == 2:
            raise KeyboardInterrupt
        return real_chunk(cfg, lo, hi, pairs)

    monkeypatch.setattr(simulation, "_mse_chunk", flaky)
    with pytest.raises(StudyInterrupted) as info:
        run_mse_study(_mse_config(), workers=1)
    partial = info.value.partial
    assert partial is not None and not partial.complete
    assert 0 < partial.rows[0]["replicates"] < 1000
    assert StudyInterrupted.exit_code == 130


# ---------------------------
# Kendall
# ---------------------------

def _kendall_config(**overrides):
    base = dict(kind=StudyKind.KENDALL, prior=DirichletParams.of(0.5), replicates=20_000, seed=5)
    base.update(overrides)
    return StudyConfig(**base)


def test_minor_frequencies_and_bins():
    cells = np.array([[0.05, 0.05, 0.45, 0.45], [0.3, 0.3, 0.2, 0.2]])
    row_minor, col_minor = minor_frequencies(cells)
    assert row_minor == pytest.approx([0.1, 0.4])
    assert col_minor == pytest.approx([0.5, 0.5])
    assert list(bin_mask(cells, 0.0, 0.1, Binning.ROW)) == [True, False]
    assert list(bin_mask(cells, 0.0, 0.1, Binning.BOTH)) == [False, False]
    assert list(bin_mask(cells, 0.0, 0.1, Binning.MIN)) == [True, False]


def test_kendall_rank_invariance_and_trend():
    report = run_kendall_study(_kendall_config())
    taus = [row["tau_dprime_lambda"] for row in report.rows]
    assert len(taus) == len(DEFAULT_BINS)
    for row in report.rows:
        assert row["tau_dprime_eta"] == pytest.approx(row["tau_dprime_lambda"], abs=1e-6)
        assert row["tables"] >= 100
        assert row["eta"] == "eta_0.5"
    assert taus[0] < taus[-1]


def test_kendall_identical_across_worker_counts():
    cfg = _kendall_config(replicates=120_000)
    assert run_kendall_study(cfg, workers=1).to_dict() == run_kendall_study(cfg, workers=2).to_dict()


def test_kendall_empty_bin():
    with pytest.raises(EmptyBin):
        run_kendall_study(_kendall_config(replicates=500, bins=((0.0, 0.01),)))


# ---------------------------
# Distribution
# ---------------------------

def test_histogram_rows_density_integrates_to_one():
    values = np.random.default_rng(0).uniform(-1, 1, 5000)
    rows = histogram_rows("x", values, -1.0, 1.0)
    assert len(rows) == HISTOGRAM_BINS
    assert sum(r["count"] for r in rows) == 5000
    assert math.fsum(r["density"] * (r["bin_hi"] - r["bin_lo"]) for r in rows) == pytest.approx(1.0)


def test_distribution_tables():
    cfg = StudyConfig(kind=StudyKind.DISTRIBUTION, prior=DirichletParams.of(1.0), replicates=10_000, seed=3,
                      measures=(parse_measure("eta_1"), parse_measure("dprime"), parse_measure("lambda")),
                      scatter_samples=100)
    report = run_distribution_study(cfg)
    assert report.primary == "summary"
    assert [row["measure"] for row in report.rows] == ["eta_1", "dprime"]
    eta_row = report.rows[0]
    assert eta_row["ks_statistic"] < 0.02
    assert eta_row["iqr"] == pytest.approx(1.0, abs=0.05)
    assert len(report.tables["histogram"]) == 2 * HISTOGRAM_BINS
    log_rows = report.tables["log_lambda"]
    assert len(log_rows) == HISTOGRAM_BINS
    assert all("reference_density" in r for r in log_rows)
    center = log_rows[HISTOGRAM_BINS // 2]
    assert center["density"] == pytest.approx(center["reference_density"], rel=0.15)
    scatter = report.tables["scatter"]
    assert len(scatter) == 100
    assert set(scatter[0]) == {"index", "log_lambda", "eta_1", "dprime", "lambda"}
    validate_study_report(canonicalize(report.to_dict()))


def test_distribution_fixed_marginals_dprime_uniform():
    cfg = StudyConfig(kind=StudyKind.DISTRIBUTION, prior=DirichletParams.of(1.0), replicates=10_000, seed=8,
                      measures=(parse_measure("dprime"),), fixed_marginals=(0.5, 0.5))
    report = run_distribution_study(cfg)
    assert report.rows[0]["ks_statistic"] < 0.02
    assert "reference_density" not in report.tables["log_lambda"][0]


def test_distribution_dprime_uniform_under_uniform_prior():
    cfg = StudyConfig(kind=StudyKind.DISTRIBUTION, prior=DirichletParams.of(1.0), replicates=20_000, seed=12,
                      measures=(parse_measure("dprime"),), scatter_samples=10)
    row = run_distribution_study(cfg).rows[0]
    assert row["measure"] == "dprime"
    assert row["ks_statistic"] < 0.015
    assert row["mean"] == pytest.approx(0.0, abs=0.02)
    assert row["iqr"] == pytest.approx(1.0, abs=0.05)


def test_distribution_requires_draws():
    cfg = StudyConfig(kind=StudyKind.DISTRIBUTION, prior=DirichletParams.of(1.0), replicates=9_999)
    with pytest.raises(InsufficientSamples):
        run_study(cfg)


# ---------------------------
# Published magnitudes
# ---------------------------

@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_eta_uniform_at_full_scale(alpha):
    cfg = StudyConfig(kind=StudyKind.DISTRIBUTION, prior=DirichletParams.of(alpha), replicates=100_000, seed=1,
                      measures=(parse_measure(f"eta_{alpha:g}"),), scatter_samples=10)
    assert run_distribution_study(cfg, workers=4).rows[0]["ks_statistic"] < 0.006


@pytest.mark.slow
def test_kendall_reference_values():
    expected = [0.873, 0.905, 0.916, 0.930, 0.957]
    report = run_kendall_study(_kendall_config(replicates=100_000, seed=1), workers=4)
    taus = [row["tau_dprime_lambda"] for row in report.rows]
    assert taus == pytest.approx(expected, abs=0.015)
    assert all(a < b for a, b in zip(taus, taus[1:]))


@pytest.mark.slow
def test_mse_reference_values():
    cfg = _mse_config(
        sample_sizes=(100, 500),
        replicates=10_000,
        seed=2,
        estimators=(parse_estimator("ne"), parse_estimator("sne_1")),
        measures=(parse_measure("eta_1"), parse_measure("dprime")),
    )
    report = run_mse_study(cfg, workers=4)
    for estimator, measure, n, value in [("ne", "eta_1", 500, 0.0064), ("sne_1", "eta_1", 500, 0.0052),
                                         ("ne", "dprime", 100, 0.039)]:
        row = _rows_by(report, estimator, measure, n)
        assert abs(row["mse"] - value) <= 3 * row["std_error"], f"{estimator} {measure} N={n}: {row['mse']}"


@pytest.mark.slow
def test_volume_dprime_worse_under_jeffreys():
    cfg = _mse_config(
        prior=DirichletParams.of(0.5),
        sample_sizes=(50,),
        replicates=10_000,
        estimators=(parse_estimator("ve"), parse_estimator("sne_0.5")),
        measures=(parse_measure("dprime"),),
    )
    report = run_mse_study(cfg, workers=4)
    assert _rows_by(report, "ve", "dprime", 50)["mse"] > _rows_by(report, "sne_0.5", "dprime", 50)["mse"]


@pytest.mark.slow
def test_dprime_uniform_under_uniform_prior_at_full_scale():
    cfg = StudyConfig(kind=StudyKind.DISTRIBUTION, prior=DirichletParams.of(1.0), replicates=100_000, seed=1,
                      measures=(parse_measure("dprime"),), scatter_samples=10)
    assert run_distribution_study(cfg, workers=4).rows[0]["ks_statistic"] < 0.006


@pytest.mark.slow
def test_mse_orderings_on_full_grid():
    measures = ("eta_1", "eta_0.5", "dprime", "r", "q")
    cfg = _mse_config(
        sample_sizes=(50, 100),
        replicates=10_000,
        seed=6,
        mc_samples=2000,
        estimators=tuple(parse_estimator(t) for t in ("ne", "sne_1", "sne_0.5", "be_1", "be_0.5")),
        measures=tuple(parse_measure(m) for m in measures),
    )
    report = run_mse_study(cfg, workers=4)
    for measure in measures:
        for n in cfg.sample_sizes:
            ne = _rows_by(report, "ne", measure, n)["mse"]
            for other in ("sne_1", "sne_0.5", "be_1", "be_0.5"):
                assert ne > _rows_by(report, other, measure, n)["mse"], f"ne not worst vs {other}: {measure} N={n}"
            for alpha in ("1", "0.5"):
                sne = _rows_by(report, f"sne_{alpha}", measure, n)["mse"]
                be = _rows_by(report, f"be_{alpha}", measure, n)["mse"]
                assert be == pytest.approx(sne, rel=0.2), f"sne_{alpha}={sne} be_{alpha}={be}: {measure} N={n}"
