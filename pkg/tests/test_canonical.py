"""
Canonical Measure Tests.

Validates that:
1. eta1 / eta_half closed forms are odd in log(lambda), monotone, and vanish at lambda = 1;
   the analytic and Taylor branches agree where they meet
2. Quadrature calibration reproduces both closed forms on lambda in [1e-4, 1e4]
3. eta is invariant under selection (where D' and r are not) and uniform under its own prior
4. Calibration files survive a write / load cycle and reject corruption
5. The Q-eta gap matches the published magnitudes
"""

import math

import numpy as np
import pytest
from scipy import stats

from ldcanon.canonical import (
    _eta_closed,
    _lower_cdf_jeffreys,
    _lower_cdf_uniform,
    _taylor_jeffreys,
    _taylor_uniform,
    CalibrationMethod,
    EtaCalibration,
    TAYLOR_SWITCH,
    abs_eta,
    calibrate,
    eta1,
    eta_half,
    eta_of_table,
    lambda_density,
    load_calibration,
    log_lambda_density,
    log_lambda_lower_tail,
    log_lambda_upper_tail,
    q_eta_gap,
    uniform_prior_density,
    write_calibration,
)
from ldcanon.errors import CalibrationFileError, InputError, InsufficientSamples, NonPositiveLambda
from ldcanon.measures import correlation_r, d_prime, log_lambda_kernel
from ldcanon.tables import DirichletParams, make_prob_table, odds_ratio, selection_act

LAMBDAS = np.logspace(-4, 4, 41)
ASYM = make_prob_table((0.5, 0.1, 0.15, 0.25))


@pytest.mark.parametrize("eta", [eta1, eta_half])
def test_closed_form_shape(eta):
    assert eta(1.0) == 0.0
    values = np.asarray(eta(LAMBDAS))
    assert np.all(np.diff(values) > 0.0), "eta must increase with lambda"
    assert np.all(np.abs(values) < 1.0)
    assert np.asarray(eta(1.0 / LAMBDAS)) == pytest.approx(-values, abs=1e-14)


def _taylor_only(lam, taylor):
    lam = np.asarray(lam, dtype=float)
    return np.where(lam > 1.0, -taylor(1.0 / lam - 1.0), taylor(lam - 1.0))


@pytest.mark.parametrize(
    "eta,lower,taylor",
    [(eta1, _lower_cdf_uniform, _taylor_uniform), (eta_half, _lower_cdf_jeffreys, _taylor_jeffreys)],
)
def test_closed_form_taylor_join(eta, lower, taylor):
    seams = np.array([1.0 - TAYLOR_SWITCH, 1.0 / (1.0 - TAYLOR_SWITCH)])
    analytic = np.asarray(_eta_closed(seams, lower, taylor, use_taylor=False))
    assert analytic == pytest.approx(_taylor_only(seams, taylor), abs=1e-9)
    assert analytic[0] < 0.0 < analytic[1]

    steps = np.arange(-50, 51) * 1e-6
    for seam in seams:
        values = np.asarray(eta(seam + steps))
        assert np.all(np.diff(values) > 0.0), f"eta not increasing around {seam}"


@pytest.mark.parametrize("eta", [eta1, eta_half])
def test_closed_form_limits(eta):
    assert eta(0.0) == pytest.approx(-1.0)
    assert eta(1e300) == pytest.approx(1.0)
    assert eta(1e300) < 1.0
    with pytest.raises(NonPositiveLambda):
        eta(-1.0)


def test_uniform_density_known_values():
    assert uniform_prior_density(1.0) == pytest.approx(1.0 / 6.0, abs=1e-15)
    assert uniform_prior_density(2.0) == pytest.approx(3.0 * math.log(2.0) - 2.0, rel=1e-12)
    assert uniform_prior_density(0.5) == pytest.approx(uniform_prior_density(2.0) * 4.0, rel=1e-12)


@pytest.mark.parametrize("lam", [0.05, 0.7, 1.0, 3.0, 40.0])
def test_nested_density_matches_closed_form(lam):
    assert lambda_density(lam, 1.0) == pytest.approx(uniform_prior_density(lam), abs=1e-6)


def test_log_lambda_density_integrates_to_cdf_derivative():
    prior = DirichletParams.of(0.7)
    s, h = -0.8, 1e-3
    slope = (log_lambda_lower_tail(s + h, prior) - log_lambda_lower_tail(s - h, prior)) / (2 * h)
    assert log_lambda_density(s, prior) == pytest.approx(slope, abs=1e-4)


def test_tails_sum_to_one():
    prior = DirichletParams.of((2, 1, 0.5, 0.2))
    for s in (-3.0, 0.0, 1.5):
        total = log_lambda_lower_tail(s, prior) + log_lambda_upper_tail(s, prior)
        assert total == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("alpha,closed", [(1.0, eta1), (0.5, eta_half)])
def test_quadrature_reproduces_closed_form(alpha, closed):
    cal = calibrate(alpha, method=CalibrationMethod.QUADRATURE)
    grid = np.logspace(-4, 4, 50)
    assert np.asarray(cal.eta(grid)) == pytest.approx(np.asarray(closed(grid)), abs=1e-6)


def test_calibrate_default_methods():
    assert calibrate(1).method == CalibrationMethod.ANALYTIC_1
    assert calibrate(0.5).method == CalibrationMethod.ANALYTIC_HALF
    assert calibrate(2).method == CalibrationMethod.QUADRATURE
    with pytest.raises(InputError):
        calibrate(0.0)
    with pytest.raises(InputError):
        EtaCalibration(alpha=2.0, method=CalibrationMethod.ANALYTIC_1)


def test_monte_carlo_calibration():
    with pytest.raises(InsufficientSamples):
        calibrate(1.0, method=CalibrationMethod.MONTE_CARLO, samples=100)
    cal = calibrate(1.0, method=CalibrationMethod.MONTE_CARLO, samples=50_000, seed=4)
    grid = np.logspace(-2, 2, 9)
    assert np.asarray(cal.eta(grid)) == pytest.approx(np.asarray(eta1(grid)), abs=0.02)
    again = calibrate(1.0, method=CalibrationMethod.MONTE_CARLO, samples=50_000, seed=4)
    assert again.knots == cal.knots


def test_eta_of_table_matches_odds_ratio():
    cal = calibrate(1)
    t1 = make_prob_table((0.375, 0.125, 0.125, 0.375))
    assert eta_of_table(t1, cal) == pytest.approx(eta1(9.0))
    assert abs_eta(make_prob_table((0.125, 0.375, 0.375, 0.125)), cal) == pytest.approx(eta1(9.0))


def test_selected_pair_keeps_eta_but_not_dprime_or_r():
    t1 = make_prob_table((0.375, 0.125, 0.125, 0.375))
    t2 = selection_act(t1, 3.0, 3.0)
    assert t2.cells() == pytest.approx((0.75, 1 / 12, 1 / 12, 1 / 12), abs=1e-15)

    assert d_prime(t1) == pytest.approx(0.5, abs=1e-12)
    assert correlation_r(t1) == pytest.approx(0.5, abs=1e-12)
    assert d_prime(t2) == pytest.approx(0.4, abs=1e-12)
    assert correlation_r(t2) == pytest.approx(0.4, abs=1e-12)
    assert odds_ratio(t1) == pytest.approx(9.0, rel=1e-12)
    assert odds_ratio(t2) == pytest.approx(9.0, rel=1e-12)

    cal = calibrate(0.5)
    assert eta_of_table(t1, cal) == pytest.approx(eta_of_table(t2, cal), abs=1e-12)
    assert eta_of_table(t1, cal) == pytest.approx(eta_half(9.0), abs=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_eta_selection_invariant(alpha):
    cal = calibrate(alpha)
    base = eta_of_table(ASYM, cal)
    for mu, nu in [(0.01, 5.0), (3.0, 0.2), (100.0, 100.0)]:
        assert eta_of_table(selection_act(ASYM, mu, nu), cal) == pytest.approx(base, abs=1e-9)


def test_eta_log_space_for_tiny_cells():
    cal = calibrate(0.5)
    t = make_prob_table((1e-200, 0.5, 0.5, 0.5))
    value = eta_of_table(t, cal)
    assert -1.0 < value < -0.99


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_eta_uniform_under_its_prior(alpha):
    rng = np.random.default_rng(17)
    cells = rng.dirichlet(np.full(4, alpha), size=20_000)
    values = np.asarray(calibrate(alpha).eta_log(log_lambda_kernel(cells)))
    result = stats.kstest(values, stats.uniform(loc=-1.0, scale=2.0).cdf)
    assert result.statistic < 0.015, f"KS distance {result.statistic:.4f}"


def test_calibration_file_roundtrip(tmp_path):
    cal = calibrate(2.0, method=CalibrationMethod.QUADRATURE)
    path = write_calibration(cal, tmp_path / "cal_2.csv")
    assert path.read_text().startswith("# ldcanon-calibration v1 alpha=2.0 method=quadrature")
    loaded = load_calibration(path)
    assert loaded.alpha == 2.0
    assert loaded.method == CalibrationMethod.QUADRATURE
    grid = np.logspace(-3, 3, 13)
    assert np.asarray(loaded.eta(grid)) == pytest.approx(np.asarray(cal.eta(grid)), abs=1e-5)


def test_calibration_file_rejects_corruption(tmp_path):
    path = write_calibration(calibrate(1.0), tmp_path / "cal.csv")
    lines = path.read_text().splitlines()

    bad_header = tmp_path / "bad_header.csv"
    bad_header.write_text("\n".join(["# something-else v1 alpha=1"] + lines[1:]) + "\n")
    with pytest.raises(CalibrationFileError):
        load_calibration(bad_header)

    # swap two knots so the cdf is no longer increasing
    swapped = lines[:2] + [lines[3], lines[2]] + lines[4:]
    bad_order = tmp_path / "bad_order.csv"
    bad_order.write_text("\n".join(swapped) + "\n")
    with pytest.raises(CalibrationFileError):
        load_calibration(bad_order)

    with pytest.raises(CalibrationFileError):
        load_calibration(tmp_path / "missing.csv")


def test_q_eta_gap_magnitudes():
    grid = np.logspace(0.0, 6.0, 400)
    assert q_eta_gap(2.0, grid=grid) == pytest.approx(0.035, abs=0.005)
    assert q_eta_gap(1.77, grid=grid) == pytest.approx(0.013, abs=0.005)
    assert q_eta_gap(0.5, grid=grid) > q_eta_gap(1.77, grid=grid)


def test_q_eta_gap_rejects_bad_grid():
    with pytest.raises(NonPositiveLambda):
        q_eta_gap(1.0, grid=np.array([0.0, 1.0]))


def test_eta_cdf_is_half_at_one():
    for alpha in (0.5, 1.0, 3.0):
        assert calibrate(alpha).cdf(1.0) == pytest.approx(0.5)
    assert odds_ratio(ASYM) > 1.0
