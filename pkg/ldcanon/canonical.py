"""
Canonical LD measure eta_alpha.

eta_alpha(t) = 2 L(lambda(t)) - 1, where L is the CDF of the odds ratio of a
table drawn from the symmetric Dirichlet prior D(alpha). eta is selection
invariant, antisymmetric under allele swaps, and uniform on (-1, 1) when
tables are D(alpha)-distributed.

Calibration methods:
- ANALYTIC_1     closed form for alpha = 1
- ANALYTIC_HALF  closed form for alpha = 1/2 (dilogarithm)
- QUADRATURE     adaptive quadrature of the log-odds convolution, any alpha
- MONTE_CARLO    symmetrized empirical CDF of sampled log odds ratios

Every method is evaluated through the lower tail L(s) for s = log(lambda) <= 0;
the upper half follows from L(lambda) + L(1/lambda) = 1.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator
from scipy.special import betainc, betaln, expit

from ldcanon.dilog import dilog
from ldcanon.errors import (
    CalibrationFileError,
    InputError,
    InsufficientSamples,
    NonPositiveLambda,
    QuadratureFailure,
)
from ldcanon.measures import log_lambda_kernel
from ldcanon.rng import substream
from ldcanon.sampling import dirichlet_cells
from ldcanon.tables import LOG_SPACE_FLOOR, DirichletParams, ProbTable, log_odds_ratio, odds_ratio
from schemas.calibration_file import parse_calibration_header

logger = logging.getLogger(__name__)


# ---------------------------
# Constants
# ---------------------------

TAYLOR_SWITCH = 1e-4
QUADRATURE_TOL = 1e-8
QUADRATURE_LIMIT = 200
MC_CALIBRATION_SAMPLES = 200_000
MIN_MC_SAMPLES = 10_000
MC_BLOCK = 50_000
CALIBRATION_KNOTS = 512
KNOT_LOG_LAMBDA_MIN = -40.0
Q_GAP_GRID = np.logspace(-6.0, 6.0, 10_000)

CALIBRATION_FORMAT = "ldcanon-calibration"
CALIBRATION_VERSION = 1

ETA_LOW = float(np.nextafter(-1.0, 0.0))
ETA_HIGH = float(np.nextafter(1.0, 0.0))

_TWO_OVER_PI2 = 2.0 / math.pi ** 2


class CalibrationMethod(str, Enum):
    """How the odds-ratio CDF is obtained."""

    ANALYTIC_1 = "analytic_1"
    ANALYTIC_HALF = "analytic_half"
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte_carlo"


ArrayLike = Union[float, np.ndarray]


def _as_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values.reshape(-1)[0]) if scalar else values


def _clamp_eta(eta: np.ndarray) -> np.ndarray:
    return np.where(np.isnan(eta), eta, np.clip(eta, ETA_LOW, ETA_HIGH))


# ---------------------------
# Closed forms (alpha = 1 and alpha = 1/2)
# ---------------------------

def _lower_cdf_uniform(x: np.ndarray) -> np.ndarray:
    """L(x) for D(1), x in [0, 1]: x (eps - ln x) / eps^2, eps = x - 1."""
    eps = x - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_x = np.where(x < 0.5, np.log(x), np.log1p(eps))
        out = (x / eps) * ((eps - log_x) / eps)
    return np.where(x == 0.0, 0.0, out)


def _lower_cdf_jeffreys(x: np.ndarray) -> np.ndarray:
    """L(x) for D(1/2), x in [0, 1], via the dilogarithm."""
    root = np.sqrt(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        braces = np.log(root) * np.log((1.0 - root) / (1.0 + root)) + dilog(root) - dilog(-root)
    return np.where(x == 0.0, 0.0, _TWO_OVER_PI2 * braces)


def _taylor_uniform(eps: np.ndarray) -> np.ndarray:
    return (2.0 * eps - eps * eps) / 6.0


def _taylor_jeffreys(eps: np.ndarray) -> np.ndarray:
    return (2.0 * eps - eps * eps) / math.pi ** 2


def _eta_closed(lam: ArrayLike, lower, taylor, use_taylor: bool = True) -> ArrayLike:
    scalar = np.ndim(lam) == 0
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam < 0.0):
        raise NonPositiveLambda("odds ratio must be >= 0")
    upper = lam > 1.0
    with np.errstate(divide="ignore"):
        x = np.where(upper, 1.0 / lam, lam)
    eps = x - 1.0
    eta_low = 2.0 * lower(x) - 1.0
    if use_taylor:
        eta_low = np.where(np.abs(eps) < TAYLOR_SWITCH, taylor(eps), eta_low)
    eta = np.where(upper, -eta_low, eta_low)
    return _as_output(_clamp_eta(eta), scalar)


def eta1(lam: ArrayLike) -> ArrayLike:
    """Canonical measure calibrated on D(1)."""
    return _eta_closed(lam, _lower_cdf_uniform, _taylor_uniform)


def eta_half(lam: ArrayLike) -> ArrayLike:
    """Canonical measure calibrated on Jeffreys' prior D(1/2)."""
    return _eta_closed(lam, _lower_cdf_jeffreys, _taylor_jeffreys)


def _artanh_excess(z: np.ndarray) -> np.ndarray:
    """(artanh(z) - z) / z^3, stable at z = 0."""
    z2 = z * z
    series = np.zeros_like(z)
    for k in range(30, 0, -1):
        series = series * z2 + 1.0 / (2 * k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (np.arctanh(z) - z) / (z2 * z)
    return np.where(np.abs(z) < 0.5, series, direct)


def uniform_prior_density(lam: ArrayLike) -> ArrayLike:
    """
    Closed-form odds-ratio density under D(1).

    l(lam) = (2 - 2 lam + ln lam + lam ln lam) / (lam - 1)^3, rewritten with
    z = (lam - 1) / (lam + 1) as 2 (artanh z - z) / (z^3 (1 + lam)^2).
    """
    scalar = np.ndim(lam) == 0
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam <= 0.0):
        raise NonPositiveLambda("odds ratio must be > 0")
    z = (lam - 1.0) / (lam + 1.0)
    return _as_output(2.0 * _artanh_excess(z) / (1.0 + lam) ** 2, scalar)


# ---------------------------
# Log-odds representation
# ---------------------------
#
# With p ~ D(a00, a01, a10, a11), log(lambda) = U + V where
# U = log(p00/p01) = logit(Beta(a00, a01)) and V = log(p11/p10) = logit(Beta(a11, a10))
# are independent.

def _logit_beta_logpdf(u: float, a: float, b: float) -> float:
    return a * u - (a + b) * np.logaddexp(0.0, u) - betaln(a, b)


def _logit_beta_cdf(v: float, a: float, b: float) -> float:
    return float(betainc(a, b, expit(v)))


def _logit_beta_sf(v: float, a: float, b: float) -> float:
    return float(betainc(b, a, expit(-v)))


def _integrate(fn, lo: float, hi: float, tol: float, points=None) -> Tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(fn, lo, hi, epsabs=tol, epsrel=1e-10, limit=QUADRATURE_LIMIT, points=points)


def _segments(s: float) -> Sequence[Tuple[float, float]]:
    lo, hi = min(s, 0.0), max(s, 0.0)
    if lo == hi:
        return ((-np.inf, lo), (lo, np.inf))
    return ((-np.inf, lo), (lo, hi), (hi, np.inf))


def _convolve(integrand, s: float, tol: float) -> float:
    total, error = 0.0, 0.0
    for lo, hi in _segments(s):
        value, err = _integrate(integrand, lo, hi, tol / 3.0)
        total += value
        error += err
    if error > tol:
        logger.warning(f"quadrature error {error:.3g} above tolerance {tol:.3g} at log-lambda {s:.6g}")
        raise QuadratureFailure(f"quadrature error {error:.3g} exceeds tolerance {tol:.3g} at log-lambda {s}")
    return total


def log_lambda_lower_tail(s: float, alpha: DirichletParams, tol: float = QUADRATURE_TOL) -> float:
    """P(log lambda <= s) by one adaptive quadrature over the U component."""
    a00, a01, a10, a11 = alpha.cells()

    def integrand(u: float) -> float:
        return math.exp(_logit_beta_logpdf(u, a00, a01)) * _logit_beta_cdf(s - u, a11, a10)

    return min(1.0, max(0.0, _convolve(integrand, s, tol)))


def log_lambda_upper_tail(s: float, alpha: DirichletParams, tol: float = QUADRATURE_TOL) -> float:
    """P(log lambda > s)."""
    a00, a01, a10, a11 = alpha.cells()

    def integrand(u: float) -> float:
        return math.exp(_logit_beta_logpdf(u, a00, a01)) * _logit_beta_sf(s - u, a11, a10)

    return min(1.0, max(0.0, _convolve(integrand, s, tol)))


def log_lambda_density(s: float, alpha: DirichletParams, tol: float = QUADRATURE_TOL) -> float:
    """Density of log(lambda) at s under D(alpha)."""
    a00, a01, a10, a11 = alpha.cells()

    def integrand(u: float) -> float:
        return math.exp(_logit_beta_logpdf(u, a00, a01) + _logit_beta_logpdf(s - u, a11, a10))

    return _convolve(integrand, s, tol)


def lambda_density(lam: float, alpha: Union[float, DirichletParams], tol: float = QUADRATURE_TOL) -> float:
    """
    Density l(lam) of the odds ratio under D(alpha), by nested adaptive quadrature.

        l(lam) = lam^(a11-1) / B(alpha) * int_0^1 int_0^(1-p00)
                 p00^(a00+a10-1) p01^(a01+a11-1) (1-p00-p01)^(a10+a11-1)
                 / (lam p01 + p00)^(a10+a11) dp01 dp00

    Args:
        lam: odds ratio, > 0
        alpha: Dirichlet prior (scalar means symmetric; asymmetric priors allowed)
        tol: absolute tolerance on the outer integral

    Raises:
        NonPositiveLambda: If lam <= 0.
        QuadratureFailure: If the outer integral misses tol.
    """
    if not (lam > 0.0) or not math.isfinite(lam):
        raise NonPositiveLambda(f"odds ratio must be finite and > 0, got {lam!r}")
    if not tol > 0.0:
        raise InputError(f"tolerance must be > 0, got {tol!r}")
    a = DirichletParams.of(alpha)
    e00 = a.a00 + a.a10 - 1.0
    e01 = a.a01 + a.a11 - 1.0
    e_rest = a.a10 + a.a11 - 1.0
    e_den = a.a10 + a.a11
    log_norm = (a.a11 - 1.0) * math.log(lam) - a.log_beta()
    raw_tol = tol / math.exp(log_norm)

    def inner(p00: float) -> float:
        width = 1.0 - p00
        if width <= 0.0 or p00 <= 0.0:
            return 0.0

        def integrand(p01: float) -> float:
            rest = width - p01
            if p01 <= 0.0 or rest <= 0.0:
                return 0.0
            return math.exp(
                e00 * math.log(p00)
                + e01 * math.log(p01)
                + e_rest * math.log(rest)
                - e_den * math.log(lam * p01 + p00)
            )

        knee = p00 / lam
        points = [knee] if 0.0 < knee < width else None
        value, _ = _integrate(integrand, 0.0, width, raw_tol * 0.1, points)
        return value

    value, error = _integrate(inner, 0.0, 1.0, raw_tol, None)
    density = math.exp(log_norm) * value
    error *= math.exp(log_norm)
    if error > tol:
        logger.warning(f"lambda_density error {error:.3g} above tolerance {tol:.3g} at lambda={lam:.6g}")
        raise QuadratureFailure(f"lambda density error {error:.3g} exceeds tolerance {tol:.3g}")
    return max(0.0, density)


# ---------------------------
# Calibration
# ---------------------------

@dataclass(frozen=True)
class EtaCalibration:
    """
    Immutable odds-ratio CDF under D(alpha).

    knots, when present, tabulate the lower tail as (log_lambda, cdf) pairs
    with log_lambda <= 0, both coordinates strictly increasing, ending at
    (0, 0.5). Tabulated calibrations evaluate by monotone (PCHIP)
    interpolation of log(cdf).
    """

    alpha: float
    method: CalibrationMethod
    tolerance: Optional[float] = None
    samples: Optional[int] = None
    seed: Optional[int] = None
    knots: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0) or not math.isfinite(self.alpha):
            raise InputError(f"calibration alpha must be > 0, got {self.alpha!r}")
        if self.method == CalibrationMethod.ANALYTIC_1 and self.alpha != 1.0:
            raise InputError("ANALYTIC_1 calibration requires alpha = 1")
        if self.method == CalibrationMethod.ANALYTIC_HALF and self.alpha != 0.5:
            raise InputError("ANALYTIC_HALF calibration requires alpha = 0.5")
        if self.knots is not None:
            _validate_knots(*self.knots)

    @property
    def prior(self) -> DirichletParams:
        return DirichletParams.of(self.alpha)

    @property
    def analytic(self) -> bool:
        return self.method in (CalibrationMethod.ANALYTIC_1, CalibrationMethod.ANALYTIC_HALF)

    @cached_property
    def _interpolant(self) -> PchipInterpolator:
        log_lambda, cdf = self.knots
        return PchipInterpolator(np.asarray(log_lambda), np.log(np.asarray(cdf)), extrapolate=False)

    def _tabulated_lower(self, s: np.ndarray) -> np.ndarray:
        log_lambda, cdf = (np.asarray(k, dtype=float) for k in self.knots)
        s0, s1 = log_lambda[0], log_lambda[1]
        slope = (math.log(cdf[1]) - math.log(cdf[0])) / (s1 - s0)
        inside = s >= s0
        log_cdf = np.empty_like(s)
        log_cdf[inside] = self._interpolant(s[inside])
        log_cdf[~inside] = math.log(cdf[0]) + slope * (s[~inside] - s0)
        return np.exp(log_cdf)

    def lower_tail(self, s: ArrayLike) -> ArrayLike:
        """L(exp(s)) for s <= 0."""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s > 0.0):
            raise InputError("lower_tail is defined for log-lambda <= 0")
        if self.method == CalibrationMethod.ANALYTIC_1:
            out = _lower_cdf_uniform(np.exp(s))
        elif self.method == CalibrationMethod.ANALYTIC_HALF:
            out = _lower_cdf_jeffreys(np.exp(s))
        elif self.knots is not None:
            out = self._tabulated_lower(s)
        else:
            prior, tol = self.prior, self.tolerance or QUADRATURE_TOL
            out = np.array([log_lambda_lower_tail(float(v), prior, tol) for v in s.reshape(-1)])
            out = out.reshape(s.shape)
        return _as_output(np.where(s == 0.0, 0.5, out), scalar)

    def eta_log(self, s: ArrayLike) -> ArrayLike:
        """eta as a function of log(lambda)."""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.analytic:
            with np.errstate(over="ignore"):
                return _as_output(np.asarray(self.eta(np.exp(s)), dtype=float), scalar)
        magnitude = np.abs(s)
        finite = np.isfinite(magnitude)
        lower = np.zeros_like(s)
        if np.any(finite):
            lower[finite] = self.lower_tail(-magnitude[finite])
        eta = np.sign(s) * (1.0 - 2.0 * lower)
        return _as_output(_clamp_eta(eta), scalar)

    def eta(self, lam: ArrayLike) -> ArrayLike:
        """eta as a function of the odds ratio."""
        if self.method == CalibrationMethod.ANALYTIC_1:
            return eta1(lam)
        if self.method == CalibrationMethod.ANALYTIC_HALF:
            return eta_half(lam)
        scalar = np.ndim(lam) == 0
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if np.any(lam < 0.0):
            raise NonPositiveLambda("odds ratio must be >= 0")
        with np.errstate(divide="ignore"):
            out = self.eta_log(np.log(lam))
        return _as_output(np.asarray(out, dtype=float), scalar)

    def cdf(self, lam: ArrayLike) -> ArrayLike:
        """L(lam) = P(odds ratio <= lam) under D(alpha)."""
        scalar = np.ndim(lam) == 0
        eta = np.atleast_1d(np.asarray(self.eta(lam), dtype=float))
        return _as_output(0.5 + 0.5 * eta, scalar)

    def tabulate(self, count: int = CALIBRATION_KNOTS,
                 log_lambda_min: float = KNOT_LOG_LAMBDA_MIN) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        """Knot table of the lower tail on [log_lambda_min, 0]."""
        if self.knots is not None:
            return self.knots
        grid = np.linspace(log_lambda_min, 0.0, count)
        cdf = np.asarray(self.lower_tail(grid), dtype=float)
        knots_s, knots_c = [], []
        for s, c in zip(grid, cdf):
            if c > 0.0 and (not knots_c or c > knots_c[-1]):
                knots_s.append(float(s))
                knots_c.append(float(c))
        return tuple(knots_s), tuple(knots_c)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "method": self.method.value,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "seed": self.seed,
        }


def _validate_knots(log_lambda: Sequence[float], cdf: Sequence[float]) -> None:
    if len(log_lambda) != len(cdf) or len(log_lambda) < 2:
        raise CalibrationFileError("calibration needs at least two (log_lambda, cdf) knots")
    s = np.asarray(log_lambda, dtype=float)
    c = np.asarray(cdf, dtype=float)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(c))):
        raise CalibrationFileError("calibration knots must be finite")
    if np.any(np.diff(s) <= 0.0) or np.any(np.diff(c) <= 0.0):
        raise CalibrationFileError("calibration knots must be strictly increasing in both coordinates")
    if s[-1] != 0.0 or c[-1] != 0.5:
        raise CalibrationFileError("calibration knots must end at (0, 0.5)")
    if c[0] <= 0.0:
        raise CalibrationFileError("calibration cdf must be > 0")


def _monte_carlo_knots(alpha: float, samples: int, seed: int) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    prior = DirichletParams.of(alpha)
    blocks = []
    remaining, block = samples, 0
    while remaining > 0:
        size = min(MC_BLOCK, remaining)
        cells = dirichlet_cells(prior, size, substream(seed, "calibration", block))
        blocks.append(np.abs(log_lambda_kernel(cells)))
        remaining -= size
        block += 1
    magnitudes = np.sort(np.concatenate(blocks))
    n = magnitudes.size
    order = np.unique(np.linspace(0, n - 1, CALIBRATION_KNOTS - 1).astype(int))
    thresholds = magnitudes[order]
    # symmetrized tail: P(log lambda <= -u) = P(|log lambda| >= u) / 2
    lower = 0.5 * (n - order - 0.5) / n
    keep = thresholds > 0.0
    thresholds, lower = thresholds[keep], lower[keep]
    _, first = np.unique(thresholds, return_index=True)
    thresholds, lower = thresholds[first], lower[first]
    log_lambda = np.concatenate((-thresholds[::-1], [0.0]))
    cdf = np.concatenate((lower[::-1], [0.5]))
    return tuple(float(v) for v in log_lambda), tuple(float(v) for v in cdf)


def calibrate(
    alpha: float,
    method: Optional[CalibrationMethod] = None,
    tolerance: float = QUADRATURE_TOL,
    samples: int = MC_CALIBRATION_SAMPLES,
    seed: int = 0,
) -> EtaCalibration:
    """
    Build the odds-ratio CDF for the symmetric prior D(alpha).

    Args:
        alpha: symmetric concentration, > 0
        method: defaults to the closed form for alpha in {1/2, 1}, else QUADRATURE
        tolerance: absolute tolerance for QUADRATURE
        samples: draw count for MONTE_CARLO (>= 10,000)
        seed: master seed for MONTE_CARLO

    Raises:
        InsufficientSamples: If MONTE_CARLO samples < 10,000.
        QuadratureFailure: Propagated from QUADRATURE evaluation.
    """
    alpha = float(alpha)
    if not (alpha > 0.0) or not math.isfinite(alpha):
        raise InputError(f"calibration alpha must be > 0, got {alpha!r}")
    if method is None:
        if alpha == 1.0:
            method = CalibrationMethod.ANALYTIC_1
        elif alpha == 0.5:
            method = CalibrationMethod.ANALYTIC_HALF
        else:
            method = CalibrationMethod.QUADRATURE
    method = CalibrationMethod(method)

    if method == CalibrationMethod.QUADRATURE:
        if not tolerance > 0.0:
            raise InputError(f"tolerance must be > 0, got {tolerance!r}")
        return EtaCalibration(alpha=alpha, method=method, tolerance=tolerance)
    if method == CalibrationMethod.MONTE_CARLO:
        if samples < MIN_MC_SAMPLES:
            raise InsufficientSamples(f"MONTE_CARLO calibration needs >= {MIN_MC_SAMPLES} samples, got {samples}")
        knots = _monte_carlo_knots(alpha, samples, seed)
        logger.info(f"monte carlo calibration alpha={alpha:g} samples={samples} knots={len(knots[0])}")
        return EtaCalibration(alpha=alpha, method=method, samples=samples, seed=seed, knots=knots)
    return EtaCalibration(alpha=alpha, method=method)


def eta_of_table(t: ProbTable, cal: EtaCalibration) -> float:
    """eta(t) = 2 L(lambda(t)) - 1."""
    if min(t.cells()) < LOG_SPACE_FLOOR:
        return float(cal.eta_log(log_odds_ratio(t)))
    return float(cal.eta(odds_ratio(t)))


def abs_eta(t: ProbTable, cal: EtaCalibration) -> float:
    """|eta(t)|, for analyses that ignore the direction of association."""
    return abs(eta_of_table(t, cal))


def q_eta_gap(alpha: float, grid: Optional[np.ndarray] = None, cal: Optional[EtaCalibration] = None) -> float:
    """
    max over the grid of |Q(lambda) - eta_alpha(lambda)|.

    Both measures are antisymmetric in log(lambda), so only grid points with
    lambda >= 1 are evaluated (after folding).
    """
    lam = np.asarray(Q_GAP_GRID if grid is None else grid, dtype=float)
    if np.any(lam <= 0.0):
        raise NonPositiveLambda("q_eta_gap grid must be positive")
    cal = cal or calibrate(alpha)
    s = np.unique(np.abs(np.log(lam)))
    q = np.tanh(0.5 * s)
    eta = np.asarray(cal.eta_log(s), dtype=float)
    return float(np.max(np.abs(q - eta)))


# ---------------------------
# Calibration files
# ---------------------------

def write_calibration(cal: EtaCalibration, path: Path) -> Path:
    """
    Write a calibration file.

    Format: one header line
        # ldcanon-calibration v1 alpha=<a> method=<m> [tolerance=..] [samples=..] [seed=..]
    then CSV "log_lambda,cdf" knots (lower tail, ending at 0,0.5) with 17 significant digits.
    """
    log_lambda, cdf = cal.tabulate()
    header = [f"# {CALIBRATION_FORMAT} v{CALIBRATION_VERSION}", f"alpha={cal.alpha!r}", f"method={cal.method.value}"]
    for key in ("tolerance", "samples", "seed"):
        value = getattr(cal, key)
        if value is not None:
            header.append(f"{key}={value!r}")
    lines = [" ".join(header), "log_lambda,cdf"]
    lines.extend(f"{s:.17g},{c:.17g}" for s, c in zip(log_lambda, cdf))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_calibration(path: Path) -> EtaCalibration:
    """
    Load and re-validate a calibration file.

    Raises:
        CalibrationFileError: On a bad header, bad knots or non-monotone cdf.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CalibrationFileError(f"cannot read calibration file {path}: {exc}") from exc
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 3:
        raise CalibrationFileError(f"calibration file {path} is truncated")
    try:
        meta = parse_calibration_header(lines[0])
    except ValueError as exc:
        raise CalibrationFileError(str(exc)) from exc
    if lines[1].strip() != "log_lambda,cdf":
        raise CalibrationFileError(f"expected column header 'log_lambda,cdf', got {lines[1]!r}")
    log_lambda, cdf = [], []
    for number, line in enumerate(lines[2:], start=3):
        parts = line.split(",")
        if len(parts) != 2:
            raise CalibrationFileError(f"line {number}: expected 2 fields, got {len(parts)}")
        try:
            log_lambda.append(float(parts[0]))
            cdf.append(float(parts[1]))
        except ValueError as exc:
            raise CalibrationFileError(f"line {number}: {exc}") from exc

    method = CalibrationMethod(meta["method"])
    if method in (CalibrationMethod.ANALYTIC_1, CalibrationMethod.ANALYTIC_HALF):
        _validate_knots(log_lambda, cdf)
        cal = EtaCalibration(alpha=meta["alpha"], method=method)
    else:
        cal = EtaCalibration(
            alpha=meta["alpha"],
            method=method,
            tolerance=meta.get("tolerance"),
            samples=meta.get("samples"),
            seed=meta.get("seed"),
            knots=(tuple(log_lambda), tuple(cdf)),
        )
    logger.info(f"loaded calibration {path} alpha={cal.alpha:g} method={cal.method.value} knots={len(log_lambda)}")
    return cal


__all__ = [
    "CalibrationMethod",
    "EtaCalibration",
    "TAYLOR_SWITCH",
    "QUADRATURE_TOL",
    "dilog",
    "eta1",
    "eta_half",
    "uniform_prior_density",
    "lambda_density",
    "log_lambda_density",
    "log_lambda_lower_tail",
    "log_lambda_upper_tail",
    "calibrate",
    "eta_of_table",
    "abs_eta",
    "q_eta_gap",
    "write_calibration",
    "load_calibration",
]
