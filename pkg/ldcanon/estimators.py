"""
Estimators of LD measures from observed count tables.

Families:
- NAIVE       plug-in of raw frequencies n_ij / N
- SEMI_NAIVE  plug-in of posterior means (n_ij + a_ij) / (N + sum a)
- BAYES       Monte Carlo posterior mean of the measure under D(a + n)
- VOLUME      rank statistics: volume-eta over all tables of size N,
              Dvol over the fixed-marginals fiber (eta and D' only)

Undefined plug-in values (0/0, log 0) are reported in-band through
MeasureValue.defined; estimators never raise for them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from ldcanon.canonical import EtaCalibration, calibrate
from ldcanon.errors import FlagConflict, InputError
from ldcanon.measures import CLASSICAL_KERNELS, MeasureId, MeasureValue, log_lambda_kernel
from ldcanon.rng import substream
from ldcanon.sampling import dirichlet_cells
from ldcanon.tables import CountTable, DirichletParams
from ldcanon.volume import VOLUME_BUDGET_N, log_table_weight, volume_dprime_value, volume_eta_value

logger = logging.getLogger(__name__)


DEFAULT_ALPHA = 0.5
DEFAULT_MC_SAMPLES = 20_000
MIN_MC_SAMPLES = 1000

# Measures whose plug-in value can sit on the range boundary only because of zero cells
_BOUNDED_MEASURES = frozenset({MeasureId.DPRIME, MeasureId.R, MeasureId.Q, MeasureId.ETA})


class EstimatorFamily(str, Enum):
    """Estimator families (value is the CLI token)."""

    NAIVE = "ne"
    SEMI_NAIVE = "sne"
    BAYES = "be"
    VOLUME = "ve"


def _format_alpha(alpha: DirichletParams) -> str:
    if alpha.symmetric():
        return f"{alpha.scalar:g}"
    return "-".join(f"{a:g}" for a in alpha.cells())


# ---------------------------
# Requests
# ---------------------------

@lru_cache(maxsize=16)
def calibration_for(alpha: float) -> EtaCalibration:
    """Default calibration for eta_alpha (closed form when available)."""
    return calibrate(alpha)


@dataclass(frozen=True)
class MeasureRequest:
    """A measure to estimate; eta carries its calibration alpha."""

    measure: MeasureId
    eta_alpha: Optional[float] = None
    calibration: Optional[EtaCalibration] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.measure == MeasureId.ETA:
            if self.eta_alpha is None:
                object.__setattr__(self, "eta_alpha", DEFAULT_ALPHA)
            if not (self.eta_alpha > 0.0) or not math.isfinite(self.eta_alpha):
                raise InputError(f"eta alpha must be finite and > 0, got {self.eta_alpha!r}")
        elif self.eta_alpha is not None:
            raise InputError(f"only eta takes an alpha, got {self.measure.value}_{self.eta_alpha:g}")

    @property
    def label(self) -> str:
        if self.measure == MeasureId.ETA:
            return f"eta_{self.eta_alpha:g}"
        return self.measure.value

    @property
    def cal(self) -> EtaCalibration:
        if self.measure != MeasureId.ETA:
            raise InputError(f"{self.label} has no calibration")
        return self.calibration or calibration_for(float(self.eta_alpha))

    def with_calibration(self, cal: EtaCalibration) -> "MeasureRequest":
        return MeasureRequest(self.measure, self.eta_alpha, cal)


def parse_measure(token: str) -> MeasureRequest:
    """
    Parse a measure token: d, dprime, r, lambda, q, mi, eta, eta_<alpha>.

    Raises:
        InputError: If the token names no measure.
    """
    token = token.strip().lower()
    name, sep, suffix = token.partition("_")
    if name == MeasureId.ETA.value:
        if not sep:
            return MeasureRequest(MeasureId.ETA)
        try:
            return MeasureRequest(MeasureId.ETA, float(suffix))
        except ValueError:
            raise InputError(f"bad eta alpha in measure token {token!r}")
    try:
        return MeasureRequest(MeasureId(token))
    except ValueError:
        valid = sorted(m.value for m in MeasureId)
        raise InputError(f"unknown measure {token!r}; expected one of {valid} or eta_<alpha>")


def parse_measures(tokens: Iterable[str]) -> List[MeasureRequest]:
    requests = [parse_measure(t) for t in tokens if t.strip()]
    if not requests:
        raise InputError("no measures requested")
    return requests


# ---------------------------
# Estimator specs
# ---------------------------

@dataclass(frozen=True)
class EstimatorSpec:
    """
    Estimator family and its parameters.

    alpha is unused by NAIVE. When None, SEMI_NAIVE, BAYES and VOLUME use the
    eta measure's own alpha, or DEFAULT_ALPHA for the other measures.
    """

    family: EstimatorFamily
    alpha: Optional[DirichletParams] = None
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    volume_cap: int = VOLUME_BUDGET_N
    allow_over_cap: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", EstimatorFamily(self.family))
        if self.alpha is not None:
            object.__setattr__(self, "alpha", DirichletParams.of(self.alpha))
        if self.family == EstimatorFamily.BAYES and self.mc_samples < MIN_MC_SAMPLES:
            raise InputError(f"Bayes estimator needs mc_samples >= {MIN_MC_SAMPLES}, got {self.mc_samples}")

    @property
    def label(self) -> str:
        if self.family == EstimatorFamily.NAIVE or self.alpha is None:
            return self.family.value
        return f"{self.family.value}_{_format_alpha(self.alpha)}"

    def prior_for(self, request: MeasureRequest) -> DirichletParams:
        if self.alpha is not None:
            return self.alpha
        if request.measure == MeasureId.ETA:
            return DirichletParams.of(request.eta_alpha)
        return DirichletParams.of(DEFAULT_ALPHA)

    def label_for(self, request: MeasureRequest) -> str:
        """Label with the alpha actually used for this measure."""
        if self.family == EstimatorFamily.NAIVE:
            return self.family.value
        if self.family == EstimatorFamily.VOLUME and request.measure == MeasureId.DPRIME:
            return self.family.value
        return f"{self.family.value}_{_format_alpha(self.prior_for(request))}"

    def supports(self, request: MeasureRequest) -> bool:
        if self.family != EstimatorFamily.VOLUME:
            return True
        return request.measure in (MeasureId.ETA, MeasureId.DPRIME)


def parse_estimator(token: str, alpha: Optional[DirichletParams] = None,
                    mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> EstimatorSpec:
    """
    Parse an estimator token: ne, sne, sne_<alpha>, be, be_<alpha>, ve, ve_<alpha>.

    A token alpha overrides the `alpha` argument.

    Raises:
        InputError: If the token names no estimator.
    """
    token = token.strip().lower()
    name, sep, suffix = token.partition("_")
    try:
        family = EstimatorFamily(name)
    except ValueError:
        raise InputError(f"unknown estimator {token!r}; expected ne, sne[_a], be[_a] or ve[_a]")
    if sep:
        if family == EstimatorFamily.NAIVE:
            raise InputError("the naive estimator takes no alpha")
        try:
            alpha = DirichletParams.of(float(suffix))
        except ValueError:
            raise InputError(f"bad alpha in estimator token {token!r}")
    return EstimatorSpec(family=family, alpha=alpha, mc_samples=mc_samples, seed=seed)


# ---------------------------
# Cell evaluation
# ---------------------------

def evaluate_cells(cells: np.ndarray, request: MeasureRequest) -> np.ndarray:
    """Measure values for each row of a (m, 4) cell array; NaN where undefined."""
    cells = np.atleast_2d(np.asarray(cells, dtype=float))
    if request.measure != MeasureId.ETA:
        return np.asarray(CLASSICAL_KERNELS[request.measure](cells), dtype=float)
    s = log_lambda_kernel(cells)
    out = np.full(s.shape, np.nan)
    known = ~np.isnan(s)
    if np.any(known):
        out[known] = request.cal.eta_log(s[known])
    return out


def _plug_in(cells: np.ndarray, request: MeasureRequest, zero_cells: bool) -> MeasureValue:
    value = float(evaluate_cells(cells, request)[0])
    if request.measure == MeasureId.LAMBDA and not (math.isfinite(value) and value > 0.0):
        return MeasureValue(request.measure, math.nan, defined=False)
    if math.isnan(value):
        return MeasureValue(request.measure, math.nan, defined=False)
    inflated = zero_cells and request.measure in _BOUNDED_MEASURES and abs(value) >= 1.0 - 1e-12
    if inflated and request.measure == MeasureId.ETA:
        value = math.copysign(1.0, value)
    return MeasureValue(request.measure, value, inflated=inflated)


def naive_estimate(tN: CountTable, request: MeasureRequest) -> MeasureValue:
    """
    Plug-in of raw frequencies.

    Zero cells make lambda undefined; bounded measures that land on +-1 only
    because of zero cells are flagged inflated (eta is reported at +-1).
    """
    cells = np.asarray(tN.cells(), dtype=float) / tN.total
    return _plug_in(cells, request, zero_cells=min(tN.cells()) == 0)


def posterior_mean_cells(tN: CountTable, alpha: DirichletParams) -> np.ndarray:
    """(n_ij + a_ij) / (N + sum a)."""
    a = DirichletParams.of(alpha)
    pseudo = np.asarray(tN.cells(), dtype=float) + a.as_array()
    return pseudo / (tN.total + a.total)


def semi_naive_estimate(tN: CountTable, request: MeasureRequest, alpha: DirichletParams) -> MeasureValue:
    """Plug-in of posterior-mean probabilities; always defined."""
    return _plug_in(posterior_mean_cells(tN, alpha), request, zero_cells=False)


def bayes_estimates(
    tN: CountTable,
    requests: Sequence[MeasureRequest],
    alpha: DirichletParams,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, MeasureValue]:
    """
    Posterior means of several measures from one shared set of D(alpha + n) draws.

    Returns:
        {request.label: MeasureValue with std_error}
    """
    if mc_samples < MIN_MC_SAMPLES:
        raise InputError(f"Bayes estimator needs mc_samples >= {MIN_MC_SAMPLES}, got {mc_samples}")
    posterior = DirichletParams.of(alpha).posterior(tN)
    rng = rng if rng is not None else substream(seed, "bayes", *tN.cells())
    draws = dirichlet_cells(posterior, mc_samples, rng)
    out: Dict[str, MeasureValue] = {}
    for request in requests:
        values = evaluate_cells(draws, request)
        if request.measure == MeasureId.LAMBDA:
            values = np.where(np.isfinite(values), values, np.nan)
        usable = values[~np.isnan(values)]
        if usable.size < 2:
            logger.debug(f"bayes {request.label} undefined for {tN.cells()}: {usable.size} usable draws")
            out[request.label] = MeasureValue(request.measure, math.nan, defined=False)
            continue
        std_error = float(np.std(usable, ddof=1) / math.sqrt(usable.size))
        out[request.label] = MeasureValue(request.measure, float(np.mean(usable)), std_error=std_error)
    return out


def bayes_estimate(tN: CountTable, request: MeasureRequest, alpha: DirichletParams,
                   mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> MeasureValue:
    """Monte Carlo posterior mean; deterministic given seed."""
    return bayes_estimates(tN, [request], alpha, mc_samples, seed)[request.label]


# ---------------------------
# Table probability and volume estimators
# ---------------------------

@dataclass(frozen=True)
class TableProbability:
    """Probability of a count table under the D(alpha)-mixed multinomial."""

    table: CountTable
    weight: float

    def to_dict(self):
        return {"table": self.table.to_dict(), "weight": self.weight}


def table_probability(tN: CountTable, alpha: DirichletParams) -> TableProbability:
    """w = N B(N, sum a) / prod n_ij B(n_ij, a_ij), with n B(n, x) = 1 for n = 0."""
    a = DirichletParams.of(alpha)
    log_w = float(log_table_weight(np.asarray([tN.cells()]), a)[0])
    return TableProbability(table=tN, weight=min(1.0, math.exp(log_w)))


def volume_eta_estimate(tN: CountTable, alpha: DirichletParams,
                        cap: int = VOLUME_BUDGET_N, allow_over_cap: bool = False) -> MeasureValue:
    """
    Volume estimate of eta_alpha.

    Raises:
        BudgetExceeded: If N exceeds cap without allow_over_cap.
    """
    value = volume_eta_value(tN, DirichletParams.of(alpha), cap=cap, allow_over_cap=allow_over_cap)
    return MeasureValue(MeasureId.ETA, value)


def volume_dprime_estimate(tN: CountTable) -> MeasureValue:
    """
    Signed Dvol estimate of D'.

    Raises:
        DegenerateMarginals: If a row or column total is 0.
    """
    return MeasureValue(MeasureId.DPRIME, volume_dprime_value(tN))


# ---------------------------
# Dispatch
# ---------------------------

def estimate(tN: CountTable, request: MeasureRequest, spec: EstimatorSpec) -> MeasureValue:
    """
    Apply one estimator to one measure.

    Raises:
        FlagConflict: If VOLUME is asked for a measure other than eta or D'.
        BudgetExceeded, DegenerateMarginals: From the volume estimators.
    """
    if spec.family == EstimatorFamily.NAIVE:
        return naive_estimate(tN, request)
    prior = spec.prior_for(request)
    if spec.family == EstimatorFamily.SEMI_NAIVE:
        return semi_naive_estimate(tN, request, prior)
    if spec.family == EstimatorFamily.BAYES:
        return bayes_estimate(tN, request, prior, spec.mc_samples, spec.seed)
    if not spec.supports(request):
        raise FlagConflict(f"volume estimator is only defined for eta and dprime, not {request.label}")
    if request.measure == MeasureId.ETA:
        return volume_eta_estimate(tN, prior, cap=spec.volume_cap, allow_over_cap=spec.allow_over_cap)
    return volume_dprime_estimate(tN)


__all__ = [
    "DEFAULT_ALPHA",
    "DEFAULT_MC_SAMPLES",
    "EstimatorFamily",
    "EstimatorSpec",
    "MeasureRequest",
    "TableProbability",
    "calibration_for",
    "parse_measure",
    "parse_measures",
    "parse_estimator",
    "evaluate_cells",
    "naive_estimate",
    "posterior_mean_cells",
    "semi_naive_estimate",
    "bayes_estimate",
    "bayes_estimates",
    "table_probability",
    "volume_eta_estimate",
    "volume_dprime_estimate",
    "estimate",
]
