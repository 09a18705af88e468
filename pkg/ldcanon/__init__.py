"""ldcanon v0.1 - Canonical linkage disequilibrium measures, estimators and Monte Carlo studies."""

__version__ = "0.1.0"

from .errors import (
    LDCanonError,
    InputError,
    FlagConflict,
    NumericalError,
)
from .tables import (
    ProbTable,
    CountTable,
    DirichletParams,
    SymmetryElement,
    make_prob_table,
    apply_symmetry,
    selection_act,
    odds_ratio,
    canonical_representative,
)
from .measures import (
    MeasureId,
    MeasureValue,
    d_coeff,
    d_prime,
    correlation_r,
    yules_q,
    mutual_information,
)
from .canonical import (
    CalibrationMethod,
    EtaCalibration,
    calibrate,
    eta1,
    eta_half,
    eta_of_table,
    q_eta_gap,
)
from .estimators import (
    EstimatorFamily,
    EstimatorSpec,
    MeasureRequest,
    estimate,
    parse_estimator,
    parse_measure,
)
from .simulation import StudyConfig, StudyKind, StudyReport, run_study

__all__ = [
    # Errors
    "LDCanonError",
    "InputError",
    "FlagConflict",
    "NumericalError",
    # Tables
    "ProbTable",
    "CountTable",
    "DirichletParams",
    "SymmetryElement",
    "make_prob_table",
    "apply_symmetry",
    "selection_act",
    "odds_ratio",
    "canonical_representative",
    # Measures
    "MeasureId",
    "MeasureValue",
    "d_coeff",
    "d_prime",
    "correlation_r",
    "yules_q",
    "mutual_information",
    # Canonical measure
    "CalibrationMethod",
    "EtaCalibration",
    "calibrate",
    "eta1",
    "eta_half",
    "eta_of_table",
    "q_eta_gap",
    # Estimators
    "EstimatorFamily",
    "EstimatorSpec",
    "MeasureRequest",
    "estimate",
    "parse_estimator",
    "parse_measure",
    # Studies
    "StudyConfig",
    "StudyKind",
    "StudyReport",
    "run_study",
]
