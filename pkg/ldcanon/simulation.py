"""
Monte Carlo studies.

Three studies share one replicate discipline: replicate i draws only from
substreams keyed by (seed, ..., i), workers receive contiguous replicate
chunks, and per-replicate results are reassembled in index order before any
reduction. Reports are therefore bit-identical for every worker count.

- mse           squared error of every (estimator, measure) pair per sample size
- kendall       Kendall tau between D' and lambda within marginal-frequency bins
- distribution  histograms, KS statistics against uniform, log-lambda density
                and paired scatter samples
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ldcanon.canonical import QUADRATURE_TOL, CalibrationMethod, EtaCalibration, log_lambda_density
from ldcanon.errors import (
    BudgetExceeded,
    ConfigError,
    DegenerateMarginals,
    EmptyBin,
    InsufficientSamples,
    QuadratureFailure,
    StudyInterrupted,
)
from ldcanon.estimators import (
    DEFAULT_MC_SAMPLES,
    EstimatorFamily,
    EstimatorSpec,
    MeasureRequest,
    bayes_estimates,
    estimate,
    evaluate_cells,
)
from ldcanon.measures import MeasureId, dprime_kernel, log_lambda_kernel
from ldcanon.rng import substream
from ldcanon.sampling import (
    dirichlet_cells,
    fixed_marginal_cells,
    multinomial_counts,
    sample_dirichlet,
    sample_multinomial,
)
from ldcanon.tables import CountTable, DirichletParams

logger = logging.getLogger(__name__)


# ---------------------------
# Constants
# ---------------------------

DEFAULT_REPLICATES = 10_000
MIN_REPORTED_REPLICATES = 1000
MIN_DISTRIBUTION_DRAWS = 10_000
HISTOGRAM_BINS = 64
MIN_BIN_TABLES = 100
LOG_LAMBDA_RANGE = 16.0
DEFAULT_SCATTER_SAMPLES = 2000
DRAW_BLOCK = 50_000
DEFAULT_BINS: Tuple[Tuple[float, float], ...] = (
    (0.0, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5),
)


class StudyKind(str, Enum):
    MSE = "mse"
    KENDALL = "kendall"
    DISTRIBUTION = "distribution"


class Binning(str, Enum):
    """Which minor marginal frequency places a table in a bin."""

    BOTH = "both"  # row-minor and column-minor both in the bin
    ROW = "row"
    MIN = "min"    # smaller of the two


# ---------------------------
# Config and report
# ---------------------------

@dataclass(frozen=True)
class StudyConfig:
    """
    Inputs of a study. Identical configs give bit-identical reports.

    replicates counts true tables for mse, and total draws for kendall and
    distribution.
    """

    kind: StudyKind
    prior: DirichletParams
    sample_sizes: Tuple[int, ...] = ()
    replicates: int = DEFAULT_REPLICATES
    seed: int = 0
    estimators: Tuple[EstimatorSpec, ...] = ()
    measures: Tuple[MeasureRequest, ...] = ()
    bins: Tuple[Tuple[float, float], ...] = DEFAULT_BINS
    binning: Binning = Binning.BOTH
    mc_samples: int = DEFAULT_MC_SAMPLES
    scatter_samples: int = DEFAULT_SCATTER_SAMPLES
    fixed_marginals: Optional[Tuple[float, float]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StudyKind(self.kind))
        object.__setattr__(self, "binning", Binning(self.binning))
        object.__setattr__(self, "prior", DirichletParams.of(self.prior))
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if any(n < 1 for n in self.sample_sizes):
            raise ConfigError(f"sample sizes must be >= 1, got {list(self.sample_sizes)}")
        validate_bins(self.bins)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "prior": self.prior.to_dict(),
            "prior_label": self.prior.label,
            "sample_sizes": list(self.sample_sizes),
            "replicates": self.replicates,
            "seed": self.seed,
            "estimators": [e.label for e in self.estimators],
            "measures": [m.label for m in self.measures],
            "bins": [list(b) for b in self.bins],
            "binning": self.binning.value,
            "mc_samples": self.mc_samples,
            "scatter_samples": self.scatter_samples,
            "fixed_marginals": list(self.fixed_marginals) if self.fixed_marginals else None,
        }


def validate_bins(bins: Sequence[Tuple[float, float]]) -> None:
    """
    Bins are (lo, hi] intervals with 0 <= lo < hi <= 0.5, sorted and
    non-overlapping. A bin may start at 0 since it is open on the left;
    gaps between bins are allowed and tables falling in a gap are skipped.

    Raises:
        ConfigError: On empty, reversed, overlapping or out-of-range bins.
    """
    if not bins:
        raise ConfigError("at least one marginal-frequency bin is required")
    previous_hi = 0.0
    for lo, hi in bins:
        if not (0.0 <= lo < hi <= 0.5):
            raise ConfigError(f"bin ({lo}, {hi}] must satisfy 0 <= lo < hi <= 0.5")
        if lo < previous_hi:
            raise ConfigError(f"bin ({lo}, {hi}] overlaps the previous bin")
        previous_hi = hi


@dataclass(frozen=True)
class StudyRow:
    """MSE of one (measure, estimator, prior, N) cell."""

    measure: str
    estimator: str
    prior: str
    n: int
    mse: Optional[float]
    std_error: Optional[float]
    replicates: int
    excluded: int
    mse_strict: Optional[float]
    std_error_strict: Optional[float]
    excluded_strict: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "measure": self.measure,
            "estimator": self.estimator,
            "prior": self.prior,
            "n": self.n,
            "mse": self.mse,
            "std_error": self.std_error,
            "replicates": self.replicates,
            "excluded": self.excluded,
            "mse_strict": self.mse_strict,
            "std_error_strict": self.std_error_strict,
            "excluded_strict": self.excluded_strict,
        }


@dataclass(frozen=True)
class StudyReport:
    """Named tables of row dicts plus metadata; `primary` names the main table."""

    kind: StudyKind
    config: StudyConfig
    tables: Dict[str, List[Dict[str, Any]]]
    primary: str
    complete: bool = True
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def rows(self) -> List[Dict[str, Any]]:
        return self.tables[self.primary]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "complete": self.complete,
            "config": self.config.to_dict(),
            "metadata": dict(self.metadata),
            "primary": self.primary,
            "tables": {name: list(rows) for name, rows in self.tables.items()},
        }


# ---------------------------
# Shared helpers
# ---------------------------

def tabulate_calibrations(measures: Sequence[MeasureRequest]) -> Tuple[MeasureRequest, ...]:
    """Swap quadrature calibrations for tabulated ones before bulk evaluation."""
    out = []
    for request in measures:
        if request.measure == MeasureId.ETA and not request.cal.analytic and request.cal.knots is None:
            cal = request.cal
            logger.info(f"tabulating {request.label} calibration")
            tabulated = EtaCalibration(
                alpha=cal.alpha,
                method=CalibrationMethod.QUADRATURE,
                tolerance=cal.tolerance or QUADRATURE_TOL,
                knots=cal.tabulate(),
            )
            request = request.with_calibration(tabulated)
        out.append(request)
    return tuple(out)


def _chunks(count: int, workers: int) -> List[Tuple[int, int]]:
    size = max(1, math.ceil(count / max(1, workers * 4)))
    return [(start, min(count, start + size)) for start in range(0, count, size)]


def _run_chunks(fn, cfg: StudyConfig, chunks: List[Tuple[int, int]], workers: int, extra=()) -> List[Any]:
    """Map fn over chunks in order; on interrupt return what finished."""
    results: List[Any] = []
    try:
        if workers <= 1:
            for lo, hi in chunks:
                results.append(fn(cfg, lo, hi, *extra))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(fn, cfg, lo, hi, *extra) for lo, hi in chunks]
                for future in futures:
                    results.append(future.result())
    except KeyboardInterrupt:
        logger.warning(f"interrupted after {len(results)} of {len(chunks)} chunks")
        raise _Partial(results)
    return results


class _Partial(Exception):
    def __init__(self, results: List[Any]):
        super().__init__("partial")
        self.results = results


def _moments(errors: np.ndarray) -> Tuple[Optional[float], Optional[float], int]:
    usable = errors[~np.isnan(errors)]
    if usable.size == 0:
        return None, None, 0
    mse = float(np.mean(usable))
    se = float(np.std(usable, ddof=1) / math.sqrt(usable.size)) if usable.size > 1 else None
    return mse, se, int(usable.size)


# ---------------------------
# MSE study
# ---------------------------

def mse_pairs(cfg: StudyConfig) -> List[Tuple[EstimatorSpec, MeasureRequest]]:
    """(estimator, measure) pairs evaluated by the MSE study, volume restricted to eta and D'."""
    pairs = []
    for spec in cfg.estimators:
        for request in cfg.measures:
            if spec.supports(request):
                pairs.append((spec, request))
            else:
                logger.debug(f"skipping {spec.label} for {request.label}")
    return pairs


def _mse_replicate(cfg: StudyConfig, pairs, i: int) -> Tuple[np.ndarray, np.ndarray]:
    """Squared errors (clamped and strict) for replicate i, shape (len(N), len(pairs))."""
    sizes = cfg.sample_sizes
    err = np.full((len(sizes), len(pairs)), np.nan)
    strict = np.full((len(sizes), len(pairs)), np.nan)
    truth_cells = dirichlet_cells(cfg.prior, 1, substream(cfg.seed, "truth", i))
    truth = {r.label: float(evaluate_cells(truth_cells, r)[0]) for r in cfg.measures}
    bayes_groups: Dict[Tuple[str, DirichletParams], List[int]] = {}
    for k, (spec, request) in enumerate(pairs):
        if spec.family == EstimatorFamily.BAYES:
            bayes_groups.setdefault((spec.label, spec.prior_for(request)), []).append(k)

    for j, n in enumerate(sizes):
        counts = multinomial_counts(truth_cells[0], n, substream(cfg.seed, "counts", i, n))
        tN = CountTable(*(int(c) for c in counts))
        values: Dict[int, Any] = {}
        for (label, prior), members in bayes_groups.items():
            requests = [pairs[k][1] for k in members]
            rng = substream(cfg.seed, "bayes", i, n, label, prior.label)
            results = bayes_estimates(tN, requests, prior, cfg.mc_samples, rng=rng)
            for k in members:
                values[k] = results[pairs[k][1].label]
        for k, (spec, request) in enumerate(pairs):
            if k not in values:
                try:
                    values[k] = estimate(tN, request, spec)
                except DegenerateMarginals:
                    values[k] = None
            value, true = values[k], truth[request.label]
            if value is None or not value.defined or not math.isfinite(true):
                continue
            err[j, k] = (value.value - true) ** 2
            if not value.inflated:
                strict[j, k] = err[j, k]
    return err, strict


def _mse_chunk(cfg: StudyConfig, lo: int, hi: int, pairs) -> Tuple[np.ndarray, np.ndarray]:
    results = [_mse_replicate(cfg, pairs, i) for i in range(lo, hi)]
    return np.stack([r[0] for r in results]), np.stack([r[1] for r in results])


def _mse_rows(cfg: StudyConfig, pairs, err: np.ndarray, strict: np.ndarray) -> List[Dict[str, Any]]:
    rows = []
    done = err.shape[0]
    for k, (spec, request) in enumerate(pairs):
        for j, n in enumerate(cfg.sample_sizes):
            mse, se, used = _moments(err[:, j, k])
            mse_s, se_s, used_s = _moments(strict[:, j, k])
            row = StudyRow(
                measure=request.label,
                estimator=spec.label_for(request),
                prior=cfg.prior.label,
                n=n,
                mse=mse,
                std_error=se,
                replicates=done,
                excluded=done - used,
                mse_strict=mse_s,
                std_error_strict=se_s,
                excluded_strict=done - used_s,
            )
            if row.excluded:
                logger.info(f"{row.measure} {row.estimator} N={n}: {row.excluded} of {done} replicates excluded")
            rows.append(row.to_dict())
    return rows


def run_mse_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    """
    Estimator MSE against the true measure of D(prior) tables.

    Raises:
        ConfigError: If the config has no estimators, measures or sample sizes,
            or fewer than MIN_REPORTED_REPLICATES replicates.
        BudgetExceeded: If a volume estimator meets an N above its cap.
        StudyInterrupted: On Ctrl-C, carrying the report over finished replicates.
    """
    if not (cfg.estimators and cfg.measures and cfg.sample_sizes):
        raise ConfigError("mse study needs estimators, measures and sample_sizes")
    if cfg.replicates < MIN_REPORTED_REPLICATES:
        raise ConfigError(f"mse study needs >= {MIN_REPORTED_REPLICATES} replicates, got {cfg.replicates}")
    for spec in cfg.estimators:
        if spec.family == EstimatorFamily.VOLUME and not spec.allow_over_cap:
            over = [n for n in cfg.sample_sizes if n > spec.volume_cap]
            if over:
                raise BudgetExceeded(f"volume estimator cap {spec.volume_cap} is below sample sizes {over}")
    cfg = replace(cfg, measures=tabulate_calibrations(cfg.measures))
    pairs = mse_pairs(cfg)
    chunks = _chunks(cfg.replicates, workers)
    logger.info(f"mse study {cfg.prior.label}: {len(pairs)} pairs x {len(cfg.sample_sizes)} sizes, "
                f"{cfg.replicates} replicates in {len(chunks)} chunks, workers={workers}")
    complete = True
    try:
        parts = _run_chunks(_mse_chunk, cfg, chunks, workers, extra=(pairs,))
    except _Partial as partial:
        parts, complete = partial.results, False
    shape = (0, len(cfg.sample_sizes), len(pairs))
    err = np.concatenate([p[0] for p in parts]) if parts else np.empty(shape)
    strict = np.concatenate([p[1] for p in parts]) if parts else np.empty(shape)
    report = StudyReport(
        kind=StudyKind.MSE,
        config=cfg,
        tables={"mse": _mse_rows(cfg, pairs, err, strict)},
        primary="mse",
        complete=complete,
        metadata={"seed": cfg.seed, "replicates_completed": int(err.shape[0])},
    )
    if not complete:
        raise StudyInterrupted(f"mse study interrupted after {err.shape[0]} replicates", partial=report)
    return report


# ---------------------------
# Kendall study
# ---------------------------

def minor_frequencies(cells: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-minor and column-minor allele frequencies, each in (0, 0.5]."""
    row0 = cells[:, 0] + cells[:, 1]
    col0 = cells[:, 0] + cells[:, 2]
    return np.minimum(row0, 1.0 - row0), np.minimum(col0, 1.0 - col0)


def bin_mask(cells: np.ndarray, lo: float, hi: float, binning: Binning) -> np.ndarray:
    """Tables whose minor frequency falls in (lo, hi] under the binning rule."""
    row_minor, col_minor = minor_frequencies(cells)

    def inside(x: np.ndarray) -> np.ndarray:
        return (x > lo) & (x <= hi)

    if binning == Binning.BOTH:
        return inside(row_minor) & inside(col_minor)
    if binning == Binning.ROW:
        return inside(row_minor)
    return inside(np.minimum(row_minor, col_minor))


def _draw_block(cfg: StudyConfig, tag: str, block: int, size: int) -> np.ndarray:
    rng = substream(cfg.seed, tag, block)
    if cfg.fixed_marginals is not None:
        row0, col0 = cfg.fixed_marginals
        return fixed_marginal_cells(row0, col0, size, rng)
    return dirichlet_cells(cfg.prior, size, rng)


def _draw_chunk(cfg: StudyConfig, lo: int, hi: int, tag: str) -> np.ndarray:
    blocks = []
    for block in range(lo, hi):
        start = block * DRAW_BLOCK
        blocks.append(_draw_block(cfg, tag, block, min(DRAW_BLOCK, cfg.replicates - start)))
    return np.concatenate(blocks)


def _draw_all(cfg: StudyConfig, tag: str, workers: int) -> np.ndarray:
    n_blocks = math.ceil(cfg.replicates / DRAW_BLOCK)
    chunks = _chunks(n_blocks, workers)
    try:
        parts = _run_chunks(_draw_chunk, cfg, chunks, workers, extra=(tag,))
    except _Partial:
        raise StudyInterrupted(f"{tag} study interrupted while drawing tables")
    return np.concatenate(parts)


def run_kendall_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    """
    Kendall tau between D' and lambda for tables binned by minor marginal frequency.

    tau is a rank statistic, so tau(D', lambda) = tau(D', eta_alpha); both
    are reported, eta with the first eta measure requested (eta_0.5 otherwise).
    The two agree up to ties: eta is a double, and distinct extreme odds
    ratios can round to the same eta (or to the clamp just inside +-1).

    Raises:
        EmptyBin: If a bin receives fewer than MIN_BIN_TABLES tables.
    """
    cells = _draw_all(cfg, "kendall", workers)
    dprime = dprime_kernel(cells)
    log_lam = log_lambda_kernel(cells)
    eta_request = next((m for m in cfg.measures if m.measure == MeasureId.ETA), MeasureRequest(MeasureId.ETA))
    eta_request = tabulate_calibrations([eta_request])[0]

    rows = []
    for lo, hi in cfg.bins:
        mask = bin_mask(cells, lo, hi, cfg.binning) & np.isfinite(log_lam) & ~np.isnan(dprime)
        count = int(np.count_nonzero(mask))
        if count < MIN_BIN_TABLES:
            raise EmptyBin(f"bin ({lo}, {hi}] received {count} tables, need >= {MIN_BIN_TABLES}")
        tau = stats.kendalltau(dprime[mask], log_lam[mask])[0]
        eta = np.asarray(eta_request.cal.eta_log(log_lam[mask]), dtype=float)
        tau_eta = stats.kendalltau(dprime[mask], eta)[0]
        rows.append({
            "bin_lo": lo,
            "bin_hi": hi,
            "binning": cfg.binning.value,
            "tables": count,
            "tau_dprime_lambda": float(tau),
            "tau_dprime_eta": float(tau_eta),
            "eta": eta_request.label,
        })
        logger.info(f"kendall bin ({lo}, {hi}]: {count} tables, tau={tau:.4f}")
    return StudyReport(
        kind=StudyKind.KENDALL,
        config=cfg,
        tables={"kendall": rows},
        primary="kendall",
        metadata={"seed": cfg.seed, "draws": int(cells.shape[0])},
    )


# ---------------------------
# Distribution study
# ---------------------------

def _default_distribution_measures(prior: DirichletParams) -> Tuple[MeasureRequest, ...]:
    eta_alpha = prior.scalar if prior.symmetric() else 0.5
    return (
        MeasureRequest(MeasureId.ETA, eta_alpha),
        MeasureRequest(MeasureId.DPRIME),
        MeasureRequest(MeasureId.R),
        MeasureRequest(MeasureId.Q),
    )


def histogram_rows(series: str, values: np.ndarray, lo: float, hi: float,
                   bins: int = HISTOGRAM_BINS) -> List[Dict[str, Any]]:
    """Fixed equal-width histogram; values outside [lo, hi] fall into the edge bins."""
    clipped = np.clip(values, lo, hi)
    counts, edges = np.histogram(clipped, bins=bins, range=(lo, hi))
    width = (hi - lo) / bins
    total = max(1, values.size)
    return [
        {
            "series": series,
            "bin_lo": float(edges[b]),
            "bin_hi": float(edges[b + 1]),
            "count": int(counts[b]),
            "density": float(counts[b]) / (total * width),
        }
        for b in range(bins)
    ]


def _reference_log_lambda_density(prior: DirichletParams, centers: np.ndarray) -> List[Optional[float]]:
    out: List[Optional[float]] = []
    for s in centers:
        try:
            out.append(log_lambda_density(float(s), prior, tol=1e-6))
        except QuadratureFailure:
            logger.warning(f"reference log-lambda density unavailable at {s:.3f}")
            out.append(None)
    return out


def run_distribution_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    """
    Distribution of measures over tables drawn from the prior (or a fixed-marginals fiber).

    Emits a 64-bin histogram on [-1, 1] and a KS statistic against uniform(-1, 1)
    for every bounded measure, a log-lambda histogram with the quadrature
    density for reference, and the first scatter_samples draws of every measure.

    Raises:
        InsufficientSamples: If fewer than MIN_DISTRIBUTION_DRAWS draws are requested.
    """
    if cfg.replicates < MIN_DISTRIBUTION_DRAWS:
        raise InsufficientSamples(f"distribution study needs >= {MIN_DISTRIBUTION_DRAWS} draws, got {cfg.replicates}")
    measures = tabulate_calibrations(cfg.measures or _default_distribution_measures(cfg.prior))
    cells = _draw_all(cfg, "distribution", workers)
    log_lam = log_lambda_kernel(cells)

    histograms: List[Dict[str, Any]] = []
    summary: List[Dict[str, Any]] = []
    columns: Dict[str, np.ndarray] = {"log_lambda": log_lam}
    for request in measures:
        values = evaluate_cells(cells, request)
        columns[request.label] = values
        if request.measure == MeasureId.LAMBDA:
            continue
        usable = values[~np.isnan(values)]
        histograms.extend(histogram_rows(request.label, usable, -1.0, 1.0))
        ks = stats.kstest(usable, "uniform", args=(-1.0, 2.0))
        q25, q75 = np.percentile(usable, [25.0, 75.0])
        summary.append({
            "measure": request.label,
            "draws": int(usable.size),
            "ks_statistic": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
            "iqr": float(q75 - q25),
            "mean": float(np.mean(usable)),
        })
        logger.info(f"distribution {request.label}: KS={ks.statistic:.5f} iqr={q75 - q25:.4f}")

    finite = log_lam[np.isfinite(log_lam)]
    density_rows = histogram_rows("log_lambda", finite, -LOG_LAMBDA_RANGE, LOG_LAMBDA_RANGE)
    if cfg.fixed_marginals is None:
        centers = np.array([0.5 * (r["bin_lo"] + r["bin_hi"]) for r in density_rows])
        for row, ref in zip(density_rows, _reference_log_lambda_density(cfg.prior, centers)):
            row["reference_density"] = ref

    take = min(cfg.scatter_samples, cells.shape[0])
    scatter = [
        {"index": i, **{name: (None if math.isnan(v[i]) else float(v[i])) for name, v in columns.items()}}
        for i in range(take)
    ]
    return StudyReport(
        kind=StudyKind.DISTRIBUTION,
        config=replace(cfg, measures=measures),
        tables={"summary": summary, "histogram": histograms, "log_lambda": density_rows, "scatter": scatter},
        primary="summary",
        metadata={"seed": cfg.seed, "draws": int(cells.shape[0])},
    )


STUDY_RUNNERS = {
    StudyKind.MSE: run_mse_study,
    StudyKind.KENDALL: run_kendall_study,
    StudyKind.DISTRIBUTION: run_distribution_study,
}


def run_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    return STUDY_RUNNERS[cfg.kind](cfg, workers)


__all__ = [
    "DEFAULT_REPLICATES",
    "DEFAULT_BINS",
    "HISTOGRAM_BINS",
    "MIN_BIN_TABLES",
    "StudyKind",
    "Binning",
    "StudyConfig",
    "StudyRow",
    "StudyReport",
    "validate_bins",
    "tabulate_calibrations",
    "mse_pairs",
    "minor_frequencies",
    "bin_mask",
    "histogram_rows",
    "run_mse_study",
    "run_kendall_study",
    "run_distribution_study",
    "run_study",
    "sample_dirichlet",
    "sample_multinomial",
]
