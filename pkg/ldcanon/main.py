#!/usr/bin/env python3
"""
ldcanon command line.

Subcommands:
1. measure    evaluate measures on one probability or count table (stdout)
2. pairwise   LD estimates for all marker pairs of a haplotype TSV
3. calibrate  build and save an eta calibration file
4. study      run an mse / kendall / distribution study from a config file
5. replay     rerun a recorded manifest, optionally verifying output digests

Exit codes: 0 ok, 2 input error, 3 flag conflict, 4 numerical failure,
130 interrupted.
"""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ldcanon import __version__
from ldcanon.canonical import (
    QUADRATURE_TOL,
    MC_CALIBRATION_SAMPLES,
    CalibrationMethod,
    EtaCalibration,
    calibrate,
    eta_of_table,
    load_calibration,
    q_eta_gap,
    write_calibration,
)
from ldcanon.config import load_study_config, resolve_threads
from ldcanon.emit import (
    canonicalize,
    csv_text,
    format_table,
    json_text,
    write_csv,
    write_failed_marker,
    write_json,
    write_manifest_json,
    write_report,
)
from ldcanon.errors import FlagConflict, InputError, LDCanonError, OutputValidationError, StudyInterrupted
from ldcanon.estimators import (
    DEFAULT_MC_SAMPLES,
    EstimatorFamily,
    MeasureRequest,
    estimate,
    parse_estimator,
    parse_measure,
)
from ldcanon.haplotypes import pairwise_estimates, read_haplotypes
from ldcanon.manifest import (
    MANIFEST_NAME,
    RunManifest,
    compare_outputs,
    compute_source_digest,
    get_commit,
    get_file_sha256,
    load_manifest,
)
from ldcanon.measures import (
    MeasureId,
    correlation_r,
    d_coeff,
    d_prime,
    mutual_information,
    yules_q,
)
from ldcanon.simulation import run_study
from ldcanon.tables import CountTable, DirichletParams, make_prob_table, odds_ratio
from schemas.study_report import validate_measure_record, validate_pair_row

logger = logging.getLogger(__name__)

DEFAULT_MEASURES = "eta_0.5,eta_1,dprime,r,q,lambda,mi"
DEFAULT_LOG_LEVEL = "WARNING"
CHECK_GRID = np.logspace(-4.0, 4.0, 50)

REPO_ROOT = Path(__file__).resolve().parent.parent

TABLE_FUNCTIONS = {
    MeasureId.D: d_coeff,
    MeasureId.DPRIME: d_prime,
    MeasureId.R: correlation_r,
    MeasureId.LAMBDA: odds_ratio,
    MeasureId.Q: yules_q,
    MeasureId.MI: mutual_information,
}


def _banner(*lines: str) -> None:
    for line in lines:
        print(line, file=sys.stderr, flush=True)


def _parse_four(raw: str, convert: Callable, what: str) -> List[Any]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise InputError(f"{what} needs 4 comma-separated values, got {len(parts)}")
    try:
        return [convert(p) for p in parts]
    except ValueError as exc:
        raise InputError(f"bad {what} value: {exc}") from exc


def _resolve_measures(raw: str, alpha: Optional[float], calibration: Optional[EtaCalibration]) -> List[MeasureRequest]:
    """Plain `eta` tokens take --alpha; a loaded calibration serves the eta measures with its alpha."""
    requests = []
    for token in (t for t in raw.split(",") if t.strip()):
        request = parse_measure(token)
        if token.strip().lower() == "eta" and alpha is not None:
            request = MeasureRequest(MeasureId.ETA, alpha)
        if calibration is not None and request.measure == MeasureId.ETA and request.eta_alpha == calibration.alpha:
            request = request.with_calibration(calibration)
        requests.append(request)
    if not requests:
        raise InputError("no measures requested")
    if calibration is not None and not any(r.calibration is calibration for r in requests):
        raise FlagConflict(f"--calibration alpha={calibration.alpha:g} matches no requested eta measure")
    return requests


def _load_optional_calibration(path: Optional[Path]) -> Optional[EtaCalibration]:
    return load_calibration(path) if path is not None else None


def _new_manifest(command: str, args: argparse.Namespace, argv: Sequence[str], seed: Optional[int]) -> RunManifest:
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "handler"}
    flags["cwd"] = str(Path.cwd())
    return RunManifest(
        command=command,
        argv=list(argv),
        flags=flags,
        seed=seed,
        tool_version=__version__,
        source_sha256=compute_source_digest(REPO_ROOT)["combined_sha256"],
        commit=get_commit(REPO_ROOT),
    )


def _finish_manifest(manifest: RunManifest, outputs: Sequence[Path], path: Path, started: float) -> Path:
    for output in outputs:
        manifest.add_output(output)
    manifest.wall_time_s = round(time.monotonic() - started, 3)
    return write_manifest_json(path, manifest.to_dict())


# ---------------------------
# measure
# ---------------------------

def cmd_measure(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if (args.probs is None) == (args.counts is None):
        raise FlagConflict("give exactly one of --probs or --counts")
    if args.probs is not None and args.estimator is not None:
        raise FlagConflict("--estimator applies to --counts only")

    calibration = _load_optional_calibration(args.calibration)
    requests = _resolve_measures(args.measures, args.alpha, calibration)
    records: List[Dict[str, Any]] = []

    if args.probs is not None:
        t = make_prob_table(_parse_four(args.probs, float, "--probs"))
        for request in requests:
            if request.measure == MeasureId.ETA:
                value = eta_of_table(t, request.cal)
            else:
                value = float(TABLE_FUNCTIONS[request.measure](t))
            records.append({
                "measure": request.label, "estimator": "exact", "value": value,
                "defined": True, "inflated": False, "std_error": None,
            })
    else:
        tN = CountTable(*_parse_four(args.counts, int, "--counts"))
        alpha = DirichletParams.of(args.alpha) if args.alpha is not None else None
        spec = parse_estimator(args.estimator or "sne", alpha=alpha, mc_samples=args.mc_samples, seed=args.seed)
        if spec.family == EstimatorFamily.VOLUME and args.allow_over_cap:
            spec = replace(spec, allow_over_cap=True)
        for request in requests:
            result = estimate(tN, request, spec)
            records.append({
                "measure": request.label, "estimator": spec.label_for(request),
                **{k: v for k, v in result.to_dict().items() if k != "measure"},
            })

    records = [canonicalize(r) for r in records]
    for record in records:
        try:
            validate_measure_record(record)
        except ValueError as exc:
            raise OutputValidationError(f"measure record {record.get('measure')}: {exc}") from exc
    if args.format == "csv":
        sys.stdout.write(csv_text(records, ["measure", "estimator", "value", "defined", "inflated", "std_error"]))
    else:
        sys.stdout.write(json_text(records))
    sys.stdout.flush()
    return 0


# ---------------------------
# pairwise
# ---------------------------

def cmd_pairwise(args: argparse.Namespace, argv: Sequence[str]) -> int:
    started = time.monotonic()
    threads = resolve_threads(args.threads)
    calibration = _load_optional_calibration(args.calibration)
    request = _resolve_measures(args.measure, args.alpha, calibration)
    if len(request) != 1:
        raise FlagConflict("pairwise takes a single --measure")
    alpha = DirichletParams.of(args.alpha) if args.alpha is not None else None
    spec = parse_estimator(args.estimator, alpha=alpha, mc_samples=args.mc_samples, seed=args.seed)
    if not spec.supports(request[0]):
        raise FlagConflict(f"estimator {args.estimator} does not support {request[0].label}")

    matrix = read_haplotypes(args.input)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _new_manifest("pairwise", args, argv, args.seed)
    manifest.add_input(args.input)
    if args.calibration is not None:
        manifest.add_input(args.calibration)

    _banner(
        f"ldcanon v{__version__} pairwise",
        f"input: {args.input} ({matrix.haplotypes} haplotypes x {matrix.marker_count} markers)",
        f"measure: {request[0].label} estimator: {spec.label_for(request[0])}",
        f"output: {out_dir}",
    )
    rows = [r.to_dict() for r in pairwise_estimates(
        matrix, request[0], spec, min_n=args.min_n, min_maf=args.min_maf,
        max_pairs=args.max_pairs, workers=threads,
    )]
    outputs = [write_csv(out_dir / "pairwise.csv", rows, validate_pair_row,
                         ["marker_i", "marker_j", "n_complete", "estimate"])]
    if args.format == "json":
        outputs.append(write_json(out_dir / "pairwise.json", {"markers": matrix.to_dict(), "pairs": rows}))
    _finish_manifest(manifest, outputs, out_dir / MANIFEST_NAME, started)
    _banner(f"pairs: {len(rows)}")
    return 0


# ---------------------------
# calibrate
# ---------------------------

def _analytic_reference(alpha: float) -> EtaCalibration:
    if alpha == 1.0:
        return EtaCalibration(alpha=1.0, method=CalibrationMethod.ANALYTIC_1)
    if alpha == 0.5:
        return EtaCalibration(alpha=0.5, method=CalibrationMethod.ANALYTIC_HALF)
    raise FlagConflict("--check-analytic needs --alpha 1 or 0.5")


def cmd_calibrate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    started = time.monotonic()
    method = CalibrationMethod(args.method) if args.method else None
    cal = calibrate(args.alpha, method=method, tolerance=args.tolerance, samples=args.samples, seed=args.seed)
    report: Dict[str, Any] = {"alpha": cal.alpha, "method": cal.method.value}

    if args.check_analytic:
        reference = _analytic_reference(cal.alpha)
        other = cal
        if cal.analytic:
            other = calibrate(cal.alpha, method=CalibrationMethod.QUADRATURE, tolerance=args.tolerance)
        deviation = np.abs(np.asarray(other.eta(CHECK_GRID)) - np.asarray(reference.eta(CHECK_GRID)))
        report["check_method"] = other.method.value
        report["max_deviation"] = float(np.max(deviation))
    if args.report_q_gap:
        report["q_gap"] = q_eta_gap(cal.alpha, cal=cal)

    if args.output is not None:
        output = Path(args.output)
        manifest = _new_manifest("calibrate", args, argv, args.seed)
        write_calibration(cal, output)
        _finish_manifest(manifest, [output], output.parent / f"{output.name}.{MANIFEST_NAME}", started)
        report["path"] = str(output)
    sys.stdout.write(json_text(report))
    sys.stdout.flush()
    return 0


# ---------------------------
# study
# ---------------------------

def cmd_study(args: argparse.Namespace, argv: Sequence[str]) -> int:
    started = time.monotonic()
    threads = resolve_threads(args.threads)
    cfg = load_study_config(args.config, args.kind)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _new_manifest("study", args, argv, cfg.seed)
    manifest.add_input(args.config)

    _banner(
        f"ldcanon v{__version__} study {cfg.kind.value}",
        f"prior: {cfg.prior.label} seed: {cfg.seed} replicates: {cfg.replicates}",
        f"workers: {threads}",
        f"output: {out_dir}",
    )
    try:
        report = run_study(cfg, workers=threads)
    except (StudyInterrupted, KeyboardInterrupt) as exc:
        partial = getattr(exc, "partial", None)
        outputs = write_report(partial, out_dir) if partial is not None else []
        write_failed_marker(out_dir, f"interrupted: {exc}")
        manifest.status = "interrupted"
        _finish_manifest(manifest, outputs, out_dir / MANIFEST_NAME, started)
        _banner("study FAILED (interrupted); partial results flushed")
        return StudyInterrupted.exit_code

    outputs = write_report(report, out_dir)
    _finish_manifest(manifest, outputs, out_dir / MANIFEST_NAME, started)
    fields = {
        "mse": ["measure", "estimator", "n", "mse", "std_error", "excluded"],
        "kendall": ["bin_lo", "bin_hi", "tables", "tau_dprime_lambda"],
        "distribution": ["measure", "ks_statistic", "iqr"],
    }[cfg.kind.value]
    _banner(format_table(report.rows, fields), "study complete")
    return 0


# ---------------------------
# replay
# ---------------------------

_OUTPUT_FLAGS = {"pairwise": "out_dir", "study": "out_dir", "calibrate": "output"}


def cmd_replay(args: argparse.Namespace, argv: Sequence[str]) -> int:
    manifest_path = Path(args.manifest)
    recorded = load_manifest(manifest_path)
    if recorded.command not in _OUTPUT_FLAGS:
        raise InputError(f"manifest command {recorded.command!r} cannot be replayed")
    parser = build_parser()
    replay_args = parser.parse_args(recorded.argv)
    base = Path(recorded.flags.get("cwd", "."))
    for key, value in vars(replay_args).items():
        if isinstance(value, Path) and not value.is_absolute():
            setattr(replay_args, key, base / value)

    for name, digest in recorded.inputs.items():
        path = Path(name) if Path(name).is_absolute() else base / name
        if not path.exists() or get_file_sha256(path) != digest:
            raise InputError(f"input {name} is missing or changed since the manifest was written")

    if args.threads is not None and hasattr(replay_args, "threads"):
        replay_args.threads = args.threads
    flag = _OUTPUT_FLAGS[recorded.command]
    _banner(f"ldcanon v{__version__} replay {recorded.command}", f"manifest: {manifest_path}")
    if not args.verify:
        return replay_args.handler(replay_args, recorded.argv)

    with tempfile.TemporaryDirectory(prefix="ldcanon-replay-") as tmp:
        original = Path(getattr(replay_args, flag))
        target = Path(tmp) / original.name if flag == "output" else Path(tmp)
        setattr(replay_args, flag, target)
        code = replay_args.handler(replay_args, recorded.argv)
        if code != 0:
            return code
        mismatched = compare_outputs(recorded.outputs, target.parent if flag == "output" else target)
    if mismatched:
        _banner(f"replay FAILED: outputs differ: {', '.join(mismatched)}")
        return 1
    _banner(f"replay verified: {len(recorded.outputs)} outputs bit-identical")
    return 0


# ---------------------------
# Parser
# ---------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldcanon",
        description=f"ldcanon v{__version__} - canonical linkage disequilibrium measures and estimators",
    )
    parser.add_argument("--log-level", default=DEFAULT_LOG_LEVEL,
                        help=f"Logging level (default: {DEFAULT_LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="Measures of one table")
    p.add_argument("--probs", help="p00,p01,p10,p11 (positive, normalized on input)")
    p.add_argument("--counts", help="n00,n01,n10,n11 (non-negative integers)")
    p.add_argument("--measures", default=DEFAULT_MEASURES, help=f"Comma list (default: {DEFAULT_MEASURES})")
    p.add_argument("--estimator", help="ne | sne[_a] | be[_a] | ve[_a] for --counts (default: sne)")
    p.add_argument("--alpha", type=float, help="Alpha for plain 'eta' and for the estimator prior")
    p.add_argument("--calibration", type=Path, help="Calibration file for eta measures with its alpha")
    p.add_argument("--mc-samples", type=int, default=DEFAULT_MC_SAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-over-cap", action="store_true", help="Run the volume estimator above its N cap")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(handler=cmd_measure)

    p = sub.add_parser("pairwise", help="LD estimates for all marker pairs of a haplotype TSV")
    p.add_argument("input", type=Path, help="Haplotype TSV")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--measure", default="eta", help="Single measure token (default: eta)")
    p.add_argument("--estimator", default="sne", help="Estimator token (default: sne)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--calibration", type=Path)
    p.add_argument("--mc-samples", type=int, default=DEFAULT_MC_SAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-maf", type=float, default=0.0, help="Keep markers with MAF above this")
    p.add_argument("--min-n", type=int, default=1, help="Pairs with fewer complete haplotypes get a null estimate")
    p.add_argument("--max-pairs", type=int)
    p.add_argument("--threads", type=int, help="Workers (default: $LDCANON_THREADS or 1)")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(handler=cmd_pairwise)

    p = sub.add_parser("calibrate", help="Build an eta calibration")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--method", choices=[m.value for m in CalibrationMethod])
    p.add_argument("--tolerance", type=float, default=QUADRATURE_TOL)
    p.add_argument("--samples", type=int, default=MC_CALIBRATION_SAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path, help="Calibration file to write")
    p.add_argument("--check-analytic", action="store_true", help="Max deviation against the closed form")
    p.add_argument("--report-q-gap", action="store_true", help="max |Q - eta| over lambda in [1e-6, 1e6]")
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("study", help="Run a Monte Carlo study")
    p.add_argument("kind", choices=("mse", "kendall", "distribution"))
    p.add_argument("config", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--threads", type=int, help="Workers (default: $LDCANON_THREADS or 1)")
    p.set_defaults(handler=cmd_study)

    p = sub.add_parser("replay", help="Rerun a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--verify", action="store_true", help="Rerun into a scratch dir and compare output digests")
    p.add_argument("--threads", type=int)
    p.set_defaults(handler=cmd_replay)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entrypoint."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args, argv)
    except LDCanonError as exc:
        print(f"error: {exc}", file=sys.stderr, flush=True)
        return exc.exit_code
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr, flush=True)
        return StudyInterrupted.exit_code


if __name__ == "__main__":
    sys.exit(main())
