"""
Study configuration files and runtime settings.

Config files are flat `key = value` text; `#` starts a comment and blank
lines are ignored:

    kind = mse
    prior_alpha = 1              # or four values: 2, 1, 0.5, 0.2
    sample_sizes = 50, 100, 500
    replicates = 10000
    seed = 42
    estimators = ne, sne, be, ve
    measures = eta_1, eta_0.5, dprime, r, q
    bins = 0:0.1, 0.1:0.2, 0.2:0.3, 0.3:0.4, 0.4:0.5
    binning = both               # both | row | min
    mc_samples = 20000
    volume_cap = 500
    scatter_samples = 2000
    fixed_marginals = 0.3, 0.2   # distribution study on a D(1) fiber
"""

from __future__ import annotations

import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from ldcanon.errors import ConfigError, InputError
from ldcanon.estimators import DEFAULT_MC_SAMPLES, EstimatorFamily, parse_estimator, parse_measure
from ldcanon.simulation import DEFAULT_BINS, DEFAULT_REPLICATES, DEFAULT_SCATTER_SAMPLES, StudyConfig, StudyKind
from ldcanon.tables import DirichletParams
from ldcanon.volume import VOLUME_BUDGET_N

logger = logging.getLogger(__name__)

THREADS_ENV = "LDCANON_THREADS"

CONFIG_KEYS = {
    "kind",
    "prior_alpha",
    "sample_sizes",
    "replicates",
    "seed",
    "estimators",
    "measures",
    "bins",
    "binning",
    "mc_samples",
    "volume_cap",
    "scatter_samples",
    "fixed_marginals",
}


def resolve_threads(cli_value: Optional[int]) -> int:
    """--threads, else LDCANON_THREADS, else 1."""
    if cli_value is not None:
        threads = cli_value
    else:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            threads = int(raw)
        except ValueError:
            raise InputError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if threads < 1:
        raise InputError(f"thread count must be >= 1, got {threads}")
    return threads


def read_config_pairs(path: Path) -> Dict[str, str]:
    """
    Read raw key/value pairs.

    Raises:
        ConfigError: On unreadable files, malformed lines, duplicate or unknown keys.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    pairs: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {raw.strip()!r}")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{number}: unknown key {key!r}; expected one of {sorted(CONFIG_KEYS)}")
        if key in pairs:
            raise ConfigError(f"{path}:{number}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _split(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _parse(key: str, value: str, convert: Callable):
    try:
        return convert(value)
    except (ValueError, InputError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc


def _floats(value: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in _split(value))


def _ints(value: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in _split(value))


def _bins(value: str) -> Tuple[Tuple[float, float], ...]:
    bins = []
    for item in _split(value):
        lo, sep, hi = item.partition(":")
        if not sep:
            raise ValueError(f"bin {item!r} must be lo:hi")
        bins.append((float(lo), float(hi)))
    return tuple(bins)


def parse_study_config(pairs: Dict[str, str], kind: Optional[str] = None) -> StudyConfig:
    """
    Build a StudyConfig from raw pairs; `kind` (from the command line) must agree with the file.

    Raises:
        ConfigError: On missing or invalid values.
    """
    file_kind = pairs.get("kind")
    if kind and file_kind and kind != file_kind:
        raise ConfigError(f"study kind {kind!r} conflicts with config kind {file_kind!r}")
    chosen = kind or file_kind
    if not chosen:
        raise ConfigError("study kind missing (config key 'kind' or command argument)")
    study_kind = _parse("kind", chosen, StudyKind)

    if "prior_alpha" not in pairs:
        raise ConfigError("config requires prior_alpha")
    prior = _parse("prior_alpha", pairs["prior_alpha"], lambda v: DirichletParams.of(_floats(v)))
    seed = _parse("seed", pairs.get("seed", "0"), int)
    mc_samples = _parse("mc_samples", pairs.get("mc_samples", str(DEFAULT_MC_SAMPLES)), int)
    volume_cap = _parse("volume_cap", pairs.get("volume_cap", str(VOLUME_BUDGET_N)), int)

    def estimators(value: str):
        specs = []
        for token in _split(value):
            spec = parse_estimator(token, mc_samples=mc_samples, seed=seed)
            if spec.family == EstimatorFamily.VOLUME:
                spec = replace(spec, volume_cap=volume_cap)
            specs.append(spec)
        return tuple(specs)

    fixed = None
    if "fixed_marginals" in pairs:
        fixed = _parse("fixed_marginals", pairs["fixed_marginals"], _floats)
        if len(fixed) != 2:
            raise ConfigError(f"fixed_marginals needs two values (row0, col0), got {len(fixed)}")

    try:
        cfg = StudyConfig(
            kind=study_kind,
            prior=prior,
            sample_sizes=_parse("sample_sizes", pairs.get("sample_sizes", ""), _ints),
            replicates=_parse("replicates", pairs.get("replicates", str(DEFAULT_REPLICATES)), int),
            seed=seed,
            estimators=_parse("estimators", pairs.get("estimators", ""), estimators),
            measures=_parse("measures", pairs.get("measures", ""),
                            lambda v: tuple(parse_measure(t) for t in _split(v))),
            bins=_parse("bins", pairs["bins"], _bins) if "bins" in pairs else DEFAULT_BINS,
            binning=_parse("binning", pairs.get("binning", "both"), str),
            mc_samples=mc_samples,
            scatter_samples=_parse("scatter_samples", pairs.get("scatter_samples", str(DEFAULT_SCATTER_SAMPLES)), int),
            fixed_marginals=fixed,
        )
    except ConfigError:
        raise
    except (InputError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    logger.info(f"study config: {cfg.kind.value} prior={cfg.prior.label} seed={cfg.seed} replicates={cfg.replicates}")
    return cfg


def load_study_config(path: Path, kind: Optional[str] = None) -> StudyConfig:
    return parse_study_config(read_config_pairs(path), kind)


__all__ = [
    "THREADS_ENV",
    "CONFIG_KEYS",
    "resolve_threads",
    "read_config_pairs",
    "parse_study_config",
    "load_study_config",
]
