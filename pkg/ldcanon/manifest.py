"""
Run manifests.

Every command that writes artifacts also writes manifest.json: the command,
its full flag set, seed, SHA-256 digests of inputs and outputs, tool version,
source digest and timestamp. `ldcanon replay MANIFEST --verify` reruns the
recorded command and compares output digests.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from ldcanon.errors import InputError

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

# Source files whose digest identifies the computation
CRITICAL_SOURCE_FILES = [
    "ldcanon/tables.py",
    "ldcanon/measures.py",
    "ldcanon/dilog.py",
    "ldcanon/canonical.py",
    "ldcanon/sampling.py",
    "ldcanon/rng.py",
    "ldcanon/volume.py",
    "ldcanon/estimators.py",
    "ldcanon/simulation.py",
    "ldcanon/haplotypes.py",
    "ldcanon/config.py",
    "ldcanon/emit.py",
    "ldcanon/main.py",
]


def get_file_sha256(file_path: Path) -> str:
    """Compute SHA256 of a single file."""
    h = hashlib.sha256()
    with Path(file_path).open("rb") as f:
        while chunk := f.read(8192):
            h.update(chunk)
    return h.hexdigest()


def compute_source_digest(repo_root: Path) -> Dict[str, Any]:
    """Hashes of the critical source files plus their combined digest."""
    file_hashes = {}
    combined = hashlib.sha256()
    for rel_path in sorted(CRITICAL_SOURCE_FILES):
        file_path = repo_root / rel_path
        if file_path.exists():
            file_hash = get_file_sha256(file_path)
        else:
            file_hash = "NOT_FOUND"
        file_hashes[rel_path] = file_hash
        combined.update(f"{rel_path}:{file_hash}\n".encode("utf-8"))
    return {"source_files": file_hashes, "combined_sha256": combined.hexdigest()}


def get_commit(repo_root: Path) -> str:
    """Git commit of the working tree, or "unknown"."""
    try:
        result = subprocess.run(
            ["git", "-C", str(repo_root), "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            check=True,
            timeout=5,
        )
        return result.stdout.strip()
    except Exception:
        return "unknown"


@dataclass
class RunManifest:
    """Provenance of one command run."""

    command: str
    argv: List[str]
    flags: Dict[str, Any]
    seed: Optional[int]
    tool_version: str
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    source_sha256: str = "unknown"
    commit: str = "unknown"
    wall_time_s: Optional[float] = None
    status: str = "ok"
    manifest_version: int = MANIFEST_VERSION

    def add_input(self, path: Path) -> None:
        self.inputs[str(path)] = get_file_sha256(path)

    def add_output(self, path: Path) -> None:
        self.outputs[Path(path).name] = get_file_sha256(path)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_manifest(path: Path) -> RunManifest:
    """
    Raises:
        InputError: On unreadable or malformed manifests.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(data, dict) or data.get("manifest_version") != MANIFEST_VERSION:
        raise InputError(f"{path}: not a version {MANIFEST_VERSION} manifest")
    try:
        return RunManifest(**data)
    except TypeError as exc:
        raise InputError(f"{path}: bad manifest fields ({exc})") from exc


def compare_outputs(recorded: Dict[str, str], out_dir: Path) -> List[str]:
    """Names of recorded outputs whose digest differs (or that are missing) in out_dir."""
    mismatched = []
    for name, digest in sorted(recorded.items()):
        path = Path(out_dir) / name
        if not path.exists() or get_file_sha256(path) != digest:
            mismatched.append(name)
    return mismatched


__all__ = [
    "MANIFEST_NAME",
    "RunManifest",
    "get_file_sha256",
    "compute_source_digest",
    "get_commit",
    "load_manifest",
    "compare_outputs",
]
