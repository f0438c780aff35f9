"""Report assembly: CSV artifacts, config snapshot, and a hashed manifest.

Reports are self-describing: the output directory carries the exact config
snapshot, every table as CSV, and a manifest listing each artifact with its
content hash. CSV cells are written with repr() for floats, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..errors import ManifestError
from .config import hash_config

MANIFEST_SCHEMA_VERSION = 1


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class ExperimentReport:
    kind: str
    config_snapshot: dict
    seeds: list[int]
    tables: list[Table] = field(default_factory=list)
    created: str = ""

    def __post_init__(self):
        if not self.created:
            self.created = datetime.now(timezone.utc).isoformat(timespec="seconds")

    @property
    def config_hash(self) -> str:
        return hash_config(self.config_snapshot)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "" if np.isnan(v) else repr(v)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit_report(report: ExperimentReport, out_dir: str | Path) -> Path:
    """Write config snapshot, all table CSVs, and the manifest.

    Re-emitting the same report object is idempotent: artifact bytes and the
    manifest are reproduced exactly.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc

    artifacts: list[dict] = []

    config_path = out / "config.json"
    config_path.write_text(
        json.dumps(report.config_snapshot, sort_keys=True, indent=1)
    )
    artifacts.append({"path": "config.json", "sha256": _sha256(config_path)})

    for table in report.tables:
        path = out / f"{table.name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(table.header)
            for row in table.rows:
                writer.writerow([_cell(v) for v in row])
        artifacts.append({"path": path.name, "sha256": _sha256(path)})

    manifest = {
        "manifest_schema_version": MANIFEST_SCHEMA_VERSION,
        "kind": report.kind,
        "config_hash": report.config_hash,
        "seeds": report.seeds,
        "created": report.created,
        "artifacts": artifacts,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return out


def validate_report(report_dir: str | Path) -> dict:
    """Re-hash every artifact listed in the manifest; raise on any mismatch.

    Also checks that the stored config snapshot matches the recorded hash.
    Returns the parsed manifest on success.
    """
    out = Path(report_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ManifestError(f"no manifest.json in {out}")
    manifest = json.loads(manifest_path.read_text())
    for entry in manifest.get("artifacts", []):
        path = out / entry["path"]
        if not path.exists():
            raise ManifestError(f"artifact {entry['path']} is missing")
        digest = _sha256(path)
        if digest != entry["sha256"]:
            raise ManifestError(
                f"artifact {entry['path']} hash mismatch: "
                f"manifest {entry['sha256'][:12]}…, file {digest[:12]}…"
            )
    config_path = out / "config.json"
    if config_path.exists():
        snapshot = json.loads(config_path.read_text())
        if hash_config(snapshot) != manifest.get("config_hash"):
            raise ManifestError("config snapshot does not match the recorded hash")
    return manifest
