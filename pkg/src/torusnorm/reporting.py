"""Deterministic result files: canonical JSON payloads, CSV summaries, manifests.

Payloads are reproducible byte for byte given the same config and seed:
keys are sorted, floats use shortest round-trip repr, and anything
time-dependent lives in the separate run manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path

from . import __version__


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def file_sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def write_payload(path, body: dict, config: dict) -> str:
    """Write a deterministic JSON payload embedding config hash and version."""
    h = config_hash(config)
    payload = {"tool_version": __version__, "config_hash": h, "config": config, **body}
    Path(path).write_text(canonical_json(payload), encoding="utf-8")
    return h

def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


def write_manifest(out_dir, config: dict, files, elapsed: float):
    """Timestamps and wall-clock data live here, outside the payloads."""
    manifest = {
        "tool_version": __version__,
        "config_hash": config_hash(config),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "elapsed_seconds": round(elapsed, 3),
        "files": sorted(str(f) for f in files),
    }
    path = Path(out_dir) / "run_manifest.json"
    path.write_text(canonical_json(manifest), encoding="utf-8")
    return path
