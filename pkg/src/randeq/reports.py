"""Deterministic JSON reports and CSV companions.

A report is canonical JSON (sorted keys, fixed float formatting) so that
identical inputs give identical bytes.  The only field that varies between
runs is ``timestamp``, which is excluded from :func:`content_hash`.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

__all__ = ["sanitize", "canonical_json", "config_hash", "content_hash", "make_report", "write_report",
           "write_csv", "read_report"]

TOOL = "randeq"


def sanitize(obj):
    """Convert numpy values and tuples to plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(sanitize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def content_hash(report: dict) -> str:
    """Hash of a report with the timestamp removed."""
    body = {k: v for k, v in report.items() if k != "timestamp"}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


def make_report(check: str, seed, spec_id: str, verdict: str, result: dict, config: dict,
                version: str) -> dict:
    return {
        "tool": TOOL,
        "version": version,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config_hash": config_hash(config),
        "spec": spec_id,
        "seed": seed,
        "check": check,
        "verdict": verdict,
        "result": sanitize(result),
    }


def write_report(report: dict, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    seed = report["seed"]
    tag = f"seed{seed}" if isinstance(seed, int) else str(seed)
    path = directory / f"{report['check']}-{tag}.json"
    path.write_text(canonical_json(report))
    return path


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def write_csv(path, header, rows) -> Path:
    """Rows of numbers written with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])
    return path
