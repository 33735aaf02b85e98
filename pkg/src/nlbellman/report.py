"""Artifact writers: CSV tables and JSON reports with provenance hashes.

Artifacts are deterministic: no timestamps, sorted JSON keys, shortest
round-trip float formatting, and the config hash embedded in every file
(as a leading ``# config_hash=`` line in CSVs, as a key in JSON).
"""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np


def fmt(value) -> str:
    """Shortest round-trip representation for floats; str() otherwise."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows, config_hash: str) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\r\n")
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_json(path, payload: dict, config_hash: str) -> None:
    doc = dict(payload)
    doc["config_hash"] = config_hash
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
