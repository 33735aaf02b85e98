"""Field file format: one JSON header line + CSV body of node values.

The header records {version, n, h, R, exterior: {kind, params}, sup_norm};
the body holds the node values row-major (one CSV record per first-axis
index in 2D, a single record in 1D).  Values are written with shortest
round-trip precision, so export/import is an exact identity.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .closures import closure_kinds, make_closure
from .errors import FieldFormatError, ValidationError
from .fields import ScalarField

FORMAT_VERSION = "1.0"


def export_field(u: ScalarField, path, config_hash: str | None = None) -> None:
    """Write a field; the exterior closure must be a registry kind."""
    if u.exterior.kind not in closure_kinds():
        raise ValidationError(
            f"closure kind {u.exterior.kind!r} is not serializable; registry kinds: "
            f"{', '.join(closure_kinds())}"
        )
    header = {
        "version": FORMAT_VERSION,
        "n": u.dimension,
        "h": u.h,
        "R": u.box_radius,
        "exterior": u.exterior.descriptor(),
        "sup_norm": u.sup_norm,
    }
    if config_hash is not None:
        header["config_hash"] = config_hash
    buf = io.StringIO()
    buf.write(json.dumps(header, sort_keys=True) + "\r\n")
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
    rows = u.values[None, :] if u.dimension == 1 else u.values
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def import_field(path) -> ScalarField:
    """Read a field written by :func:`export_field`; exact round trip.

    Raises :class:`FieldFormatError` with the offending line number on any
    malformed content, including a major-version mismatch and a stored
    sup_norm that does not reproduce exactly.
    """
    with open(path, "r", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FieldFormatError("empty field file", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FieldFormatError(f"header is not valid JSON: {exc}", line=1) from exc
    for key in ("version", "n", "h", "R", "exterior", "sup_norm"):
        if key not in header:
            raise FieldFormatError(f"header is missing {key!r}", line=1)
    major = str(header["version"]).split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise FieldFormatError(
            f"unsupported major version {header['version']!r} (expected {FORMAT_VERSION})",
            line=1,
        )
    n = int(header["n"])
    h = float(header["h"])
    R = float(header["R"])
    m = int(round(2 * R / h)) + 1

    body = list(csv.reader(lines[1:]))
    expect_rows = 1 if n == 1 else m
    if len(body) != expect_rows:
        raise FieldFormatError(
            f"expected {expect_rows} value rows, found {len(body)}", line=2 + len(body)
        )
    values = np.empty((expect_rows, m))
    for i, row in enumerate(body):
        if len(row) != m:
            raise FieldFormatError(f"expected {m} values per row, found {len(row)}", line=2 + i)
        try:
            values[i] = [float(v) for v in row]
        except ValueError as exc:
            raise FieldFormatError(f"non-numeric value: {exc}", line=2 + i) from exc
    vals = values[0] if n == 1 else values

    try:
        exterior = make_closure(header["exterior"])
    except ValidationError as exc:
        raise FieldFormatError(f"bad exterior descriptor: {exc}", line=1) from exc

    recomputed = max(float(np.max(np.abs(vals))), exterior.bound)
    stored = float(header["sup_norm"])
    if stored < recomputed:
        raise FieldFormatError(
            f"stored sup_norm {stored!r} is below the recomputed floor {recomputed!r}",
            line=1,
        )
    return ScalarField(
        dimension=n, h=h, box_radius=R, values=vals, exterior=exterior, sup_norm=stored,
    )
