"""Matrix and report serialization.

Matrices travel either as UTF-8 CSV (one row per observable, one column
per snapshot, 17 significant digits so doubles survive a round trip) or
as a small binary format: an 8-byte magic, two little-endian u64 for
rows and cols, then the payload as row-major little-endian f64. Binary
round trips are bit exact. Non-finite entries are rejected in both
directions with the offending position named.

Reports are canonical JSON: sorted keys, two-space indent, trailing
newline. Writing the same report twice yields identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, FileFormatError, ShapeError

__all__ = [
    "MATRIX_MAGIC",
    "REPORT_SCHEMA_VERSION",
    "write_matrix",
    "read_matrix",
    "write_report",
    "read_report",
]

MATRIX_MAGIC = b"QDMDMAT\x00"
REPORT_SCHEMA_VERSION = 1

_HEADER = struct.Struct("<QQ")


def _locate_nonfinite(mat: np.ndarray, path: str):
    bad = np.argwhere(~np.isfinite(mat))
    if bad.size:
        r, c = (int(v) for v in bad[0])
        raise FileFormatError(
            f"{path}: non-finite value at row {r}, column {c}",
            path=path, row=r, col=c)


def _validated(matrix, path: str) -> np.ndarray:
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] == 0 or mat.shape[1] == 0:
        raise ShapeError(f"matrix must be 2-D and non-empty, got shape {mat.shape}")
    _locate_nonfinite(mat, path)
    return mat


def _resolve_format(path: Path, fmt: str, default: str) -> str:
    if fmt not in ("auto", "csv", "binary"):
        raise ConfigError(f"format must be auto, csv or binary, got {fmt!r}")
    if fmt != "auto":
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else default


def write_matrix(path, matrix, fmt: str = "auto") -> None:
    """Write a matrix as CSV or binary; 'auto' picks CSV for .csv paths."""
    path = Path(path)
    mat = _validated(matrix, str(path))
    if _resolve_format(path, fmt, default="binary") == "csv":
        lines = [",".join(f"{v:.17g}" for v in row) for row in mat]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    rows, cols = mat.shape
    payload = mat.astype("<f8", copy=False).tobytes(order="C")
    path.write_bytes(MATRIX_MAGIC + _HEADER.pack(rows, cols) + payload)


def _read_csv(path: Path) -> np.ndarray:
    text = path.read_text(encoding="utf-8")
    rows: list[list[float]] = []
    width = None
    for i, line in enumerate(text.splitlines()):
        if line.strip() == "":
            continue
        fields = line.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise FileFormatError(
                f"{path}: row {len(rows)} has {len(fields)} fields, expected {width}",
                path=str(path), row=len(rows))
        parsed = []
        for j, field in enumerate(fields):
            try:
                parsed.append(float(field))
            except ValueError:
                raise FileFormatError(
                    f"{path}: cannot parse {field.strip()!r} at row {len(rows)}, "
                    f"column {j}", path=str(path), row=len(rows), col=j) from None
        rows.append(parsed)
    if not rows:
        raise FileFormatError(f"{path}: no data rows", path=str(path))
    return np.asarray(rows, dtype=float)


def _read_binary(path: Path, blob: bytes) -> np.ndarray:
    if len(blob) < len(MATRIX_MAGIC) + _HEADER.size:
        raise FileFormatError(f"{path}: truncated header", path=str(path))
    rows, cols = _HEADER.unpack_from(blob, len(MATRIX_MAGIC))
    if rows == 0 or cols == 0 or rows * cols > 1 << 40:
        raise FileFormatError(
            f"{path}: implausible dimensions {rows} x {cols}", path=str(path))
    expected = len(MATRIX_MAGIC) + _HEADER.size + 8 * rows * cols
    if len(blob) != expected:
        raise FileFormatError(
            f"{path}: payload is {len(blob)} bytes, expected {expected}",
            path=str(path))
    flat = np.frombuffer(blob, dtype="<f8", offset=len(MATRIX_MAGIC) + _HEADER.size)
    return flat.reshape(rows, cols).astype(float)


def read_matrix(path, fmt: str = "auto") -> np.ndarray:
    """Read a matrix file; 'auto' sniffs the binary magic, else parses CSV."""
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"{path}: no such file", path=str(path))
    if fmt == "auto":
        with path.open("rb") as fh:
            fmt = "binary" if fh.read(len(MATRIX_MAGIC)) == MATRIX_MAGIC else "csv"
    elif fmt not in ("csv", "binary"):
        raise ConfigError(f"format must be auto, csv or binary, got {fmt!r}")
    if fmt == "binary":
        blob = path.read_bytes()
        if blob[:len(MATRIX_MAGIC)] != MATRIX_MAGIC:
            raise FileFormatError(f"{path}: bad magic bytes", path=str(path))
        mat = _read_binary(path, blob)
    else:
        mat = _read_csv(path)
    _locate_nonfinite(mat, str(path))
    return mat


def write_report(path, report) -> None:
    """Serialize a report to canonical JSON (sorted keys, stable bytes)."""
    if hasattr(report, "to_dict"):
        report = report.to_dict()
    if not isinstance(report, dict):
        raise ConfigError("report must be a dict or expose to_dict()")
    if report.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ConfigError(
            f"report schema_version must be {REPORT_SCHEMA_VERSION}")
    try:
        text = json.dumps(report, sort_keys=True, indent=2, allow_nan=False)
    except ValueError as exc:
        raise ConfigError(f"report is not serializable: {exc}") from None
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_report(path) -> dict:
    """Load a report written by write_report, checking its schema version."""
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"{path}: no such file", path=str(path))
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON ({exc})", path=str(path)) from None
    if not isinstance(report, dict):
        raise FileFormatError(f"{path}: report must be a JSON object", path=str(path))
    version = report.get("schema_version")
    if version != REPORT_SCHEMA_VERSION:
        raise FileFormatError(
            f"{path}: unsupported schema_version {version!r}", path=str(path))
    return report
