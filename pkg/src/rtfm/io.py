"""File formats: the binary tensor-series container and audited CSV tables.

Binary container (magic ``RTFM1``)
----------------------------------
``RTFM1`` (5 bytes), then ``K``, ``p_1 .. p_K``, ``n`` as little-endian
unsigned 64-bit integers, then ``n * p`` IEEE-754 doubles (little-endian):
time-major, and within each time point the tensor entries in canonical
first-index-fastest order. Dimensions are written in 1-based mode order.

CSV tables
----------
Every emitted CSV starts with ``# rtfm-csv v1`` followed by ``#``-prefixed
audit lines echoing the command and resolved configuration, then a header row
and data rows. Readers reject unknown schema versions. Floats are written in
shortest round-trip form.
"""

from __future__ import annotations

import struct
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DataFormatError

MAGIC = b"RTFM1"
CSV_SCHEMA = "rtfm-csv v1"


def _flatten_time_major(series: np.ndarray) -> np.ndarray:
    n = series.shape[0]
    axes = (0,) + tuple(range(series.ndim - 1, 0, -1))
    return np.ascontiguousarray(series.transpose(axes)).reshape(n, -1)


def _unflatten_time_major(flat: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    n = flat.shape[0]
    shaped = flat.reshape((n,) + tuple(reversed(dims)))
    axes = (0,) + tuple(range(shaped.ndim - 1, 0, -1))
    return shaped.transpose(axes)


def write_tensor_series(path: str, series: np.ndarray) -> None:
    """Write a ``(n, p_1, ..., p_K)`` series to the binary container."""
    series = np.asarray(series, dtype=float)
    if series.ndim < 2:
        raise ValueError("series must have a time axis plus K >= 1 tensor axes")
    n, dims = series.shape[0], series.shape[1:]
    header = struct.pack(f"<{1 + len(dims) + 1}Q", len(dims), *dims, n)
    payload = _flatten_time_major(series).astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header)
        fh.write(payload)


def read_tensor_series(path: str) -> np.ndarray:
    """Read a binary container back into a ``(n, p_1, ..., p_K)`` array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise DataFormatError(f"{path}: bad magic, not a tensor-series file")
    offset = len(MAGIC)
    try:
        (order,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        if order < 1 or order > 16:
            raise DataFormatError(f"{path}: implausible tensor order {order}")
        dims = struct.unpack_from(f"<{order}Q", blob, offset)
        offset += 8 * order
        (n,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
    except struct.error as err:
        raise DataFormatError(f"{path}: truncated header") from err
    if n < 1 or min(dims) < 1:
        raise DataFormatError(f"{path}: invalid header (n={n}, dims={dims})")
    p = int(np.prod(np.asarray(dims, dtype=np.uint64)))
    expected = offset + 8 * n * p
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: payload length {len(blob) - offset} does not match header "
            f"({n} x {p} doubles)"
        )
    flat = np.frombuffer(blob, dtype="<f8", offset=offset).reshape(int(n), p)
    return _unflatten_time_major(flat.astype(float), [int(d) for d in dims])


def read_panel_csv(path: str) -> np.ndarray:
    """Read a plain ``n x p`` CSV panel (one header row, commas) as a K=1
    tensor series."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 2:
        raise DataFormatError(f"{path}: need a header row and at least one data row")
    width = len(lines[0].rstrip("\n").split(","))
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.rstrip("\n").split(",")
        if len(cells) != width:
            raise DataFormatError(f"{path}: row {lineno} has {len(cells)} cells, expected {width}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as err:
            raise DataFormatError(f"{path}: non-numeric cell in row {lineno}") from err
    return np.asarray(rows, dtype=float)


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(
    path: str, header: Sequence[str], rows: Iterable[Sequence], audit: Sequence[str] = ()
) -> None:
    """Write an audited CSV table (see module docstring for the layout)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        for line in audit:
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_render(v) for v in row) + "\n")


def read_csv(path: str) -> tuple[list[str], list[str], list[list[str]]]:
    """Read an audited CSV, returning (audit lines, header, string rows).

    Rejects files whose schema line is missing or unknown.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise DataFormatError(f"{path}: missing schema line")
    if lines[0][2:].strip() != CSV_SCHEMA:
        raise DataFormatError(f"{path}: unknown schema {lines[0][2:].strip()!r}")
    audit = []
    idx = 1
    while idx < len(lines) and lines[idx].startswith("#"):
        audit.append(lines[idx][1:].strip())
        idx += 1
    if idx >= len(lines):
        raise DataFormatError(f"{path}: no header row")
    header = lines[idx].split(",")
    rows = [line.split(",") for line in lines[idx + 1 :] if line]
    return audit, header, rows
