"""Binary snapshots and CSV output.

Snapshot layout (little-endian)::

    b"FCSL" | u16 version | u32 n | f64 time | u64 seed | u64 step | n * f64 | u32 crc32

The CRC covers every preceding byte.
"""

from __future__ import annotations

import csv
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptionError, VersionError

MAGIC = b"FCSL"
VERSION = 1
_HEADER = struct.Struct("<4sHIdQQ")
_CRC = struct.Struct("<I")


@dataclass(frozen=True)
class Snapshot:
    n: int
    time: float
    seed: int
    step: int
    values: np.ndarray = field(repr=False)
    version: int = VERSION


def snapshot_bytes(values, time: float, seed: int, step: int) -> bytes:
    v = np.ascontiguousarray(values, dtype="<f8")
    body = _HEADER.pack(MAGIC, VERSION, v.size, float(time), int(seed), int(step)) + v.tobytes()
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def write_snapshot(values, path, time: float = 0.0, seed: int = 0, step: int = 0) -> Path:
    """Write one state; ``values`` may be a Field or an array."""
    v = getattr(values, "values", values)
    path = Path(path)
    path.write_bytes(snapshot_bytes(v, time, seed, step))
    return path


def parse_snapshot(data: bytes) -> Snapshot:
    if len(data) < _HEADER.size + _CRC.size:
        raise CorruptionError(f"snapshot truncated ({len(data)} bytes)")
    magic, version, n, time, seed, step = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptionError("bad magic bytes")
    expected = _HEADER.size + 8 * n + _CRC.size
    if len(data) != expected:
        raise CorruptionError(f"snapshot length {len(data)} does not match {expected} for n={n}")
    (crc,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(data[: -_CRC.size]) & 0xFFFFFFFF != crc:
        raise CorruptionError("CRC mismatch")
    if version != VERSION:
        raise VersionError(f"unknown snapshot version {version}")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=_HEADER.size).astype(np.float64)
    return Snapshot(n, time, seed, step, values, version)


def read_snapshot(path) -> Snapshot:
    return parse_snapshot(Path(path).read_bytes())


def fmt(x) -> str:
    """Locale-independent full-precision text for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
