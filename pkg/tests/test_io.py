import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fcsl.errors import CorruptionError, VersionError
from fcsl.io import (fmt, parse_snapshot, read_csv, read_snapshot, snapshot_bytes, write_csv,
                     write_snapshot)


@given(arrays(np.float64, st.integers(1, 64), elements=st.floats(allow_nan=False)),
       st.floats(0, 1e6), st.integers(0, 2**64 - 1), st.integers(0, 2**40))
def test_round_trip_bit_exact(v, t, seed, step):
    snap = parse_snapshot(snapshot_bytes(v, t, seed, step))
    assert snap.values.tobytes() == v.astype("<f8").tobytes()
    assert (snap.n, snap.time, snap.seed, snap.step) == (v.size, t, seed, step)


def test_file_round_trip(tmp_path):
    v = np.random.default_rng(0).normal(size=16)
    p = write_snapshot(v, tmp_path / "s.fcsl", time=0.5, seed=3, step=9)
    assert read_snapshot(p).values.tolist() == v.tolist()
    assert p.stat().st_size == 4 + 2 + 4 + 8 + 8 + 8 + 16 * 8 + 4


def test_truncated_and_flipped():
    data = snapshot_bytes(np.arange(8.0), 1.0, 0, 0)
    with pytest.raises(CorruptionError):
        parse_snapshot(data[:-3])
    for pos in (0, 7, 40, len(data) - 1):
        bad = bytearray(data)
        bad[pos] ^= 0x10
        with pytest.raises(CorruptionError):
            parse_snapshot(bytes(bad))


def test_unknown_version():
    body = struct.pack("<4sHIdQQ", b"FCSL", 9, 1, 0.0, 0, 0) + struct.pack("<d", 1.0)
    data = body + struct.pack("<I", zlib.crc32(body))
    with pytest.raises(VersionError):
        parse_snapshot(data)


def test_csv_formatting(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["a", "b", "c"], [[0.1, 3, True], [np.float64(1e-300), np.int64(2), "x"]])
    header, rows = read_csv(p)
    assert header == ["a", "b", "c"]
    assert rows[0] == ["0.10000000000000001", "3", "1"]
    assert float(rows[1][0]) == 1e-300
    assert fmt(2.5) == "2.5"
