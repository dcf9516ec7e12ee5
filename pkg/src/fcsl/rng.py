"""Counter-based Gaussian streams.

Every normal draw is a pure function of ``(seed, path_id, counter)``, so a
path's noise never depends on how paths are scheduled across threads or how
many steps are generated at once.  The mixer is the SplitMix64 finaliser;
uniforms use the top 53 bits and are mapped through the inverse normal CDF.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, path_id: int) -> int:
    """64-bit key of the stream for ``(seed, path_id)``."""
    return _mix_int(_mix_int(int(seed) + _GOLDEN) ^ _mix_int(int(path_id) * _GOLDEN + 1))


def normals_at(key: int, counters: np.ndarray) -> np.ndarray:
    """Standard normals for an array of uint64 counters."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + (c + np.uint64(1)) * np.uint64(_GOLDEN)
        bits = _mix_array(z) >> np.uint64(11)
    u = (bits.astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


class PathStream:
    """Gaussian stream owned by one Monte Carlo path.

    Draw ``(step, mode)`` lives at counter ``step * n_modes + mode``.
    ``standard_normal`` reads sequentially from an internal cursor so the
    object can also stand in for a generator.
    """

    def __init__(self, seed: int, path_id: int = 0):
        self.seed = int(seed) & _MASK
        self.path_id = int(path_id)
        self.key = stream_key(self.seed, self.path_id)
        self._cursor = 0

    def block(self, first_step: int, n_steps: int, n_modes: int) -> np.ndarray:
        """Normals of shape ``(n_steps, n_modes)`` starting at ``first_step``."""
        if n_modes == 0 or n_steps == 0:
            return np.zeros((n_steps, n_modes))
        start = first_step * n_modes
        c = np.arange(start, start + n_steps * n_modes, dtype=np.uint64)
        return normals_at(self.key, c).reshape(n_steps, n_modes)

    def standard_normal(self, size=None):
        count = 1 if size is None else int(np.prod(size))
        c = np.arange(self._cursor, self._cursor + count, dtype=np.uint64)
        self._cursor += count
        out = normals_at(self.key, c)
        return float(out[0]) if size is None else out.reshape(size)
