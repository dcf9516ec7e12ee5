"""Uniform periodic grid on the unit torus, fields, transforms and norms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, ShapeError

MIN_CELLS = 8
MAX_CELLS = 2**20


@dataclass(frozen=True)
class TorusGrid:
    """Grid of ``n`` equal cells on a torus of the given period.

    Cell ``i`` is centred at ``(i + 1/2) * dx``.
    """

    n: int
    length: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise ConfigurationError(f"grid size must be an integer, got {self.n!r}")
        if self.n % 2 or not MIN_CELLS <= self.n <= MAX_CELLS:
            raise ConfigurationError(
                f"grid size must be even and in [{MIN_CELLS}, {MAX_CELLS}], got {self.n}"
            )
        if self.length != 1.0:
            raise ConfigurationError("only the unit torus is supported")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        """Cell centres."""
        return (np.arange(self.n) + 0.5) * self.dx

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order, Nyquist stored as ``+n/2``."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        k[self.n // 2] = self.n // 2
        return k

    @property
    def rfft_wavenumbers(self) -> np.ndarray:
        """Non-negative wavenumbers ``0..n/2`` matching ``numpy.fft.rfft``."""
        return np.arange(self.n // 2 + 1, dtype=np.int64)


def make_grid(n: int) -> TorusGrid:
    """Return the unit-torus grid with ``n`` cells."""
    return TorusGrid(n)


@dataclass(frozen=True)
class Field:
    """Cell averages of a scalar on a :class:`TorusGrid`."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != (self.grid.n,):
            raise ShapeError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "Field":
        """Sample ``fn`` at the cell centres."""
        return cls(grid, np.broadcast_to(fn(grid.x), (grid.n,)))

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "Field":
        return cls(grid, np.full(grid.n, float(c)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __add__(self, other):
        if isinstance(other, Field):
            _same_grid(self, other)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, Field):
            _same_grid(self, other)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __mul__(self, c):
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__


def _same_grid(a: Field, b: Field):
    if a.grid.n != b.grid.n:
        raise ShapeError(f"grid mismatch: {a.grid.n} vs {b.grid.n}")


@dataclass(frozen=True)
class SpectralCoeffs:
    """Normalised DFT coefficients, ``c_k = (1/n) * sum_j u_j exp(-2 pi i k j / n)``.

    Stored in FFT order; ``grid.wavenumbers`` gives the matching ``k``.
    """

    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n,):
            raise ShapeError(f"expected {self.grid.n} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def at(self, k: int) -> complex:
        return complex(self.coeffs[int(k) % self.grid.n])


def forward_transform(f: Field) -> SpectralCoeffs:
    return SpectralCoeffs(f.grid, np.fft.fft(f.values) / f.grid.n)


def inverse_transform(c: SpectralCoeffs) -> Field:
    return Field(c.grid, np.fft.ifft(c.coeffs * c.grid.n).real)


def lp_norm(f: Field | np.ndarray, p: float) -> float:
    """Discrete L^p norm on the unit torus; ``p = inf`` gives the max norm."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    v = f.values if isinstance(f, Field) else np.asarray(f, dtype=np.float64)
    a = np.abs(v)
    if np.isinf(p):
        return float(a.max())
    dx = 1.0 / a.shape[-1]
    if p == 1:
        return float(a.sum() * dx)
    if p == 2:
        return float(np.sqrt(np.dot(a, a) * dx))
    m = a.max()
    if m == 0.0:
        return 0.0
    # scale first so large p does not overflow
    return float(m * (np.sum((a / m) ** p) * dx) ** (1.0 / p))
