"""Long-time statistics: time-averaged empirical laws of scalar functionals,
two-start coupling, 1-D Wasserstein distances and a fractional Sobolev proxy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (ComparisonError, DivergenceError, DomainError, InsufficientDataError,
                     PreconditionError, StabilityError)
from .model import ModelSpec
from .solver import SolverConfig, _as_rows, _integrate, auto_dt, time_grid
from .torus import Field


def _l1(U):
    return np.abs(U).mean(axis=-1)


def _l2(U):
    return np.sqrt(np.square(U).mean(axis=-1))


def _mode1(U):
    n = U.shape[-1]
    return 2.0 * np.abs(np.fft.rfft(U, axis=-1)[..., 1]) / n


def _linf(U):
    return np.abs(U).max(axis=-1)


FUNCTIONALS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "L1_norm": _l1,
    "L2_norm": _l2,
    "mode_1_amplitude": _mode1,
    "Linf_norm": _linf,
}


def _functional(name: str):
    try:
        return FUNCTIONALS[name]
    except KeyError:
        raise DomainError(f"unknown functional {name!r}; choose from {sorted(FUNCTIONALS)}") from None


@dataclass
class LongRun:
    """Samples of a long run taken every ``stride`` after ``burn_in``.

    ``functionals`` holds one value per sample; ``states`` keeps every
    ``keep_every``-th sampled state.
    """

    times: np.ndarray
    functionals: dict
    state_times: np.ndarray
    states: np.ndarray = field(repr=False)
    dt: float = 0.0
    complete: bool = True
    message: str = ""

    def __len__(self):
        return len(self.times)

    def fields(self) -> list:
        from .torus import make_grid

        if self.states.size == 0:
            return []
        g = make_grid(self.states.shape[-1])
        return [Field(g, s) for s in self.states]

    def measure(self, functional: str, t_start: float = -math.inf, t_end: float = math.inf
                ) -> "EmpiricalMeasure":
        sel = (self.times >= t_start) & (self.times <= t_end)
        lo = float(self.times[sel][0]) if sel.any() else t_start
        hi = float(self.times[sel][-1]) if sel.any() else t_end
        return empirical_measure(self.functionals[functional][sel], functional, (lo, hi))


def simulate_long(u0: Field, model: ModelSpec, config: SolverConfig, T: float,
                  burn_in: Optional[float] = None, stride: float = 0.5, path_id: int = 0,
                  keep_every: int = 1) -> LongRun:
    """Long single-path run sampled every ``stride`` for ``burn_in < t <= T``.

    The time step is ``stride / m`` for the smallest integer ``m`` keeping it
    below the stability step, so samples fall exactly on multiples of ``stride``.
    """
    nz = model.noise
    if nz.kind != "additive" or (nz.K > 0 and not nz.cancellation):
        raise PreconditionError("long runs need additive noise with zero-mean profiles")
    if not model.alpha.alpha < 0.5:
        raise PreconditionError("long runs need alpha in (0, 1/2)")
    if abs(u0.mean()) > 1e-12:
        raise PreconditionError(f"initial data must have zero mean, got {u0.mean():.3e}")
    burn_in = T / 10 if burn_in is None else float(burn_in)
    if not (0 <= burn_in <= T and stride > 0):
        raise DomainError("need 0 <= burn_in <= T and stride > 0")
    rows = _as_rows(u0, config.grid_n)
    cfg = replace(config, t_end=T)
    dt_max = config.dt if config.dt is not None else auto_dt(rows, model, cfg)
    m = max(1, math.ceil(stride / dt_max - 1e-9))
    n_steps = max(1, math.ceil(T * m / stride - 1e-9)) if T > 0 else 0
    dt = T / n_steps if n_steps else stride / m

    names = list(FUNCTIONALS)
    times, vals, st_t, st_v = [], {k: [] for k in names}, [], []
    eps = 1e-9 * dt

    def sink(step, U):
        t = step * dt
        if step % m or t <= burn_in + eps:
            return
        if times and times[-1] == t:
            return
        times.append(t)
        for k in names:
            vals[k].append(float(FUNCTIONALS[k](U[0])))
        if (len(times) - 1) % keep_every == 0:
            st_t.append(t)
            st_v.append(U[0].copy())

    complete, msg = True, ""
    try:
        if n_steps:
            _integrate(rows, model, replace(cfg, dt=dt), dt, n_steps, [path_id], m, sink)
    except (DivergenceError, StabilityError) as e:
        complete, msg = False, f"aborted: {e}"
    n = config.grid_n
    return LongRun(times=np.asarray(times), functionals={k: np.asarray(v) for k, v in vals.items()},
                   state_times=np.asarray(st_t),
                   states=np.asarray(st_v) if st_v else np.zeros((0, n)),
                   dt=dt, complete=complete, message=msg)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniformly weighted samples of one scalar functional."""

    functional_name: str
    samples: np.ndarray = field(repr=False)
    t_window: tuple = (math.nan, math.nan)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    def __len__(self):
        return len(self.samples)


def empirical_measure(samples, functional: str, t_window: tuple = (math.nan, math.nan)
                      ) -> EmpiricalMeasure:
    """Empirical law of ``functional``.

    ``samples`` may be a sequence of Fields or state arrays (the functional is
    applied) or a 1-D array of already evaluated values.
    """
    fn = _functional(functional)
    if isinstance(samples, np.ndarray) and samples.ndim == 1:
        vals = samples.astype(np.float64)
    else:
        states = [s.values if isinstance(s, Field) else np.asarray(s, dtype=np.float64) for s in samples]
        vals = np.array([float(fn(s)) for s in states])
    if vals.size == 0:
        raise InsufficientDataError("empirical measure needs at least one sample")
    if not np.all(np.isfinite(vals)):
        raise DomainError("samples must be finite")
    return EmpiricalMeasure(functional, vals, tuple(t_window))


def w1_distance(m1: EmpiricalMeasure, m2: EmpiricalMeasure) -> float:
    """Exact 1-D Wasserstein-1 distance: L1 distance of the quantile functions."""
    if m1.functional_name != m2.functional_name:
        raise ComparisonError(f"cannot compare {m1.functional_name} with {m2.functional_name}")
    a, b = np.sort(m1.samples), np.sort(m2.samples)
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    ca = np.arange(1, a.size + 1) / a.size
    cb = np.arange(1, b.size + 1) / b.size
    t = np.unique(np.concatenate([[0.0], ca, cb]))
    mid = 0.5 * (t[1:] + t[:-1])
    qa = a[np.minimum(np.searchsorted(ca, mid), a.size - 1)]
    qb = b[np.minimum(np.searchsorted(cb, mid), b.size - 1)]
    return float(np.sum(np.diff(t) * np.abs(qa - qb)))


def batch_stderr(samples, n_batches: int = 10) -> float:
    """Standard error of the mean of a correlated series from batch means."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2 * n_batches:
        raise InsufficientDataError(f"need at least {2 * n_batches} samples for {n_batches} batches")
    size = x.size // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass(frozen=True)
class WindowComparison:
    w1: float
    stderr: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.w1 <= self.tolerance


def compare_measures(m1: EmpiricalMeasure, m2: EmpiricalMeasure, n_batches: int = 10,
                     factor: float = 3.0) -> WindowComparison:
    """W1 between two windows against ``factor`` times the between-window stderr."""
    se = math.hypot(batch_stderr(m1.samples, n_batches), batch_stderr(m2.samples, n_batches))
    return WindowComparison(w1_distance(m1, m2), se, factor * se)


@dataclass
class CouplingSeries:
    times: np.ndarray
    distance: np.ndarray

    @property
    def terminal(self) -> float:
        return float(self.distance[-1])

    @property
    def initial(self) -> float:
        return float(self.distance[0])


def two_start_coupling(u0_a: Field, u0_b: Field, model: ModelSpec, config: SolverConfig, T: float,
                       path_id: int = 0) -> CouplingSeries:
    """``t -> ||u_a(t) - u_b(t)||_1`` for two starts sharing one noise path.

    Sampled every ``config.sample_stride`` steps; only distances are stored.
    """
    if abs(u0_a.mean() - u0_b.mean()) > 1e-12:
        raise PreconditionError(
            f"initial means differ ({u0_a.mean():.6g} vs {u0_b.mean():.6g}); the mean is conserved, "
            "so the distance cannot decay below their gap")
    rows = np.concatenate([_as_rows(u0_a, config.grid_n), _as_rows(u0_b, config.grid_n)])
    cfg = replace(config, t_end=T)
    dt, n_steps = time_grid(rows, model, cfg)
    ts, ds = [], []

    def sink(step, U):
        if ts and ts[-1] == step * dt:
            return
        ts.append(step * dt)
        ds.append(float(np.abs(U[0] - U[1]).mean()))

    _integrate(rows, model, replace(cfg, dt=dt), dt, n_steps, [path_id, path_id],
               int(config.sample_stride), sink)
    return CouplingSeries(np.asarray(ts), np.asarray(ds))


@dataclass
class SobolevTrack:
    times: np.ndarray
    values: np.ndarray
    r: float
    q: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def running_mean(self) -> np.ndarray:
        return np.cumsum(self.values) / np.arange(1, len(self.values) + 1)


def fractional_norm(values: np.ndarray, r: float, q: float = 2.0, full: bool = False) -> float:
    """Discrete ``W^{r,q}`` seminorm (or full norm with ``full=True``) on the unit torus.

    ``q = 2``: ``(sum_k (2 pi |k|)^{2r} |u_k|^2)^{1/2}`` over normalised Fourier
    coefficients, with ``1 + (2 pi |k|)^{2r}`` for the full norm.  Otherwise the
    Slobodeckij double sum ``(sum_{i != j} |u_i - u_j|^q / d_ij^{1 + r q} dx^2)^{1/q}``
    with periodic distance ``d_ij``.
    """
    if not 0 < r < 1:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    if q < 1:
        raise DomainError("q must be at least 1")
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if q == 2:
        c = np.fft.rfft(v) / n
        k = np.arange(c.size, dtype=np.float64)
        w = (2 * np.pi * k) ** (2 * r) + (1.0 if full else 0.0)
        mult = np.full(c.size, 2.0)
        mult[0] = 1.0
        if n % 2 == 0:
            mult[-1] = 1.0
        return float(np.sqrt(np.sum(mult * w * np.abs(c) ** 2)))
    shifts = np.arange(1, n)
    d = np.minimum(shifts, n - shifts) / n
    acc = 0.0
    for s, dist in zip(shifts, d):
        acc += np.sum(np.abs(v - np.roll(v, -s)) ** q) / dist ** (1 + r * q)
    semi = (acc / n / n) ** (1 / q)
    if full:
        return float((semi**q + np.mean(np.abs(v) ** q)) ** (1 / q))
    return float(semi)


def sobolev_norm_track(samples, r: float, q: float = 2.0, full: bool = False,
                       times: Optional[Sequence[float]] = None) -> SobolevTrack:
    """Fractional Sobolev norm of each sample and its time average."""
    if not 0 < r < 1:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    if isinstance(samples, LongRun):
        times = samples.state_times if times is None else times
        samples = samples.states
    arrs = [s.values if isinstance(s, Field) else np.asarray(s) for s in samples]
    if not arrs:
        raise InsufficientDataError("no samples")
    vals = np.array([fractional_norm(a, r, q, full) for a in arrs])
    t = np.arange(len(arrs), dtype=float) if times is None else np.asarray(times, dtype=float)
    return SobolevTrack(t, vals, r, q)
