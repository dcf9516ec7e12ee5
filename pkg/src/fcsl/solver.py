"""Time stepping for the viscous stochastic fractional conservation law.

One step (Lie splitting) of size ``dt``:

1. explicit conservative Engquist-Osher flux difference and explicit
   spectral ``(-Delta)^alpha A(u)``;
2. implicit viscous solve ``(1 - dt tau Delta)^(-1)``;
3. Euler-Maruyama noise ``sum_k h_k(x, u^n) dW_k`` evaluated at the old state.

Steps 1-2 form a monotone, conservative map whenever

    dt * (max|F'| / dx + D_alpha * Lip(A) + 2 tau / dx^2) <= cfl_safety

where ``D_alpha`` is the diagonal of the discrete fractional operator.  The
bound is checked before every step.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DivergenceError, ShapeError, StabilityError
from .model import ModelSpec, apply_noise
from .operators import apply_frac, frac_diagonal, heat_resolvent_symbol
from .rng import PathStream
from .torus import Field, TorusGrid, make_grid

log = logging.getLogger(__name__)

DIVERGENCE_CAP = 1e6
NOISE_BLOCK = 256
CHUNK_ROWS = 8


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation parameters.

    ``dt=None`` selects the step automatically from the stability bound with
    a margin for noise growth (see :func:`auto_dt`).  The effective step is
    ``t_end / n_steps`` with ``n_steps = ceil(t_end / dt)``, so the final
    sample lands exactly on ``t_end``.
    """

    grid_n: int = 128
    dt: Optional[float] = None
    t_end: float = 1.0
    tau: float = 0.0
    cfl_safety: float = 0.9
    sample_stride: int = 1
    seed: int = 0
    viscous_operator: str = "fd"

    def __post_init__(self):
        make_grid(self.grid_n)
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigurationError(f"t_end must be non-negative, got {self.t_end}")
        if not self.tau >= 0:
            raise ConfigurationError(f"tau must be non-negative, got {self.tau}")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if int(self.sample_stride) < 1:
            raise ConfigurationError("sample_stride must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if self.viscous_operator not in ("fd", "spectral"):
            raise ConfigurationError("viscous_operator must be 'fd' or 'spectral'")

    @property
    def grid(self) -> TorusGrid:
        return make_grid(self.grid_n)


def stability_rate(model: ModelSpec, n: int, tau: float, lo: float, hi: float) -> float:
    """Left side of the stability bound divided by ``dt``."""
    dx = 1.0 / n
    rate = model.flux.max_speed(lo, hi) / dx
    if not model.diffusion.is_zero:
        rate += frac_diagonal(n, model.alpha.alpha) * model.diffusion.lipschitz_const
    return rate + 2.0 * tau / (dx * dx)


def noise_scale(model: ModelSpec, u_bound: float, t_end: float) -> float:
    """Typical noise excursion ``sqrt(min(t_end, 1) * max_x H^2(x, u_bound))``."""
    nz = model.noise
    if nz.is_zero:
        return 0.0
    x = (np.arange(256) + 0.5) / 256
    h2 = float(np.max(nz.H2(x, np.full_like(x, u_bound))))
    return math.sqrt(min(t_end, 1.0) * h2)


def auto_dt(u0: np.ndarray, model: ModelSpec, config: SolverConfig) -> float:
    """Largest admissible step for data bounded by ``||u0||_inf + 3 * noise_scale``."""
    m = float(np.max(np.abs(u0))) if np.size(u0) else 0.0
    bound = m + 3.0 * noise_scale(model, m + 1.0, config.t_end)
    rate = stability_rate(model, config.grid_n, config.tau, -bound, bound)
    if rate == 0.0:
        return config.t_end if config.t_end > 0 else 1.0
    return config.cfl_safety / rate


def time_grid(u0: np.ndarray, model: ModelSpec, config: SolverConfig) -> tuple[float, int]:
    """Effective ``(dt, n_steps)`` covering ``[0, t_end]`` exactly."""
    if config.t_end == 0:
        return (config.dt or 0.0), 0
    dt = config.dt if config.dt is not None else auto_dt(u0, model, config)
    n_steps = max(1, math.ceil(config.t_end / dt - 1e-9))
    return config.t_end / n_steps, n_steps


# --- the step -----------------------------------------------------------------


class _Stepper:
    """Pre-computed operators for repeated steps at fixed ``(n, dt)``."""

    def __init__(self, model: ModelSpec, n: int, dt: float, tau: float, cfl_safety: float,
                 viscous_operator: str = "fd"):
        self.model = model
        self.n = n
        self.dx = 1.0 / n
        self.dt = dt
        self.tau = tau
        self.cfl_safety = cfl_safety
        self.lam = dt / self.dx
        self.alpha = model.alpha.alpha
        self.resolvent = heat_resolvent_symbol(n, dt * tau, viscous_operator) if tau > 0 else None
        self.coeffs = model.noise.discretize(make_grid(n))

    def check(self, U: np.ndarray, step: int):
        lo, hi = float(U.min()), float(U.max())
        rate = stability_rate(self.model, self.n, self.tau, lo, hi)
        if self.dt * rate > self.cfl_safety * (1.0 + 1e-12):
            raise StabilityError(
                f"step {step}: dt={self.dt:.6g} violates the stability bound "
                f"(dt*rate={self.dt * rate:.4g} > {self.cfl_safety}) for data in [{lo:.4g}, {hi:.4g}]",
                step=step,
            )

    def deterministic(self, U: np.ndarray) -> np.ndarray:
        """Monotone conservative sub-step (flux, fractional term, viscous solve)."""
        m = self.model
        G = m.flux.numerical_flux(U, np.roll(U, -1, axis=-1))
        out = U - self.lam * (G - np.roll(G, 1, axis=-1))
        if not m.diffusion.is_zero:
            out = out - self.dt * apply_frac(m.diffusion.A(U), self.alpha)
        if self.resolvent is not None:
            out = np.fft.irfft(np.fft.rfft(out, axis=-1) * self.resolvent, self.n, axis=-1)
        return out

    def __call__(self, U: np.ndarray, dW: Optional[np.ndarray], step: int = 0) -> np.ndarray:
        self.check(U, step)
        out = self.deterministic(U)
        if dW is not None and self.model.noise.K > 0:
            out = out + apply_noise(self.model.noise, self.coeffs, U, dW)
        bad = ~np.isfinite(out) | (np.abs(out) > DIVERGENCE_CAP)
        if bad.any():
            raise DivergenceError(f"divergence at step {step + 1}: non-finite or |u| > {DIVERGENCE_CAP:g}",
                                  step=step + 1)
        return out


def step(u: Field, model: ModelSpec, config: SolverConfig, dW) -> Field:
    """Advance one step of size ``config.dt`` with mode increments ``dW`` (``None`` for none)."""
    if config.dt is None:
        raise ConfigurationError("step() needs an explicit dt")
    if u.grid.n != config.grid_n:
        raise ShapeError(f"field has {u.grid.n} cells, config expects {config.grid_n}")
    dW = None if dW is None else np.asarray(dW, dtype=np.float64).reshape(model.noise.K)
    st = _Stepper(model, config.grid_n, config.dt, config.tau, config.cfl_safety, config.viscous_operator)
    return Field(u.grid, st(u.values, dW))


# --- batched integration --------------------------------------------------------


def _integrate(U0: np.ndarray, model: ModelSpec, config: SolverConfig, dt: float, n_steps: int,
               path_ids: Sequence[int], sample_every: int,
               sink: Callable[[int, np.ndarray], None],
               record_noise: bool = False, noise_record: Optional[np.ndarray] = None):
    """Advance a batch of rows; rows with equal path id share their noise.

    ``sink(step, U)`` is called at every multiple of ``sample_every`` and at
    the final step.  Returns the recorded increments, shape ``(rows, n_steps, K)``,
    when ``record_noise`` is set.
    """
    U = np.array(U0, dtype=np.float64, copy=True)
    rows, n = U.shape
    K = model.noise.K
    st = _Stepper(model, n, dt, config.tau, config.cfl_safety, config.viscous_operator)
    streams = {pid: PathStream(config.seed, pid) for pid in dict.fromkeys(path_ids)}
    rec = np.empty((rows, n_steps, K)) if record_noise else None
    sqdt = math.sqrt(dt) if dt > 0 else 0.0
    sink(0, U)
    s = 0
    while s < n_steps:
        b = min(NOISE_BLOCK, n_steps - s)
        if noise_record is not None:
            block = noise_record[:, s:s + b, :]
        elif K:
            per = {pid: sqdt * st_.block(s, b, K) for pid, st_ in streams.items()}
            block = np.stack([per[pid] for pid in path_ids])
        else:
            block = None
        if rec is not None and block is not None:
            rec[:, s:s + b, :] = block
        for j in range(b):
            try:
                U = st(U, None if block is None else block[:, j, :], s + j)
            except DivergenceError as e:
                e.partial = U
                raise
            if (s + j + 1) % sample_every == 0 or s + j + 1 == n_steps:
                sink(s + j + 1, U)
        s += b
    return rec


class _Collector:
    def __init__(self):
        self.steps, self.values = [], []

    def __call__(self, step_idx, U):
        if self.steps and self.steps[-1] == step_idx:
            return
        self.steps.append(step_idx)
        self.values.append(U.copy())


@dataclass
class Trajectory:
    """Sampled path of one solution plus the increments that drove it."""

    times: np.ndarray
    values: np.ndarray = field(repr=False)
    steps: np.ndarray = field(repr=False)
    noise_record: Optional[np.ndarray] = field(repr=False)
    config: SolverConfig = None
    model: ModelSpec = field(default=None, repr=False)
    path_id: int = 0

    @property
    def grid(self) -> TorusGrid:
        return make_grid(self.values.shape[-1])

    @property
    def states(self) -> list:
        g = self.grid
        return [Field(g, v) for v in self.values]

    @property
    def dt(self) -> float:
        return float(self.config.dt)

    @property
    def final(self) -> Field:
        return Field(self.grid, self.values[-1])


def _as_rows(u0, n: int) -> np.ndarray:
    if isinstance(u0, Field):
        v = u0.values[None]
    else:
        v = np.atleast_2d(np.asarray([x.values if isinstance(x, Field) else x for x in u0]
                                     if isinstance(u0, (list, tuple)) else u0, dtype=np.float64))
    if v.shape[-1] != n:
        raise ShapeError(f"initial data has {v.shape[-1]} cells, config expects {n}")
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("initial data must be finite")
    return v


def _trajectories(U0, model, config, path_ids, record_noise=True):
    dt, n_steps = time_grid(U0, model, config)
    col = _Collector()
    rec = _integrate(U0, model, config, dt, n_steps, path_ids, int(config.sample_stride), col,
                     record_noise=record_noise)
    resolved = replace(config, dt=dt) if dt > 0 else config
    steps = np.asarray(col.steps)
    vals = np.stack(col.values, axis=1)
    out = []
    for r, pid in enumerate(path_ids):
        out.append(Trajectory(times=steps * dt, values=vals[r], steps=steps,
                              noise_record=None if rec is None else rec[r],
                              config=resolved, model=model, path_id=pid))
    return out


def evolve(u0: Field, model: ModelSpec, config: SolverConfig, path_id: int = 0) -> Trajectory:
    """Single path from ``u0`` driven by stream ``(config.seed, path_id)``."""
    U0 = _as_rows(u0, config.grid_n)
    return _trajectories(U0, model, config, [path_id])[0]


def evolve_pair(u0_a: Field, u0_b: Field, model: ModelSpec, config: SolverConfig,
                path_id: int = 0) -> tuple[Trajectory, Trajectory]:
    """Two paths driven by identical noise increments."""
    U0 = np.concatenate([_as_rows(u0_a, config.grid_n), _as_rows(u0_b, config.grid_n)])
    dt, _ = time_grid(U0, model, config)
    cfg = replace(config, dt=dt) if config.t_end > 0 else config
    a, b = _trajectories(U0, model, cfg, [path_id, path_id])
    return a, b


def replay(traj: Trajectory) -> np.ndarray:
    """Re-run a trajectory from its first state and recorded increments.

    Returns the sampled states; they equal ``traj.values`` bit for bit.
    """
    cfg = traj.config
    n_steps = int(traj.steps[-1])
    col = _Collector()
    rec = None
    if traj.model.noise.K:
        if traj.noise_record is None:
            raise ConfigurationError("trajectory has no noise record")
        rec = traj.noise_record[None]
    _integrate(traj.values[:1], traj.model, cfg, cfg.dt or 0.0, n_steps, [traj.path_id],
               int(cfg.sample_stride), col, noise_record=rec)
    return np.stack(col.values, axis=1)[0]


# --- ensembles ----------------------------------------------------------------


@dataclass
class Ensemble:
    """Sampled states of many rows: ``values[row, sample, cell]``."""

    times: np.ndarray
    values: np.ndarray = field(repr=False)
    path_ids: tuple
    dt: float
    noise: Optional[np.ndarray] = field(default=None, repr=False)


def run_rows(U0: np.ndarray, model: ModelSpec, config: SolverConfig, path_ids: Sequence[int],
             threads: int = 1, record_noise: bool = False, dt_steps: Optional[tuple] = None) -> Ensemble:
    """Integrate rows in fixed-size chunks, optionally on several threads.

    Chunk boundaries depend only on the row count, so results are identical
    for every thread count.  Rows sharing a path id share noise.
    """
    U0 = np.asarray(U0, dtype=np.float64)
    if len(path_ids) != U0.shape[0]:
        raise ShapeError("one path id per row is required")
    dt, n_steps = dt_steps if dt_steps is not None else time_grid(U0, model, config)
    chunks = [slice(i, min(i + CHUNK_ROWS, U0.shape[0])) for i in range(0, U0.shape[0], CHUNK_ROWS)]

    def work(sl):
        col = _Collector()
        rec = _integrate(U0[sl], model, config, dt, n_steps, list(path_ids[sl]),
                         int(config.sample_stride), col, record_noise=record_noise)
        return col.steps, np.stack(col.values, axis=1), rec

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    steps = np.asarray(parts[0][0])
    values = np.concatenate([p[1] for p in parts], axis=0)
    noise = np.concatenate([p[2] for p in parts], axis=0) if record_noise else None
    return Ensemble(times=steps * dt, values=values, path_ids=tuple(path_ids), dt=dt, noise=noise)


def evolve_ensemble(u0, model: ModelSpec, config: SolverConfig, n_paths: int,
                    threads: int = 1, first_path: int = 0) -> Ensemble:
    """``n_paths`` independent paths from the same initial state."""
    U0 = np.repeat(_as_rows(u0, config.grid_n)[:1], n_paths, axis=0)
    return run_rows(U0, model, config, list(range(first_path, first_path + n_paths)), threads)


def evolve_pairs(u0_a, u0_b, model: ModelSpec, config: SolverConfig, n_paths: int,
                 threads: int = 1, first_path: int = 0) -> tuple[Ensemble, Ensemble]:
    """``n_paths`` coupled pairs; pair ``p`` shares stream ``first_path + p``."""
    a = _as_rows(u0_a, config.grid_n)[0]
    b = _as_rows(u0_b, config.grid_n)[0]
    U0 = np.empty((2 * n_paths, config.grid_n))
    U0[0::2], U0[1::2] = a, b
    ids = [first_path + p for p in range(n_paths) for _ in (0, 1)]
    ens = run_rows(U0, model, config, ids, threads)
    ea = Ensemble(ens.times, ens.values[0::2], tuple(ids[0::2]), ens.dt)
    eb = Ensemble(ens.times, ens.values[1::2], tuple(ids[1::2]), ens.dt)
    return ea, eb
