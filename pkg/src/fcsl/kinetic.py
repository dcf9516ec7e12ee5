"""Kinetic-formulation diagnostics.

* :func:`kinetic_function` -- the level-set indicator ``1_{u > zeta}``.
* :func:`parabolic_defect` -- the nonlocal dissipation density ``eta_1``.
* :func:`kinetic_residual` -- the residual ``D(t)`` that closes the kinetic
  identity for a test function ``phi(x, zeta) = rho(x) psi(zeta)``; it estimates
  ``m(-d_zeta phi)([0, t])`` and is non-negative when ``psi' <= 0``.
* :func:`defect_estimate` -- a cell-resolved estimate of the kinetic measure
  built from the discrete semi-Kruzhkov entropy dissipation of the scheme.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import AccuracyError, ConfigurationError, DomainError, InsufficientDataError
from .model import ModelSpec
from .operators import quadrature_rule, shifted_values
from .solver import Trajectory, _Stepper
from .torus import Field, TorusGrid, make_grid


# --- zeta grid and kinetic function ---------------------------------------------


@dataclass(frozen=True)
class ZetaGrid:
    """``m_levels`` equal cells on ``[zeta_min, zeta_max]``; levels sit at cell centres."""

    zeta_min: float
    zeta_max: float
    m_levels: int = 64

    def __post_init__(self):
        if not self.zeta_min < self.zeta_max:
            raise ConfigurationError("zeta_min must be below zeta_max")
        if self.m_levels < 16:
            raise ConfigurationError("at least 16 zeta levels are required")

    @property
    def dzeta(self) -> float:
        return (self.zeta_max - self.zeta_min) / self.m_levels

    @property
    def levels(self) -> np.ndarray:
        return self.zeta_min + (np.arange(self.m_levels) + 0.5) * self.dzeta

    @property
    def edges(self) -> np.ndarray:
        return self.zeta_min + np.arange(self.m_levels + 1) * self.dzeta

    @classmethod
    def covering(cls, values, margin: float = 1.0, m_levels: int = 64) -> "ZetaGrid":
        """Symmetric grid over ``[-(max|u| + margin), max|u| + margin]``."""
        r = float(np.max(np.abs(values))) + margin
        return cls(-r, r, m_levels)


def kinetic_function(u: Field, zgrid: ZetaGrid) -> np.ndarray:
    """``f[i, j] = 1`` if ``u_i > zeta_j`` else 0, as ``uint8``."""
    v = u.values
    if v.min() < zgrid.zeta_min or v.max() > zgrid.zeta_max:
        raise DomainError(
            f"zeta grid [{zgrid.zeta_min}, {zgrid.zeta_max}] does not cover [{v.min()}, {v.max()}]"
        )
    return (v[:, None] > zgrid.levels[None, :]).astype(np.uint8)


# --- parabolic defect -------------------------------------------------------------

_GL_T, _GL_W = np.polynomial.legendre.leggauss(8)


def _integral_of(A, lo, hi):
    """Gauss-Legendre approximation of ``int_lo^hi A`` (elementwise)."""
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    acc = np.zeros(np.shape(lo))
    for t, w in zip(_GL_T, _GL_W):
        acc += w * A(mid + half * t)
    return acc * half


def _pair_mass(A, a, b, lo_cut=None, hi_cut=None):
    """``int |A(b) - A(z)| dz`` over ``Conv{a, b}``, optionally clipped to ``[lo_cut, hi_cut]``."""
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    if lo_cut is not None:
        lo, hi = np.clip(lo, lo_cut, hi_cut), np.clip(hi, lo_cut, hi_cut)
    return np.abs(A(b) * (hi - lo) - _integral_of(A, lo, hi))


def _shifted(values, s, interpolation):
    if interpolation == "spectral":
        return shifted_values(values, s)
    if interpolation != "linear":
        raise ConfigurationError("interpolation must be 'linear' or 'spectral'")
    n = values.shape[-1]
    pos = s * n
    m = np.floor(pos).astype(np.int64)
    th = (pos - m)[:, None]
    idx = np.arange(n)[None, :]
    plus = (1 - th) * values[(idx + m[:, None]) % n] + th * values[(idx + m[:, None] + 1) % n]
    minus = (1 - th) * values[(idx - m[:, None]) % n] + th * values[(idx - m[:, None] - 1) % n]
    return plus, minus


def _defect_sweep(values, A, alpha, z_cutoff, n_quad, interpolation, edges=None):
    s, w = quadrature_rule(alpha, int(n_quad), float(z_cutoff))
    n = values.size
    out = np.zeros(n) if edges is None else np.zeros((n, len(edges) - 1))
    step = max(1, (1 << 18) // n)
    for lo in range(0, len(s), step):
        sl = slice(lo, lo + step)
        plus, minus = _shifted(values, s[sl], interpolation)
        a = np.broadcast_to(values, plus.shape)
        wq = w[sl][:, None]
        if edges is None:
            out += np.sum(wq * (_pair_mass(A, a, plus) + _pair_mass(A, a, minus)), axis=0)
        else:
            for j in range(len(edges) - 1):
                e0, e1 = edges[j], edges[j + 1]
                cell = _pair_mass(A, a, plus, e0, e1) + _pair_mass(A, a, minus, e0, e1)
                out[:, j] += np.sum(wq * cell, axis=0)
    return out


def parabolic_defect_mass(u: Field | np.ndarray, model: ModelSpec, z_cutoff: float = 8.0,
                          n_quad: int = 1000, interpolation: str = "linear",
                          rtol: Optional[float] = 5e-3) -> np.ndarray:
    """``int eta_1(x, zeta) d zeta`` at each cell.

    Shifted values ``u(x +- s)`` come from the periodic linear (default) or
    trigonometric interpolant of the cell data.  With ``rtol`` set, the
    total is compared against a half-resolution rule.
    """
    v = u.values if isinstance(u, Field) else np.asarray(u, dtype=np.float64)
    A, alpha = model.diffusion.A, model.alpha.alpha
    full = _defect_sweep(v, A, alpha, z_cutoff, n_quad, interpolation)
    if rtol is not None:
        half = _defect_sweep(v, A, alpha, z_cutoff, n_quad // 2, interpolation)
        tf, th = full.sum(), half.sum()
        if abs(tf - th) > rtol * abs(tf) + 1e-14:
            raise AccuracyError(f"parabolic defect quadrature not converged: {tf:.6e} vs {th:.6e}")
    return full


def parabolic_defect(u: Field, model: ModelSpec, zgrid: ZetaGrid, z_cutoff: float = 8.0,
                     n_quad: int = 1000, interpolation: str = "linear",
                     rtol: Optional[float] = 5e-3) -> np.ndarray:
    """Cell averages of ``eta_1`` on ``(x_i, zeta cell j)``, shape ``(n, m_levels)``.

    ``eta_1(x, z) = C int |A(u(x+y)) - A(z)| 1_{Conv(u(x), u(x+y))}(z) |y|^{-1-2a} dy``
    """
    v = u.values
    A, alpha = model.diffusion.A, model.alpha.alpha
    edges = zgrid.edges
    full = _defect_sweep(v, A, alpha, z_cutoff, n_quad, interpolation, edges)
    if rtol is not None:
        half = _defect_sweep(v, A, alpha, z_cutoff, n_quad // 2, interpolation, edges)
        tf, th = full.sum(), half.sum()
        if abs(tf - th) > rtol * abs(tf) + 1e-14:
            raise AccuracyError(f"parabolic defect quadrature not converged: {tf:.6e} vs {th:.6e}")
    return np.maximum(full, 0.0) / zgrid.dzeta


# --- test functions ----------------------------------------------------------------


@dataclass(frozen=True)
class TrigPoly:
    """``rho(x) = a_0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)``, ``1 <= k <= 4``."""

    a0: float = 1.0
    cos: tuple = ()
    sin: tuple = ()

    def __post_init__(self):
        if len(self.cos) > 4 or len(self.sin) > 4:
            raise ConfigurationError("test functions use modes k <= 4")

    def _terms(self):
        for k, a in enumerate(self.cos, 1):
            yield k, a, 0.0
        for k, b in enumerate(self.sin, 1):
            yield k, 0.0, b

    def value(self, x):
        out = np.full(np.shape(x), float(self.a0))
        for k, a, b in self._terms():
            out += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
        return out

    def derivative(self, x):
        out = np.zeros(np.shape(x))
        for k, a, b in self._terms():
            w = 2 * np.pi * k
            out += w * (-a * np.sin(w * x) + b * np.cos(w * x))
        return out

    def second_derivative(self, x):
        out = np.zeros(np.shape(x))
        for k, a, b in self._terms():
            w = 2 * np.pi * k
            out -= w * w * (a * np.cos(w * x) + b * np.sin(w * x))
        return out

    def fractional(self, x, alpha):
        """``(-Delta)^alpha rho``."""
        out = np.zeros(np.shape(x))
        for k, a, b in self._terms():
            w = 2 * np.pi * k
            out += w ** (2 * alpha) * (a * np.cos(w * x) + b * np.sin(w * x))
        return out


@dataclass(frozen=True)
class ZetaProfile:
    """Compactly supported C^2 profile ``psi`` with derivative and support."""

    psi: Callable
    dpsi: Callable
    support: tuple
    name: str = "custom"


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def bump_profile(center: float = 0.0, halfwidth: float = 1.0) -> ZetaProfile:
    """``psi = (1 - s^2)^3`` with ``s = (zeta - center) / halfwidth``."""

    def psi(z):
        s = (np.asarray(z, dtype=np.float64) - center) / halfwidth
        return np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0)

    def dpsi(z):
        s = (np.asarray(z, dtype=np.float64) - center) / halfwidth
        return np.where(np.abs(s) < 1, -6 * s * (1 - s * s) ** 2 / halfwidth, 0.0)

    return ZetaProfile(psi, dpsi, (center - halfwidth, center + halfwidth), "bump")


def ramp_profile(lo: float, hi: float, width: float = 0.05, bump_width: float = 0.25) -> ZetaProfile:
    """Profile with ``psi' = -1`` on ``[lo, hi]``.

    ``psi'`` rises smoothly from 0 to -1 over ``[lo - width, lo]`` and back over
    ``[hi, hi + width]``; a positive ``(1 - s^2)^3`` bump of half-width
    ``bump_width`` placed just below ``lo - width`` restores ``int psi' = 0``,
    so ``psi`` has compact support.  Place ``lo`` below the data range so that
    the bump sees no measure.
    """
    if not hi > lo:
        raise ConfigurationError("ramp needs hi > lo")
    c_b = lo - width - bump_width
    mass = (hi - lo) + width
    amp = mass / (bump_width * 32.0 / 35.0)

    def dpsi(z):
        z = np.asarray(z, dtype=np.float64)
        s = (z - c_b) / bump_width
        bump = np.where(np.abs(s) < 1, amp * (1 - s * s) ** 3, 0.0)
        down = _smoothstep((z - (lo - width)) / width) * _smoothstep((hi + width - z) / width)
        return bump - down

    # psi by accurate cumulative integration of dpsi on a fine grid
    a, b = c_b - bump_width, hi + width
    zs = np.linspace(a, b, 40001)
    vals = cumulative_simpson(dpsi(zs), x=zs, initial=0.0)
    vals -= np.linspace(0.0, vals[-1], zs.size)  # remove O(h^4) closure error

    def psi(z):
        return np.interp(z, zs, vals, left=0.0, right=0.0)

    return ZetaProfile(psi, dpsi, (a, b), "ramp")


@dataclass(frozen=True)
class KineticTestFunction:
    rho: TrigPoly
    psi: ZetaProfile


def _antiderivative_tables(profile: ZetaProfile, model: ModelSpec, m: int = 40001):
    a, b = profile.support
    zs = np.linspace(a, b, m)
    ps = profile.psi(zs)
    Psi = cumulative_simpson(ps, x=zs, initial=0.0)
    GF = cumulative_simpson(model.flux.Fprime(zs) * ps, x=zs, initial=0.0)
    GA = cumulative_simpson(model.diffusion.Aprime(zs) * ps, x=zs, initial=0.0)

    def table(vals):
        return lambda v: np.interp(v, zs, vals)

    return table(Psi), table(GF), table(GA)


@dataclass
class ResidualSeries:
    """``D(t)`` and the accumulated terms of the kinetic identity."""

    times: np.ndarray
    D: np.ndarray
    terms: dict = field(default_factory=dict, repr=False)


def _require_full(traj: Trajectory):
    if traj.noise_record is None and traj.model.noise.K > 0:
        raise InsufficientDataError("trajectory has no noise record")
    if int(traj.config.sample_stride) != 1:
        raise InsufficientDataError("kinetic diagnostics need every step (sample_stride=1)")


def kinetic_residual(traj: Trajectory, model: Optional[ModelSpec], test_fn: KineticTestFunction
                     ) -> ResidualSeries:
    """Residual ``D(t_N)`` closing the discrete kinetic identity.

    ``D = -[<f_0, phi> - <f_N, phi> + sum dt int rho' G_F(u) - sum dt int (-Delta)^a rho G_A(u)
           + tau sum dt int rho'' Psi(u) + sum_k sum int h_k rho psi(u) dW_k
           + 1/2 sum dt int rho psi'(u) H^2]``

    with ``<f, phi> = int rho Psi(u)`` and ``Psi, G_F, G_A`` the antiderivatives
    of ``psi, F' psi, A' psi``.  Left-point (Ito) sums use the recorded increments.
    """
    model = traj.model if model is None else model
    if traj.noise_record is None and model.noise.K > 0:
        raise InsufficientDataError("trajectory has no noise record")
    _require_full(traj)
    U = traj.values
    n = U.shape[-1]
    grid = make_grid(n)
    x, dx = grid.x, grid.dx
    dt = traj.config.dt or 0.0
    rho, prof = test_fn.rho, test_fn.psi
    Psi, GF, GA = _antiderivative_tables(prof, model)
    r, r1, r2 = rho.value(x), rho.derivative(x), rho.second_derivative(x)
    rfrac = rho.fractional(x, model.alpha.alpha)

    pair = Psi(U) @ r * dx
    flux = dt * (GF(U[:-1]) @ r1) * dx
    frac = dt * (GA(U[:-1]) @ rfrac) * dx
    visc = dt * traj.config.tau * (Psi(U[:-1]) @ r2) * dx
    stoch = np.zeros(len(U) - 1)
    ito = np.zeros(len(U) - 1)
    nz = model.noise
    if nz.K > 0 and len(U) > 1:
        coeffs = nz.discretize(grid)
        g = nz.g(U[:-1]) if nz.kind == "multiplicative" else np.ones_like(U[:-1])
        psiu = prof.psi(U[:-1])
        dW = traj.noise_record
        for k in range(nz.K):
            hk = coeffs[k] * g
            stoch += dW[:, k] * ((hk * psiu) @ r) * dx
            ito += 0.5 * dt * ((hk * hk * prof.dpsi(U[:-1])) @ r) * dx
    inc = flux - frac + visc + stoch + ito
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    R = pair[0] - pair + cum
    terms = {"pairing": pair, "flux": np.concatenate([[0.0], np.cumsum(flux)]),
             "fractional": np.concatenate([[0.0], np.cumsum(frac)]),
             "viscous": np.concatenate([[0.0], np.cumsum(visc)]),
             "stochastic": np.concatenate([[0.0], np.cumsum(stoch)]),
             "ito": np.concatenate([[0.0], np.cumsum(ito)])}
    return ResidualSeries(times=traj.times.copy(), D=-R, terms=terms)


# --- cell-resolved measure estimate -------------------------------------------------


@dataclass
class DefectEstimate:
    """Estimated kinetic measure on ``(x cell, time window, zeta cell)``.

    ``density`` is mass per unit ``dx * dt * dzeta``; ``mass`` gives cell masses.
    """

    grid: TorusGrid
    zgrid: ZetaGrid
    times: np.ndarray
    density: np.ndarray = field(repr=False)

    @property
    def mass(self) -> np.ndarray:
        dtw = np.diff(self.times)
        return self.density * self.grid.dx * dtw[None, :, None] * self.zgrid.dzeta

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x_index", "t_window", "zeta_index", "density_per_dx_dt_dzeta"])
            for (i, t, j), d in np.ndenumerate(self.density):
                w.writerow([i, t, j, "%.17g" % d])


def defect_estimate(traj: Trajectory, zgrid: ZetaGrid, n_windows: int = 1,
                    model: Optional[ModelSpec] = None) -> DefectEstimate:
    """Kinetic measure of the deterministic sub-step at every level ``k``.

    With ``H`` the monotone conservative sub-step, the dissipation of the
    entropy ``(u - k)^+`` in cell ``i`` at step ``n`` is

        H(max(u^n, k))_i - max(H(u^n)_i, k) >= 0,

    and its integral against ``-psi'(k) dk`` reproduces the residual ``D`` of
    a noise-free run with ``rho = 1``.  Levels outside ``[min u^n, max u^n]``
    carry no mass.
    """
    model = traj.model if model is None else model
    _require_full(traj)
    U = traj.values
    n_steps = len(U) - 1
    if n_steps < 1:
        raise InsufficientDataError("trajectory has no steps")
    if not 1 <= n_windows <= n_steps:
        raise ConfigurationError("n_windows must lie in [1, number of steps]")
    if U.min() < zgrid.zeta_min or U.max() > zgrid.zeta_max:
        raise DomainError("zeta grid does not cover the trajectory range")
    n = U.shape[-1]
    cfg = traj.config
    st = _Stepper(model, n, cfg.dt, cfg.tau, cfg.cfl_safety, cfg.viscous_operator)
    ks = zgrid.levels
    bounds = np.linspace(0, n_steps, n_windows + 1).round().astype(int)
    dens = np.zeros((n, n_windows, zgrid.m_levels))
    for w in range(n_windows):
        for s in range(bounds[w], bounds[w + 1]):
            V = U[s]
            HV = st.deterministic(V[None])[0]
            active = (ks > V.min()) & (ks < V.max())
            if not active.any():
                continue
            kk = ks[active]
            HK = st.deterministic(np.maximum(V[None, :], kk[:, None]))
            diss = HK - np.maximum(HV[None, :], kk[:, None])
            dens[:, w, active] += diss.T
        dens[:, w, :] /= cfg.dt * (bounds[w + 1] - bounds[w])
    times = traj.times[bounds]
    return DefectEstimate(grid=make_grid(n), zgrid=zgrid, times=times, density=dens)


def measure_tail(est: DefectEstimate, L: float) -> float:
    """Mass of the estimate on levels with ``|zeta_j| >= L``."""
    reach = max(abs(est.zgrid.zeta_min), abs(est.zgrid.zeta_max))
    if not 0 <= L <= reach:
        raise DomainError(f"L={L} outside the zeta grid reach [0, {reach}]")
    sel = np.abs(est.zgrid.levels) >= L
    return float(est.mass[:, :, sel].sum())
