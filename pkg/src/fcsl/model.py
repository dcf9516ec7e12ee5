"""Problem data: flux F, diffusion A, fractional order and the noise family.

Every scalar map is vectorised (accepts and returns numpy arrays).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .operators import FractionalOrder
from .torus import Field, TorusGrid

ScalarMap = Callable[[np.ndarray], np.ndarray]


# --- flux ---------------------------------------------------------------------


def _tabulated_split(Fprime: ScalarMap, lo: float = -50.0, hi: float = 50.0, m: int = 200001):
    """Engquist-Osher split ``int_0^z max(F',0)`` and ``int_0^z min(F',0)`` by tabulation."""
    zs = np.linspace(lo, hi, m)
    d = np.asarray(Fprime(zs), dtype=np.float64)

    def build(part):
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (part[1:] + part[:-1]) * np.diff(zs))])
        cum -= np.interp(0.0, zs, cum)

        def fn(z, cum=cum, part=part):
            z = np.asarray(z, dtype=np.float64)
            out = np.interp(z, zs, cum)
            out = np.where(z > hi, cum[-1] + part[-1] * (z - hi), out)
            return np.where(z < lo, cum[0] + part[0] * (z - lo), out)

        return fn

    return build(np.maximum(d, 0.0)), build(np.minimum(d, 0.0))


@dataclass(frozen=True)
class FluxSpec:
    """Flux ``F`` with derivative and its Engquist-Osher splitting.

    ``eo_plus(z) = int_0^z max(F', 0)`` and ``eo_minus(z) = int_0^z min(F', 0)``;
    when omitted they are tabulated from ``Fprime``.
    """

    F: ScalarMap
    Fprime: ScalarMap
    Fsecond_bound_kind: str = "custom"
    name: str = "custom"
    eo_plus: Optional[ScalarMap] = None
    eo_minus: Optional[ScalarMap] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.Fsecond_bound_kind not in ("subquadratic", "sublinear-growth-of-F''", "custom"):
            raise ConfigurationError(f"unknown F'' bound kind {self.Fsecond_bound_kind!r}")
        if self.eo_plus is None or self.eo_minus is None:
            p, m = _tabulated_split(self.Fprime)
            object.__setattr__(self, "eo_plus", p)
            object.__setattr__(self, "eo_minus", m)
        object.__setattr__(self, "_F0", float(np.asarray(self.F(np.array([0.0])))[0]))

    def numerical_flux(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """Engquist-Osher flux ``G(a, b) = F(0) + eo_plus(a) + eo_minus(b)``."""
        return self._F0 + self.eo_plus(left) + self.eo_minus(right)

    def max_speed(self, lo: float, hi: float) -> float:
        """Upper bound of ``|F'|`` on ``[lo, hi]`` from dense sampling."""
        name = self.name
        if name == "burgers":
            return max(abs(lo), abs(hi))
        if name == "linear":
            return abs(self.params.get("c", 1.0))
        zs = np.linspace(lo, hi, 257)
        return float(np.max(np.abs(self.Fprime(zs))))


def burgers_flux() -> FluxSpec:
    return FluxSpec(
        F=lambda z: 0.5 * np.square(z),
        Fprime=lambda z: np.asarray(z, dtype=np.float64) * 1.0,
        Fsecond_bound_kind="sublinear-growth-of-F''",
        name="burgers",
        eo_plus=lambda z: 0.5 * np.square(np.maximum(z, 0.0)),
        eo_minus=lambda z: 0.5 * np.square(np.minimum(z, 0.0)),
    )


def linear_flux(c: float = 1.0) -> FluxSpec:
    c = float(c)
    cp, cm = max(c, 0.0), min(c, 0.0)
    return FluxSpec(
        F=lambda z: c * np.asarray(z, dtype=np.float64),
        Fprime=lambda z: np.full(np.shape(z), c),
        Fsecond_bound_kind="subquadratic",
        name="linear",
        eo_plus=lambda z: cp * np.asarray(z, dtype=np.float64),
        eo_minus=lambda z: cm * np.asarray(z, dtype=np.float64),
        params={"c": c},
    )


# --- diffusion ----------------------------------------------------------------


@dataclass(frozen=True)
class DiffusionSpec:
    """Non-decreasing Lipschitz map ``A`` acted on by the fractional operator."""

    A: ScalarMap
    Aprime: ScalarMap
    lipschitz_const: float
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.lipschitz_const >= 0:
            raise ConfigurationError("lipschitz_const must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"


def identity_diffusion() -> DiffusionSpec:
    return DiffusionSpec(
        A=lambda z: np.asarray(z, dtype=np.float64) * 1.0,
        Aprime=lambda z: np.ones(np.shape(z)),
        lipschitz_const=1.0,
        name="identity",
    )


def zero_diffusion() -> DiffusionSpec:
    return DiffusionSpec(
        A=lambda z: np.zeros(np.shape(z)),
        Aprime=lambda z: np.zeros(np.shape(z)),
        lipschitz_const=0.0,
        name="zero",
    )


def smoothed_positive_part(eps: float = 0.05) -> DiffusionSpec:
    """``A ~ max(z, 0)`` with a quintic smoothstep derivative on ``[-eps, eps]``.

    ``A`` vanishes identically for ``z <= -eps``, equals ``z`` for ``z >= eps``,
    is C^3 and has Lipschitz constant 1.
    """
    if eps <= 0:
        raise ConfigurationError("smoothing width must be positive")

    def s_of(z):
        return np.clip((np.asarray(z, dtype=np.float64) + eps) / (2.0 * eps), 0.0, 1.0)

    def Aprime(z):
        s = s_of(z)
        return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))

    def A(z):
        z = np.asarray(z, dtype=np.float64)
        s = s_of(z)
        mid = 2.0 * eps * s**4 * (2.5 + s * (-3.0 + s))
        return np.where(z >= eps, z, mid)

    return DiffusionSpec(A=A, Aprime=Aprime, lipschitz_const=1.0, name="smoothed_positive_part",
                         params={"eps": eps})


# --- noise --------------------------------------------------------------------

_G_MAPS = {
    "one": (lambda u: np.ones(np.shape(u)), 0.0),
    "identity": (lambda u: np.asarray(u, dtype=np.float64) * 1.0, 1.0),
    "bounded": (lambda u: np.asarray(u, dtype=np.float64) / (1.0 + np.square(u)), 1.0),
    "square": (lambda u: np.square(u), np.inf),
}


@dataclass(frozen=True)
class NoiseSpec:
    """Truncated cylindrical noise ``sum_k h_k(x, u) d beta_k``.

    ``h_k(x, u) = amplitude * e_k(x) * g(u) / k^q`` where ``e_k`` comes from
    ``family``:

    * ``"sine"``: ``sin(2 pi k x)``
    * ``"trig"``: ``cos(2 pi j x)`` for odd ``k = 2j - 1``, ``sin(2 pi j x)`` for even ``k = 2j``,
      with decay taken in ``j``
    * ``"constant"``: ``1`` (no x dependence)

    Additive noise uses ``g = 1``; multiplicative noise picks ``g`` by name
    (``identity``, ``bounded`` for ``u/(1+u^2)``, ``square``) or from ``g_fn``.
    ``profile_fn`` replaces ``e_k(x) / k^q`` entirely: it maps ``x`` to a ``(K, len(x))`` array.
    """

    kind: str = "additive"
    K: int = 0
    q: float = 2.0
    amplitude: float = 1.0
    family: str = "sine"
    cancellation: bool = True
    g_name: str = "one"
    g_fn: Optional[ScalarMap] = field(default=None, compare=False)
    g_lipschitz: Optional[float] = None
    profile_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("additive", "multiplicative"):
            raise ConfigurationError(f"noise kind must be additive or multiplicative, got {self.kind!r}")
        if self.K < 0:
            raise ConfigurationError("noise mode count K must be non-negative")
        if self.family not in ("sine", "trig", "constant"):
            raise ConfigurationError(f"unknown noise family {self.family!r}")
        if self.kind == "additive" and self.g_fn is None and self.g_name != "one":
            object.__setattr__(self, "g_name", "one")
        if self.kind == "multiplicative" and self.g_fn is None and self.g_name == "one":
            object.__setattr__(self, "g_name", "identity")
        if self.g_fn is None and self.g_name not in _G_MAPS:
            raise ConfigurationError(f"unknown multiplicative map {self.g_name!r}")
        if self.family == "constant" and self.cancellation and self.K > 0 and self.profile_fn is None:
            raise ConfigurationError("constant noise profiles cannot satisfy the cancellation condition")

    # profiles -----------------------------------------------------------------

    def coefficients(self, x) -> np.ndarray:
        """``e_k(x) * amplitude / k^q`` as a ``(K, len(x))`` array."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if self.K == 0:
            return np.zeros((0, x.size))
        if self.profile_fn is not None:
            out = np.asarray(self.profile_fn(x), dtype=np.float64)
            if out.shape != (self.K, x.size):
                raise ConfigurationError(f"profile_fn must return shape {(self.K, x.size)}")
            return out
        k = np.arange(1, self.K + 1)
        if self.family == "sine":
            basis = np.sin(2.0 * np.pi * np.outer(k, x))
            freq = k
        elif self.family == "trig":
            freq = (k + 1) // 2
            ang = 2.0 * np.pi * np.outer(freq, x)
            basis = np.where((k % 2 == 1)[:, None], np.cos(ang), np.sin(ang))
        else:
            basis = np.ones((self.K, x.size))
            freq = k
        return self.amplitude * basis / (freq.astype(np.float64) ** self.q)[:, None]

    def g(self, u) -> np.ndarray:
        if self.g_fn is not None:
            return np.asarray(self.g_fn(u), dtype=np.float64)
        return _G_MAPS[self.g_name][0](u)

    def g_lipschitz_const(self) -> float:
        if self.g_lipschitz is not None:
            return float(self.g_lipschitz)
        if self.g_fn is not None:
            return np.inf
        return _G_MAPS[self.g_name][1]

    def h(self, x, u) -> np.ndarray:
        """Mode values ``h_k(x, u)`` with shape ``(K,) + broadcast(x, u).shape``."""
        x, u = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64))
        c = self.coefficients(x.ravel()).reshape((self.K,) + x.shape)
        return c * self.g(u)[None]

    def H2(self, x, u) -> np.ndarray:
        return np.sum(np.square(self.h(x, u)), axis=0)

    @property
    def depends_on_x(self) -> bool:
        return self.K > 0 and (self.profile_fn is not None or self.family != "constant")

    @property
    def depends_on_u(self) -> bool:
        return self.K > 0 and self.kind == "multiplicative"

    @property
    def is_zero(self) -> bool:
        return self.K == 0 or self.amplitude == 0.0

    def discretize(self, grid: TorusGrid) -> np.ndarray:
        """Coefficients at the cell centres, shape ``(K, n)``.

        With the cancellation flag the discrete mean of each profile is
        removed, so the increments conserve the discrete mean to roundoff.
        """
        c = self.coefficients(grid.x)
        if self.cancellation and self.K > 0:
            c = c - c.mean(axis=1, keepdims=True)
        return c


def zero_noise() -> NoiseSpec:
    return NoiseSpec(kind="additive", K=0)


def additive_noise(K: int = 8, q: float = 2.0, amplitude: float = 1.0, family: str = "sine") -> NoiseSpec:
    return NoiseSpec(kind="additive", K=K, q=q, amplitude=amplitude, family=family, cancellation=True)


def multiplicative_noise(
    K: int = 8, q: float = 2.0, amplitude: float = 1.0, g: str = "bounded", family: str = "sine"
) -> NoiseSpec:
    return NoiseSpec(kind="multiplicative", K=K, q=q, amplitude=amplitude, family=family,
                     g_name=g, cancellation=family != "constant")


# --- model --------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Complete problem data of the stochastic fractional conservation law."""

    flux: FluxSpec
    diffusion: DiffusionSpec
    noise: NoiseSpec
    alpha: FractionalOrder
    name: str = "custom"

    def __post_init__(self):
        if not isinstance(self.alpha, FractionalOrder):
            object.__setattr__(self, "alpha", FractionalOrder(float(self.alpha)))
        ok, why = regime_check(self.noise, self.alpha.alpha)
        if not ok:
            raise ConfigurationError(why)

    def with_noise(self, noise: NoiseSpec) -> "ModelSpec":
        return replace(self, noise=noise)

    def with_alpha(self, alpha: float) -> "ModelSpec":
        return replace(self, alpha=FractionalOrder(alpha))


def regime_check(noise: NoiseSpec, alpha: float) -> tuple[bool, str]:
    """Well-posedness regime: noise depending jointly on (x, u) needs alpha < 1/2."""
    if noise.depends_on_x and noise.depends_on_u and not alpha < 0.5:
        return False, (
            f"alpha={alpha} outside the alpha in (0, 1/2) regime required when the noise "
            "coefficient depends jointly on x and u"
        )
    return True, ""


BUILTIN_MODELS = ("burgers_frac", "linear_advection", "degenerate_porous")


def builtin_model(name: str, alpha: float = 0.3, noise: Optional[NoiseSpec] = None,
                  c: float = 1.0, smoothing: float = 0.05) -> ModelSpec:
    """One of the builtin models, with zero noise unless ``noise`` is given.

    * ``burgers_frac``: ``F = z^2/2``, ``A = z``
    * ``linear_advection``: ``F = c z``, ``A = 0``
    * ``degenerate_porous``: ``F = z^2/2``, ``A`` a smoothed ``max(z, 0)``
    """
    noise = zero_noise() if noise is None else noise
    if name == "burgers_frac":
        flux, diff = burgers_flux(), identity_diffusion()
    elif name == "linear_advection":
        flux, diff = linear_flux(c), zero_diffusion()
    elif name == "degenerate_porous":
        flux, diff = burgers_flux(), smoothed_positive_part(smoothing)
    else:
        raise ConfigurationError(f"unknown model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")
    return ModelSpec(flux=flux, diffusion=diff, noise=noise, alpha=FractionalOrder(alpha), name=name)


# --- noise evaluation ---------------------------------------------------------


def noise_increment(spec: NoiseSpec, u: Field, dt: float, rng) -> Field:
    """Euler-Maruyama increment ``sum_k h_k(x, u) sqrt(dt) xi_k``.

    ``rng`` is anything with a ``standard_normal(size)`` method.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if spec.K == 0:
        return Field(u.grid, np.zeros(u.grid.n))
    xi = np.asarray(rng.standard_normal(spec.K), dtype=np.float64)
    return Field(u.grid, apply_noise(spec, spec.discretize(u.grid), u.values, np.sqrt(dt) * xi))


def apply_noise(spec: NoiseSpec, coeffs: np.ndarray, u: np.ndarray, dW: np.ndarray) -> np.ndarray:
    """``sum_k coeffs_k * g(u) * dW_k`` for a batch ``u`` of shape ``(..., n)``.

    ``dW`` has shape ``(..., K)``.  Modes are summed in a fixed order with
    elementwise operations so the result does not depend on the batch shape.
    """
    acc = np.zeros_like(u)
    for k in range(spec.K):
        acc += dW[..., k, None] * coeffs[k]
    if spec.kind == "multiplicative":
        acc *= spec.g(u)
    return acc


def h_norm_sq(spec: NoiseSpec, x: float, u: float) -> float:
    """Truncated ``H^2(x, u) = sum_k h_k(x, u)^2``."""
    if spec.K == 0:
        return 0.0
    return float(spec.H2(np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64)))


# --- assumption validation ----------------------------------------------------


@dataclass(frozen=True)
class AssumptionResult:
    name: str
    passed: bool
    detail: str
    witness: Optional[tuple] = None
    applicable: bool = True


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]

    def __getitem__(self, name: str) -> AssumptionResult:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def __str__(self):
        lines = []
        for e in self.entries:
            tag = "n/a " if not e.applicable else ("pass" if e.passed else "FAIL")
            w = f" witness={e.witness}" if e.witness is not None else ""
            lines.append(f"[{tag}] {e.name}: {e.detail}{w}")
        return "\n".join(lines)


def _fd_consistency(fn, dfn, zs, label) -> AssumptionResult:
    h = 1e-3 * max(1.0, float(np.max(np.abs(zs))))
    d = np.asarray(dfn(zs), dtype=np.float64)
    e1 = np.abs((fn(zs + h) - fn(zs)) / h - d)
    e2 = np.abs((fn(zs + h / 2) - fn(zs)) / (h / 2) - d)
    floor = 1e-6 * (1.0 + np.max(np.abs(d)))
    bad = (e2 > 0.75 * e1 + floor) | ~np.isfinite(d)
    if np.any(bad):
        i = int(np.argmax(bad))
        return AssumptionResult(label, False, "derivative inconsistent with finite differences",
                                (float(zs[i]),))
    return AssumptionResult(label, True, f"first-order consistent, max error {e1.max():.2e} at h={h:.1e}")


def _growth_ok(zs, ratio, label, detail):
    r = np.abs(np.asarray(ratio, dtype=np.float64))
    R = np.max(np.abs(zs))
    inner, outer = np.abs(zs) <= R / 2, np.abs(zs) > R / 2
    if not np.all(np.isfinite(r)):
        i = int(np.argmax(~np.isfinite(r)))
        return AssumptionResult(label, False, detail + " (non-finite)", (float(zs[i]),))
    lim = 2.0 * r[inner].max() + 1e-12
    if r[outer].size and r[outer].max() > lim:
        i = int(np.flatnonzero(outer)[np.argmax(r[outer])])
        return AssumptionResult(label, False, detail + f" grows faster than allowed ({r[i]:.3g} > {lim:.3g})",
                                (float(zs[i]),))
    return AssumptionResult(label, True, detail + f", sup ratio {r.max():.3g}")


def validate(spec: ModelSpec, zeta_range=(-10.0, 10.0), n_samples: int = 2001) -> ValidationReport:
    """Sample the structural assumptions on ``zeta_range``.

    Failures are reported with a witnessing sample; nothing is raised.
    """
    lo, hi = map(float, zeta_range)
    if not hi > lo:
        raise DomainError("zeta_range must be a nonempty interval")
    zs = np.linspace(lo, hi, max(int(n_samples), 16))
    F, Fp = spec.flux.F, spec.flux.Fprime
    A, Ap = spec.diffusion.A, spec.diffusion.Aprime
    out = []

    out.append(_fd_consistency(F, Fp, zs, "A1 flux derivative"))

    a = np.asarray(A(zs), dtype=np.float64)
    dec = np.diff(a) < -1e-12 * (1.0 + np.abs(a[:-1]))
    if np.any(dec):
        i = int(np.argmax(dec))
        out.append(AssumptionResult("A2 monotone diffusion", False, "A decreases",
                                    (float(zs[i]), float(zs[i + 1]))))
    else:
        out.append(AssumptionResult("A2 monotone diffusion", True, "A non-decreasing on samples"))
    L = spec.diffusion.lipschitz_const
    slopes = np.abs(np.diff(a)) / np.diff(zs)
    if np.any(slopes > L * (1 + 1e-9) + 1e-12):
        i = int(np.argmax(slopes))
        out.append(AssumptionResult("A2 Lipschitz diffusion", False,
                                    f"slope {slopes[i]:.4g} exceeds {L}", (float(zs[i]), float(zs[i + 1]))))
    else:
        out.append(AssumptionResult("A2 Lipschitz diffusion", True, f"max slope {slopes.max():.4g} <= {L}"))
    out.append(_fd_consistency(A, Ap, zs, "A2 diffusion derivative"))

    noise = spec.noise
    xs = (np.arange(512) + 0.5) / 512
    if noise.kind == "multiplicative" and noise.K > 0:
        H2 = np.max(noise.H2(xs[:, None], zs[None, :]), axis=0)
        out.append(_growth_ok(zs, H2 / (1.0 + zs**2), "A3 noise growth", "H^2(x,u)/(1+u^2)"))
        gz = noise.g(zs)
        dq = np.abs(np.diff(gz)) / np.diff(zs)
        out.append(_growth_ok(0.5 * (zs[1:] + zs[:-1]), dq, "A3 noise continuity", "|dg/du|"))
    else:
        out.append(AssumptionResult("A3 noise growth", True, "additive noise", applicable=False))
    if noise.kind == "additive":
        c = noise.coefficients(xs)
        total = float(np.sum(np.max(np.abs(c), axis=1) ** 2)) if noise.K else 0.0
        ok = np.isfinite(total)
        out.append(AssumptionResult("A4 additive summability", bool(ok), f"sum ||h_k||_C^2 = {total:.6g}"))
    else:
        out.append(AssumptionResult("A4 additive summability", True, "multiplicative noise", applicable=False))

    h2 = 1e-3 * max(1.0, hi - lo)
    App = (np.asarray(Ap(zs + h2)) - np.asarray(Ap(zs - h2))) / (2 * h2)
    out.append(_growth_ok(zs, App / (1.0 + np.abs(zs)), "H1 A'' growth", "|A''|/(1+|z|)"))
    Fpp = (np.asarray(Fp(zs + h2)) - np.asarray(Fp(zs - h2))) / (2 * h2)
    out.append(_growth_ok(zs, Fpp / (1.0 + np.abs(zs)), "H2 F'' growth", "|F''|/(1+|z|)"))
    if noise.kind == "additive":
        out.append(AssumptionResult("H3 additive noise", True, "noise independent of u"))
    else:
        out.append(AssumptionResult("H3 additive noise", True, "multiplicative noise", applicable=False))
    if noise.cancellation and noise.K > 0:
        xf = (np.arange(4096) + 0.5) / 4096
        means = np.abs(noise.coefficients(xf).mean(axis=1))
        bad = means > 1e-12
        if np.any(bad):
            k = int(np.argmax(bad)) + 1
            out.append(AssumptionResult("H4 cancellation", False, f"mode {k} has mean {means[k - 1]:.3e}", (k,)))
        else:
            out.append(AssumptionResult("H4 cancellation", True, f"max |mean h_k| = {means.max():.2e}"))
    else:
        out.append(AssumptionResult("H4 cancellation", True, "not claimed", applicable=False))
    ok, why = regime_check(noise, spec.alpha.alpha)
    out.append(AssumptionResult("alpha regime", ok, why or f"alpha={spec.alpha.alpha} admissible"))
    return ValidationReport(tuple(out))
