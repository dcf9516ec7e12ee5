import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fcsl.errors import ConfigurationError, DomainError, InsufficientDataError
from fcsl.kinetic import (KineticTestFunction, TrigPoly, ZetaGrid, bump_profile, defect_estimate,
                          kinetic_function, kinetic_residual, measure_tail, parabolic_defect,
                          parabolic_defect_mass, ramp_profile)
from fcsl.model import ModelSpec, additive_noise, builtin_model, burgers_flux, zero_diffusion, zero_noise
from fcsl.operators import apply_frac, fractional_constant
from fcsl.solver import SolverConfig, evolve
from fcsl.torus import Field, make_grid

ZG = ZetaGrid(-2.0, 2.0, 80)


def test_kinetic_function_of_zero():
    f = kinetic_function(Field.constant(make_grid(16), 0.0), ZG)
    assert np.all(f[:, ZG.levels < 0] == 1) and np.all(f[:, ZG.levels >= 0] == 0)


@given(arrays(np.float64, 16, elements=st.floats(-1.9, 1.9)))
def test_kinetic_function_structure(v):
    f = kinetic_function(Field(make_grid(16), v), ZG)
    assert set(np.unique(f)) <= {0, 1}
    assert np.all(np.diff(f.astype(int), axis=1) <= 0)
    # int (f - 1_{0 > zeta}) dzeta = u up to one cell
    recon = ((f.astype(int) - (ZG.levels < 0)[None, :]) * ZG.dzeta).sum(axis=1)
    assert np.all(np.abs(recon - v) <= ZG.dzeta + 1e-12)


def test_kinetic_function_sine_slice():
    g = make_grid(32)
    u = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    zg = ZetaGrid(-1.5, 1.5, 30)  # level 15 sits at 0.05
    j = 15
    assert np.array_equal(kinetic_function(u, zg)[:, j], (u.values > zg.levels[j]).astype(np.uint8))
    with pytest.raises(DomainError):
        kinetic_function(u, ZetaGrid(-0.5, 0.5, 16))


def test_defect_vanishes_for_constants_and_zero_diffusion():
    g = make_grid(32)
    m = builtin_model("burgers_frac")
    assert np.all(parabolic_defect(Field.constant(g, 0.3), m, ZG) == 0)
    u = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    assert np.all(parabolic_defect(u, builtin_model("linear_advection"), ZG, rtol=None) == 0)


def test_defect_of_smoothed_step_concentrates():
    g = make_grid(64)
    u = Field.from_function(g, lambda x: np.tanh(20 * (x - 0.5)) * (np.abs(x - 0.5) < 0.25)
                            + np.sign(x - 0.5) * (np.abs(x - 0.5) >= 0.25))
    eta = parabolic_defect(u, builtin_model("burgers_frac", alpha=0.3), ZG)
    assert np.all(eta >= 0) and eta.sum() > 0
    inside = (ZG.levels > u.values.min()) & (ZG.levels < u.values.max())
    assert np.all(eta[:, ~inside] == 0)
    per_cell = eta.sum(axis=1)
    peak = g.x[np.argmax(per_cell)]
    assert min(abs(peak - 0.5), peak, 1 - peak) < 0.05
    assert per_cell.max() > 3 * per_cell.min()


def test_defect_total_equals_dirichlet_form():
    # A = identity: total eta_1 mass is <(-Delta)^a u, u> for the trigonometric interpolant
    g = make_grid(32)
    u = Field.from_function(g, lambda x: np.tanh(3 * np.sin(2 * np.pi * x)))
    m = builtin_model("burgers_frac", alpha=0.3)
    total = parabolic_defect_mass(u, m, interpolation="spectral", rtol=None).sum() * g.dx
    form = np.dot(apply_frac(u.values, 0.3), u.values) * g.dx
    assert total == pytest.approx(form, rel=1e-6)
    zg = ZetaGrid(-1.2, 1.2, 48)
    dens = parabolic_defect(u, m, zg, interpolation="spectral", rtol=None)
    assert dens.sum() * zg.dzeta * g.dx == pytest.approx(form, rel=1e-6)


def test_defect_against_brute_force_double_sum():
    # oracle: direct midpoint sum over (x_i, z) pairs of C (u(x+z) - u(x))^2 / 2 |z|^(-1-2a)
    n, alpha = 32, 0.3
    g = make_grid(n)
    ufun = lambda y: np.tanh(2 - 3 * np.sin(2 * np.pi * y))
    u = Field.from_function(g, ufun)
    Z, h = 6.0, 2e-4
    z = np.arange(-Z + h / 2, Z, h)
    acc = 0.0
    for xi in g.x:
        d = ufun(xi + z) - ufun(xi)
        acc += np.sum(0.5 * d * d * np.abs(z) ** (-1 - 2 * alpha)) * h
    # tail |z| > Z: average of the squared difference times the kernel tail
    yy = (np.arange(4096) + 0.5) / 4096
    msq = np.mean([np.mean((ufun(yy + xi) - ufun(xi)) ** 2) for xi in g.x]) * 0.5
    tail = n * msq * 2 * Z ** (-2 * alpha) / (2 * alpha)
    brute = fractional_constant(alpha) * (acc + tail) / n
    m = builtin_model("burgers_frac", alpha=alpha)
    got = parabolic_defect_mass(u, m, interpolation="spectral", rtol=None).sum() * g.dx
    assert got == pytest.approx(brute, rel=0.02)


def test_ramp_profile_shape():
    p = ramp_profile(-0.6, 0.6)
    z = np.linspace(-0.6, 0.6, 101)
    np.testing.assert_allclose(p.dpsi(z), -1.0, atol=1e-12)
    a, b = p.support
    assert abs(p.psi(a)) < 1e-12 and abs(p.psi(b)) < 1e-9
    zz = np.linspace(a, b, 20001)
    np.testing.assert_allclose(np.gradient(p.psi(zz), zz)[100:-100], p.dpsi(zz)[100:-100], atol=1e-3)


def test_bump_profile():
    p = bump_profile(0.5, 0.25)
    assert p.psi(0.5) == 1.0 and p.psi(0.8) == 0.0
    assert p.dpsi(0.5) == 0.0


def test_trigpoly_derivatives():
    r = TrigPoly(0.3, cos=(1.0, 0.0, 0.5), sin=(0.0, 2.0))
    x = np.linspace(0, 1, 257)
    h = 1e-6
    np.testing.assert_allclose(r.derivative(x), (r.value(x + h) - r.value(x - h)) / (2 * h), atol=1e-5)
    grid = make_grid(64)
    np.testing.assert_allclose(r.fractional(grid.x, 0.3), apply_frac(r.value(grid.x), 0.3), atol=1e-10)
    with pytest.raises(ConfigurationError):
        TrigPoly(cos=(1, 1, 1, 1, 1))


def _tf():
    return KineticTestFunction(TrigPoly(1.0), ramp_profile(-1.1, 1.1))


def test_residual_zero_data():
    m = ModelSpec(burgers_flux(), zero_diffusion(), zero_noise(), 0.3)
    tr = evolve(Field.constant(make_grid(32), 0.0), m, SolverConfig(grid_n=32, t_end=0.05, dt=1e-3))
    assert np.abs(kinetic_residual(tr, m, _tf()).D).max() < 1e-10


def test_residual_requires_full_record():
    m = builtin_model("burgers_frac", noise=additive_noise(4))
    u = Field.from_function(make_grid(32), lambda x: np.sin(2 * np.pi * x))
    tr = evolve(u, m, SolverConfig(grid_n=32, t_end=0.05, sample_stride=2))
    with pytest.raises(InsufficientDataError):
        kinetic_residual(tr, m, _tf())


def test_residual_with_noise_is_small_before_shock():
    # the stochastic and Ito terms must cancel the noise in the pairing
    m = builtin_model("burgers_frac", alpha=0.3, noise=additive_noise(4, amplitude=0.5))
    u = Field.from_function(make_grid(128), lambda x: 0.3 * np.sin(2 * np.pi * x))
    tf = KineticTestFunction(TrigPoly(1.0, cos=(0.3,)), bump_profile(0.0, 1.5))
    D = []
    for n in (64, 128):
        u = Field.from_function(make_grid(n), lambda x: 0.3 * np.sin(2 * np.pi * x))
        tr = evolve(u, m, SolverConfig(grid_n=n, t_end=0.1, dt=0.1 / n, seed=2))
        D.append(abs(kinetic_residual(tr, m, tf).D[-1]))
    assert D[1] < 0.75 * D[0]


def test_defect_estimate_matches_residual_and_tail():
    m = builtin_model("burgers_frac", alpha=0.3)
    g = make_grid(128)
    u = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    tr = evolve(u, m, SolverConfig(grid_n=128, t_end=0.2))
    zg = ZetaGrid(-1.2, 1.2, 96)
    est = defect_estimate(tr, zg, n_windows=4)
    assert np.all(est.density >= -1e-14)
    D = kinetic_residual(tr, m, _tf()).D[-1]
    assert est.total == pytest.approx(D, rel=1e-3)
    tails = [measure_tail(est, L) for L in np.linspace(0, 1.2, 13)]
    assert tails[0] == pytest.approx(est.total)
    assert all(b <= a + 1e-15 for a, b in zip(tails, tails[1:]))
    assert measure_tail(est, 1.05) == 0.0
    with pytest.raises(DomainError):
        measure_tail(est, 3.0)


def test_defect_estimate_csv(tmp_path):
    m = builtin_model("burgers_frac")
    tr = evolve(Field.from_function(make_grid(16), lambda x: np.sin(2 * np.pi * x)), m,
                SolverConfig(grid_n=16, t_end=0.05))
    est = defect_estimate(tr, ZetaGrid(-1.5, 1.5, 16))
    est.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0].startswith("x_index") and len(lines) == 1 + 16 * 16
