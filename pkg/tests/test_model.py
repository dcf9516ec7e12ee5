import numpy as np
import pytest
from hypothesis import given, strategies as st

from fcsl.errors import ConfigurationError
from fcsl.model import (DiffusionSpec, ModelSpec, NoiseSpec, additive_noise, builtin_model,
                        burgers_flux, h_norm_sq, identity_diffusion, linear_flux,
                        multiplicative_noise, noise_increment, smoothed_positive_part, validate,
                        zero_noise)
from fcsl.rng import PathStream
from fcsl.torus import Field, make_grid


def test_builtin_derivatives():
    m = builtin_model("burgers_frac")
    assert m.flux.Fprime(np.array(2.0)) == 2.0
    assert np.all(m.diffusion.Aprime(np.linspace(-3, 3, 7)) == 1.0)
    lin = builtin_model("linear_advection", c=1.0)
    assert np.all(lin.flux.Fprime(np.linspace(-1, 1, 5)) == 1.0)
    por = builtin_model("degenerate_porous", smoothing=0.05)
    assert por.diffusion.Aprime(np.array(-1.0)) == 0.0
    assert por.diffusion.Aprime(np.array(1.0)) == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        builtin_model("heat")


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_engquist_osher_consistency_and_monotonicity(a, b):
    for flux in (burgers_flux(), linear_flux(-0.7)):
        G = flux.numerical_flux
        assert G(np.array(a), np.array(a)) == pytest.approx(flux.F(np.array(a)), abs=1e-9 * (1 + a * a))
        # non-decreasing in the left state, non-increasing in the right
        assert G(np.array(a + 0.1), np.array(b)) >= G(np.array(a), np.array(b)) - 1e-12
        assert G(np.array(a), np.array(b + 0.1)) <= G(np.array(a), np.array(b)) + 1e-12


def test_tabulated_split_matches_closed_form():
    f = burgers_flux()
    tab = type(f)(F=f.F, Fprime=f.Fprime, name="tabulated")
    z = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(tab.eo_plus(z), f.eo_plus(z), atol=1e-6)
    np.testing.assert_allclose(tab.eo_minus(z), f.eo_minus(z), atol=1e-6)


def test_zero_noise_increment():
    g = make_grid(16)
    inc = noise_increment(zero_noise(), Field.constant(g, 1.0), 1e-3, PathStream(0))
    assert np.all(inc.values == 0)


def test_cancellation_increment_has_zero_mean():
    g = make_grid(64)
    spec = additive_noise(8, family="trig")
    rng = PathStream(4)
    for _ in range(20):
        inc = noise_increment(spec, Field.constant(g, 0.0), 1e-2, rng)
        assert abs(inc.values.mean()) < 1e-12


def test_increment_variance_monte_carlo():
    # closed form: Var at x = dt * sum_k h_k(x)^2
    g = make_grid(32)
    spec = additive_noise(4, q=2.0, family="sine")
    dt, m = 1e-3, 10000
    rng = PathStream(11)
    u = Field.constant(g, 0.0)
    draws = np.array([noise_increment(spec, u, dt, rng).values for _ in range(m)])
    expected = dt * np.sum(spec.discretize(g) ** 2, axis=0)
    mask = expected > 1e-3 * expected.max()
    np.testing.assert_allclose(draws.var(axis=0)[mask], expected[mask], rtol=0.05)


def test_noise_increment_reproducible():
    g = make_grid(16)
    spec = multiplicative_noise(4)
    u = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    a = noise_increment(spec, u, 1e-2, PathStream(3, 1)).values
    b = noise_increment(spec, u, 1e-2, PathStream(3, 1)).values
    assert a.tobytes() == b.tobytes()


def test_h_norm_sq_values():
    assert h_norm_sq(zero_noise(), 0.3, 1.0) == 0.0
    one = NoiseSpec(K=1, family="sine")
    assert h_norm_sq(one, 0.1, 5.0) == pytest.approx(np.sin(0.2 * np.pi) ** 2)
    four = additive_noise(4, q=2.0)
    assert h_norm_sq(four, 0.25, 0.0) == pytest.approx(1 + 1 / 81, rel=1e-14)


@pytest.mark.parametrize("name", ["burgers_frac", "linear_advection", "degenerate_porous"])
def test_builtins_validate(name):
    for noise in (zero_noise(), additive_noise(8)):
        rep = validate(builtin_model(name, noise=noise), (-10, 10))
        assert rep.passed, str(rep)
    assert validate(builtin_model("burgers_frac"), (-5, 5)).passed


def test_decreasing_diffusion_has_witness():
    bad = DiffusionSpec(A=lambda z: -np.asarray(z, float), Aprime=lambda z: -np.ones_like(z), lipschitz_const=1.0)
    m = ModelSpec(burgers_flux(), bad, zero_noise(), 0.3)
    r = validate(m)["A2 monotone diffusion"]
    assert not r.passed and r.witness[0] < r.witness[1]


def test_superlinear_multiplicative_noise_fails_growth():
    sq = NoiseSpec(kind="multiplicative", K=1, family="constant", cancellation=False, g_name="square")
    m = ModelSpec(burgers_flux(), identity_diffusion(), sq, 0.3)
    rep = validate(m)
    assert not rep["A3 noise growth"].passed
    assert abs(rep["A3 noise growth"].witness[0]) > 5


def test_alpha_regime_for_joint_noise():
    with pytest.raises(ConfigurationError, match=r"alpha in \(0, 1/2\)"):
        ModelSpec(burgers_flux(), identity_diffusion(), multiplicative_noise(4), 0.7)
    # additive noise, or multiplicative noise without x dependence, is fine for alpha >= 1/2
    ModelSpec(burgers_flux(), identity_diffusion(), additive_noise(4), 0.7)
    flat = NoiseSpec(kind="multiplicative", K=1, family="constant", cancellation=False)
    ModelSpec(burgers_flux(), identity_diffusion(), flat, 0.7)


def test_smoothed_positive_part_properties():
    d = smoothed_positive_part(0.1)
    z = np.linspace(-2, 2, 4001)
    a = d.A(z)
    assert np.all(np.diff(a) >= -1e-15)
    assert np.all(a[z <= -0.1] == 0)
    shift = a[z >= 0.1] - z[z >= 0.1]
    assert np.ptp(shift) < 1e-12  # unit slope beyond the smoothing band
    assert np.max(np.abs(np.diff(a) / np.diff(z))) <= d.lipschitz_const + 1e-9
