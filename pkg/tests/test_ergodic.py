import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import wasserstein_distance

from fcsl.errors import ComparisonError, InsufficientDataError, PreconditionError
from fcsl.ergodic import (FUNCTIONALS, batch_stderr, compare_measures, empirical_measure,
                          fractional_norm, simulate_long, sobolev_norm_track, two_start_coupling,
                          w1_distance)
from fcsl.model import additive_noise, builtin_model, multiplicative_noise
from fcsl.solver import SolverConfig
from fcsl.torus import Field, make_grid

samples = arrays(np.float64, st.integers(1, 40), elements=st.floats(-100, 100))


def sine(n, amp=1.0, k=1):
    return Field.from_function(make_grid(n), lambda x: amp * np.sin(2 * np.pi * k * x))


def em(x):
    return empirical_measure(np.asarray(x, dtype=float), "L1_norm")


def test_w1_hand_values():
    assert w1_distance(em([0, 1]), em([0.5, 0.5])) == 0.5
    assert w1_distance(em([2.0]), em([-1.0])) == 3.0
    assert w1_distance(em([1, 2, 3]), em([1, 2, 3])) == 0.0
    with pytest.raises(ComparisonError):
        w1_distance(em([1.0]), empirical_measure(np.array([1.0]), "L2_norm"))


@given(samples, samples)
def test_w1_against_scipy(a, b):
    assert w1_distance(em(a), em(b)) == pytest.approx(wasserstein_distance(a, b), abs=1e-9)


@given(st.integers(1, 30), st.integers(0, 2**32))
def test_w1_metric_on_triples(n, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (em(rng.normal(size=n) * rng.uniform(0.1, 3)) for _ in range(3))
    assert w1_distance(a, b) == w1_distance(b, a)
    assert w1_distance(a, c) <= w1_distance(a, b) + w1_distance(b, c) + 1e-12


def test_empirical_measure_from_states():
    g = make_grid(16)
    m = empirical_measure([Field.constant(g, 0.0)] * 3, "L1_norm")
    assert np.all(m.samples == 0)
    two = empirical_measure([np.full(16, 1.0), np.full(16, -2.0)], "Linf_norm")
    assert sorted(two.samples) == [1.0, 2.0]
    with pytest.raises(InsufficientDataError):
        empirical_measure(np.array([]), "L1_norm")


def test_functionals():
    u = sine(64, 0.5).values
    assert FUNCTIONALS["mode_1_amplitude"](u) == pytest.approx(0.5)
    assert FUNCTIONALS["L2_norm"](u) == pytest.approx(0.5 / math.sqrt(2))


def test_batch_stderr_iid():
    x = np.random.default_rng(0).normal(size=10000)
    assert batch_stderr(x, 20) == pytest.approx(1 / 100, rel=0.4)
    with pytest.raises(InsufficientDataError):
        batch_stderr(np.ones(5))


def test_compare_identical_windows():
    x = np.random.default_rng(1).normal(size=200)
    c = compare_measures(em(x), em(x))
    assert c.w1 == 0 and c.passed


def test_fractional_norm_cases():
    g = make_grid(64)
    assert fractional_norm(np.full(64, 3.0), 0.5) == pytest.approx(0.0, abs=1e-12)
    cos = np.cos(2 * np.pi * g.x)
    assert fractional_norm(cos, 0.5) == pytest.approx(math.sqrt(2 * math.pi) / math.sqrt(2), rel=1e-12)
    full = fractional_norm(cos, 0.5, full=True)
    assert full == pytest.approx(math.sqrt((1 + 2 * math.pi) / 2), rel=1e-12)
    assert fractional_norm(np.full(64, 3.0), 0.4, q=1) == 0.0
    assert fractional_norm(cos, 0.4, q=1) > 0


def test_simulate_long_schedule():
    m = builtin_model("burgers_frac", alpha=0.3, noise=additive_noise(4))
    run = simulate_long(sine(32), m, SolverConfig(grid_n=32), T=20.0, burn_in=2.0, stride=0.5)
    assert len(run) == 36
    np.testing.assert_allclose(run.times, 2.5 + 0.5 * np.arange(36), atol=1e-9)
    empty = simulate_long(sine(32), m, SolverConfig(grid_n=32), T=2.0, burn_in=2.0)
    assert len(empty) == 0


def test_simulate_long_absorbing_zero():
    m = builtin_model("burgers_frac", alpha=0.3)
    run = simulate_long(Field.constant(make_grid(32), 0.0), m, SolverConfig(grid_n=32), T=5.0)
    assert all(np.all(v == 0) for v in run.functionals.values())


def test_simulate_long_preconditions():
    mult = builtin_model("burgers_frac", noise=multiplicative_noise(4))
    with pytest.raises(PreconditionError):
        simulate_long(sine(32), mult, SolverConfig(grid_n=32), T=1.0)
    m = builtin_model("burgers_frac", alpha=0.3, noise=additive_noise(4))
    with pytest.raises(PreconditionError):
        simulate_long(sine(32) + Field.constant(make_grid(32), 0.1), m, SolverConfig(grid_n=32), T=1.0)


def test_coupling_identical_and_isometry():
    m = builtin_model("burgers_frac", alpha=0.3, noise=additive_noise(4))
    cs = two_start_coupling(sine(32), sine(32), m, SolverConfig(grid_n=32), T=1.0)
    assert np.all(cs.distance == 0)
    # pure transport is an L1 isometry on a grid-aligned shift
    lin = builtin_model("linear_advection", c=1.0)
    n = 32
    cfg = SolverConfig(grid_n=n, dt=1.0 / n, cfl_safety=1.0)
    a = Field(make_grid(n), np.where(np.arange(n) < 8, 1.0, 0.0) - 0.25)
    b = Field(make_grid(n), np.where(np.arange(n) < 16, 1.0, 0.0) - 0.5)
    cs = two_start_coupling(a, b, lin, cfg, T=1.0)
    np.testing.assert_allclose(cs.distance, cs.initial, rtol=1e-12)


def test_coupling_decays_and_is_monotone():
    m = builtin_model("burgers_frac", alpha=0.3, noise=additive_noise(8, family="trig"))
    a = sine(32)
    cs = two_start_coupling(a, a + sine(32, 0.3), m, SolverConfig(grid_n=32, seed=1, sample_stride=10), T=10.0)
    assert np.all(np.diff(cs.distance) <= 1e-12)
    assert cs.terminal < 0.1 * cs.initial


def test_coupling_mean_mismatch():
    m = builtin_model("burgers_frac", alpha=0.3, noise=additive_noise(4))
    with pytest.raises(PreconditionError):
        two_start_coupling(sine(32), sine(32) + Field.constant(make_grid(32), 0.2), m,
                           SolverConfig(grid_n=32), T=1.0)


def test_sobolev_track_running_mean():
    vals = [np.cos(2 * np.pi * k * make_grid(32).x) for k in (1, 2)]
    tr = sobolev_norm_track(vals, 0.5)
    assert tr.running_mean[-1] == pytest.approx(tr.mean)
    assert tr.values[1] / tr.values[0] == pytest.approx(math.sqrt(2))
