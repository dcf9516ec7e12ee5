import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fcsl.errors import DomainError, ShapeError
from fcsl.torus import (Field, TorusGrid, forward_transform, inverse_transform, lp_norm,
                        make_grid)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_grid_geometry():
    g = make_grid(16)
    assert g.dx == 1 / 16
    np.testing.assert_allclose(g.x, (np.arange(16) + 0.5) / 16)
    assert list(g.wavenumbers[:9]) == [0, 1, 2, 3, 4, 5, 6, 7, 8]
    assert g.wavenumbers[8] == 8  # Nyquist stored as +n/2
    assert list(g.rfft_wavenumbers) == list(range(9))


@pytest.mark.parametrize("n", [7, 6, 2**21, 15])
def test_bad_grids(n):
    with pytest.raises(Exception):
        TorusGrid(n)


def test_field_is_immutable_copy():
    g = make_grid(8)
    src = np.arange(8.0)
    f = Field(g, src)
    src[0] = 99
    assert f.values[0] == 0
    with pytest.raises(ValueError):
        f.values[1] = 3


def test_field_rejects_shape_and_nan():
    g = make_grid(8)
    with pytest.raises(ShapeError):
        Field(g, np.zeros(9))
    with pytest.raises(DomainError):
        Field(g, np.full(8, np.nan))


def test_dft_against_direct_sum():
    g = make_grid(16)
    rng = np.random.default_rng(1)
    v = rng.normal(size=16)
    c = forward_transform(Field(g, v))
    j = np.arange(16)
    for k in range(-7, 9):
        direct = np.sum(v * np.exp(-2j * np.pi * k * j / 16)) / 16
        assert abs(c.at(k) - direct) < 1e-14


@given(arrays(np.float64, 32, elements=finite))
def test_transform_round_trip(v):
    g = make_grid(32)
    back = inverse_transform(forward_transform(Field(g, v))).values
    np.testing.assert_allclose(back, v, atol=1e-12 * (1 + np.abs(v).max()))


@given(arrays(np.float64, 16, elements=finite), arrays(np.float64, 16, elements=finite),
       st.sampled_from([1.0, 1.5, 2.0, 3.0, 7.0, np.inf]))
def test_lp_norm_triangle_and_homogeneity(a, b, p):
    tol = 1e-9 * (1 + lp_norm(a, p) + lp_norm(b, p))
    assert lp_norm(a + b, p) <= lp_norm(a, p) + lp_norm(b, p) + tol
    assert abs(lp_norm(-2.5 * a, p) - 2.5 * lp_norm(a, p)) <= 2.5 * tol


def test_lp_norm_values():
    g = make_grid(64)
    f = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    assert lp_norm(f, 2) == pytest.approx(np.sqrt(0.5), rel=1e-12)
    assert lp_norm(f, 1) == pytest.approx(2 / np.pi, rel=1e-3)
    assert lp_norm(Field.constant(g, -3.0), 5) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        lp_norm(f, 0.5)


def test_large_p_does_not_overflow():
    v = np.full(8, 1e200)
    assert lp_norm(v, 8) == pytest.approx(1e200)
