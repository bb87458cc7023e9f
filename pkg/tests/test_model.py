import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bohmsim.errors import BoundaryLeakError, DomainTooSmallError
from bohmsim.model import (
    GridSpec,
    PhysParams,
    default_grid,
    eigenstate,
    grad_potential,
    hermite,
    initial_state,
    paper_params,
    potential,
)
from bohmsim.tdse import norm

coord = st.floats(-3.0, 3.0, allow_nan=False)
params_st = st.builds(
    PhysParams,
    kappa=st.floats(-1.5, 1.5),
    alpha=st.floats(-0.5, 0.5),
    beta=st.floats(0.0, 0.5),
    hbar=st.floats(0.05, 2.0),
    omega_x=st.just(1.0),
    omega_y=st.just(1.0),
)


def test_potential_at_origin_vanishes():
    assert potential(paper_params(1.0), 0.0, 0.0) == 0.0


def test_potential_hand_value():
    assert potential(paper_params(1.0), 1.0, 1.0) == pytest.approx(0.18, abs=1e-14)


def test_potential_harmonic_limit():
    p = PhysParams()
    x, y = 0.7, -1.3
    assert potential(p, x, y) == pytest.approx(0.5 * (x * x + y * y))


def test_grad_potential_hand_value():
    gx, gy = grad_potential(paper_params(1.0), 1.0, 1.0)
    assert gx == pytest.approx(0.31, abs=1e-14)
    assert gy == pytest.approx(0.31, abs=1e-14)
    assert grad_potential(paper_params(1.0), 0.0, 0.0) == (0.0, 0.0)


def _fd_grad(p, x, y, h=1e-5):
    gx = (potential(p, x + h, y) - potential(p, x - h, y)) / (2 * h)
    gy = (potential(p, x, y + h) - potential(p, x, y - h)) / (2 * h)
    return gx, gy


def test_grad_potential_matches_finite_differences_at_1000_points():
    rng = np.random.default_rng(7)
    p = paper_params(1.0)
    x, y = rng.uniform(-3, 3, (2, 1000))
    gx, gy = grad_potential(p, x, y)
    fx, fy = _fd_grad(p, x, y)
    scale = np.maximum(np.hypot(gx, gy), 1.0)
    assert np.max(np.abs(gx - fx) / scale) < 1e-6
    assert np.max(np.abs(gy - fy) / scale) < 1e-6


@pytest.mark.property
@given(params_st, coord, coord)
def test_grad_potential_fd_property(p, x, y):
    gx, gy = grad_potential(p, x, y)
    fx, fy = _fd_grad(p, x, y)
    scale = max(math.hypot(gx, gy), 1.0)
    assert abs(gx - fx) / scale < 1e-6
    assert abs(gy - fy) / scale < 1e-6


@pytest.mark.property
@given(params_st, coord, coord)
def test_potential_mirror_symmetric(p, x, y):
    assert potential(p, x, y) == pytest.approx(potential(p, y, x), rel=1e-14, abs=1e-14)


def test_params_validation():
    for bad in ({"m": 0.0}, {"hbar": -1.0}, {"omega_x": 0.0}, {"beta": -0.1}):
        with pytest.raises(ValueError):
            PhysParams(**bad)
    assert paper_params().is_paper_regime
    assert not PhysParams().is_paper_regime


def test_grid_validation_and_geometry():
    g = GridSpec(8.0, 255)
    assert g.dx == pytest.approx(16.0 / 256)
    assert np.all(np.abs(g.coords) < g.L)
    assert g.coords[0] == pytest.approx(-g.L + g.dx)
    with pytest.raises(ValueError):
        GridSpec(8.0, 256)  # 257 is prime
    with pytest.raises(ValueError):
        GridSpec(8.0, 15)
    with pytest.raises(ValueError):
        GridSpec(0.0, 63)


def test_default_grid_scales_with_hbar():
    assert default_grid(1.0).half_width == 8.0
    assert default_grid(0.05).half_width == 4.0
    assert default_grid(0.05).n == 255


def test_hermite_low_orders():
    x = np.linspace(-2, 2, 9)
    assert np.allclose(hermite(0, x), 1)
    assert np.allclose(hermite(1, x), 2 * x)
    assert np.allclose(hermite(2, x), 4 * x * x - 2)
    assert np.allclose(hermite(3, x), 8 * x**3 - 12 * x)
    with pytest.raises(ValueError):
        hermite(-1, x)


def test_eigenstate_origin_value():
    assert eigenstate(0, 0, 1.0, 0.0, 0.0) == pytest.approx(1 / math.sqrt(math.pi), abs=1e-6)
    y = np.linspace(-3, 3, 13)
    assert np.all(eigenstate(1, 0, 1.0, 0.0, y) == 0.0)
    with pytest.raises(ValueError):
        eigenstate(-1, 0, 1.0, 0.0, 0.0)


@pytest.mark.parametrize("hbar", [0.05, 1.0])
def test_eigenstates_orthonormal(hbar):
    g = default_grid(hbar)
    X, Y = g.mesh()
    orders = [(a, b) for a in (0, 1) for b in (0, 1)]
    states = [eigenstate(a, b, hbar, X, Y) for a, b in orders]
    for i, u in enumerate(states):
        for j, v in enumerate(states):
            ip = np.sum(u * v) * g.dx**2
            assert ip == pytest.approx(1.0 if i == j else 0.0, abs=1e-6)


def test_initial_state_norm_symmetry_and_reality():
    g = default_grid(1.0)
    f = initial_state(g, 1.0)
    assert norm(f) == pytest.approx(1.0, abs=1e-6)
    assert np.array_equal(f.values, f.values.T)
    assert np.all(f.values.imag == 0.0)


@pytest.mark.parametrize("hbar", [1.0, 0.5])
def test_initial_state_nodal_lines(hbar):
    # the state factorises as (1 + sqrt2 x/sqrt(hbar)) (1 + sqrt2 y/sqrt(hbar)) times a Gaussian
    g = default_grid(hbar)
    f = initial_state(g, hbar)
    x0 = -math.sqrt(hbar / 2)
    X, Y = g.mesh()
    gauss = np.exp(-(X**2 + Y**2) / (2 * hbar)) / (2 * math.sqrt(math.pi * hbar))
    expected = gauss * (1 + X / -x0) * (1 + Y / -x0)
    assert np.allclose(f.values.real, expected, atol=1e-14)
    row = f.values.real[:, g.n // 2 + 7]
    crossings = g.coords[:-1][np.sign(row[:-1]) != np.sign(row[1:])]
    assert crossings.size == 1
    assert abs(crossings[0] - x0) < g.dx


def test_initial_state_rejects_small_box():
    with pytest.raises(DomainTooSmallError):
        initial_state(GridSpec(3.0, 63), 1.0)
    # a leak at t = 0 is a boundary leak too
    assert issubclass(DomainTooSmallError, BoundaryLeakError)


def test_initial_state_hbar_mismatch():
    with pytest.raises(ValueError):
        initial_state(default_grid(1.0), 1.0, paper_params(1.0, hbar=0.5))
