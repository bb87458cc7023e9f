import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bohmsim import spectral
from bohmsim.model import GridSpec

GRID = GridSpec(3.0, 47)


def mode(a, b, grid=GRID):
    k = grid.wavenumbers()
    X, Y = grid.mesh()
    L = grid.L
    return np.sin(k[a - 1] * (X + L)) * np.sin(k[b - 1] * (Y + L))


def test_coefficients_of_single_mode():
    c = spectral.coefficients(mode(3, 5))
    expected = np.zeros_like(c)
    expected[2, 4] = 1.0
    assert np.allclose(c, expected, atol=1e-13)


@given(st.integers(0, 2**32 - 1))
def test_round_trip(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(GRID.n, GRID.n)) + 1j * rng.normal(size=(GRID.n, GRID.n))
    assert np.allclose(spectral.to_nodes(spectral.coefficients(v)), v, atol=1e-12)


@pytest.mark.parametrize("ox,oy", [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (3, 0)])
def test_synthesized_derivatives_of_a_mode(ox, oy):
    a, b = 4, 7
    k = GRID.wavenumbers()
    ka, kb = k[a - 1], k[b - 1]
    xs = GRID.coords_with_boundary
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    L = GRID.L

    def d(order, kk, z):
        f = [np.sin, np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u)][order % 4]
        return kk**order * f(kk * (z + L))

    expected = d(ox, ka, X) * d(oy, kb, Y)
    got = spectral.synthesize(spectral.coefficients(mode(a, b)), GRID, ox, oy)
    assert got.shape == (GRID.n + 2, GRID.n + 2)
    assert np.allclose(got, expected, atol=1e-10 * max(1.0, ka**ox * kb**oy))


def test_evaluate_agrees_with_nodes_and_between_nodes():
    rng = np.random.default_rng(1)
    c = np.zeros((GRID.n, GRID.n), complex)
    c[:6, :6] = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    nodes = spectral.to_nodes(c)
    i, j = 10, 31
    x, y = GRID.coords[i], GRID.coords[j]
    assert spectral.evaluate(c, GRID, [x], [y])[0] == pytest.approx(nodes[i, j], abs=1e-12)
    # smooth band-limited field: compare with direct sum at an off-grid point
    k = GRID.wavenumbers()
    xq, yq = 0.123, -1.77
    direct = np.sin(k[:6] * (xq + GRID.L)) @ c[:6, :6] @ np.sin(k[:6] * (yq + GRID.L))
    assert spectral.evaluate(c, GRID, [xq], [yq])[0] == pytest.approx(direct, abs=1e-12)
    dx_direct = (k[:6] * np.cos(k[:6] * (xq + GRID.L))) @ c[:6, :6] @ np.sin(k[:6] * (yq + GRID.L))
    assert spectral.evaluate(c, GRID, [xq], [yq], 1, 0)[0] == pytest.approx(dx_direct, abs=1e-11)


def test_hermite_data_layout():
    c = spectral.coefficients(mode(2, 3))
    H = spectral.hermite_data(c, GRID)
    assert H.shape == (GRID.n + 2, GRID.n + 2, 4)
    assert np.allclose(H[..., 1], spectral.synthesize(c, GRID, 1, 0))
    assert np.allclose(H[..., 3], spectral.synthesize(c, GRID, 1, 1))
    assert np.allclose(H[0, :, 0], 0.0) and np.allclose(H[:, -1, 0], 0.0)


def test_kinetic_symbol():
    T = spectral.kinetic_symbol(GRID, hbar=0.5, m=2.0)
    k = GRID.wavenumbers()
    assert T[2, 5] == pytest.approx(0.25 / 4.0 * (k[2] ** 2 + k[5] ** 2))
