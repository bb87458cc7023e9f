"""Sine-series representation of fields that vanish on the box boundary.

A field sampled on the interior nodes of a :class:`GridSpec` is expanded as

    psi(x, y) = sum_ab c_ab sin(k_a (x + L)) sin(k_b (y + L)),  k_a = pi a / 2L.

The expansion is exact for the sampled values; derivatives of any order and
point values anywhere in the box follow from it.
"""
from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .model import GridSpec

_SIGN = (1.0, 1.0, -1.0, -1.0)


def coefficients(values: np.ndarray) -> np.ndarray:
    """Sine coefficients c_ab of nodal values (n x n)."""
    n = values.shape[0]
    return sfft.dstn(values, type=1) / float((n + 1) ** 2)


def to_nodes(coef: np.ndarray) -> np.ndarray:
    """Inverse of :func:`coefficients`: values on the interior nodes."""
    return sfft.dstn(coef, type=1) / 4.0


def _synth_axis(a: np.ndarray, k: np.ndarray, order: int, axis: int) -> np.ndarray:
    """Evaluate the ``order``-th derivative along ``axis`` at all nodes incl. boundary."""
    shape = [1] * a.ndim
    shape[axis] = k.size
    a = a * (_SIGN[order % 4] * k.reshape(shape) ** order)
    pad = [(0, 0)] * a.ndim
    pad[axis] = (1, 1)
    if order % 2 == 0:
        out = sfft.dst(a, type=1, axis=axis) / 2.0
        return np.pad(out, pad)
    return sfft.dct(np.pad(a, pad), type=1, axis=axis) / 2.0


def synthesize(coef: np.ndarray, grid: GridSpec, dx_order: int = 0, dy_order: int = 0) -> np.ndarray:
    """Mixed derivative d^(dx_order+dy_order) psi / dx^.. dy^.. on the (n+2)^2 node set.

    The returned array includes the boundary nodes (index 0 and n+1 on each axis).
    """
    k = grid.wavenumbers()
    out = _synth_axis(coef, k, dx_order, 0)
    return _synth_axis(out, k, dy_order, 1)


def hermite_data(coef: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Stack (f, f_x, f_y, f_xy) on the (n+2)^2 node set, shape (n+2, n+2, 4)."""
    return np.stack(
        [
            synthesize(coef, grid, 0, 0),
            synthesize(coef, grid, 1, 0),
            synthesize(coef, grid, 0, 1),
            synthesize(coef, grid, 1, 1),
        ],
        axis=-1,
    )


def kinetic_symbol(grid: GridSpec, hbar: float, m: float) -> np.ndarray:
    """Eigenvalues hbar^2 (k_a^2 + k_b^2) / 2m of the kinetic operator per sine mode."""
    k2 = grid.wavenumbers() ** 2
    return hbar**2 * (k2[:, None] + k2[None, :]) / (2.0 * m)


def _basis(k: np.ndarray, s: np.ndarray, order: int) -> np.ndarray:
    arg = np.outer(s, k)
    f = np.sin(arg) if order % 2 == 0 else np.cos(arg)
    return _SIGN[order % 4] * f * k**order


def evaluate(coef: np.ndarray, grid: GridSpec, x, y, dx_order: int = 0, dy_order: int = 0) -> np.ndarray:
    """Point values of a derivative of the sine series at arbitrary (x, y).

    Costs O(n^2) per point; intended for diagnostics, not inner loops.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = grid.wavenumbers()
    bx = _basis(k, x + grid.L, dx_order)
    by = _basis(k, y + grid.L, dy_order)
    return np.einsum("pb,pb->p", bx @ coef, by)
