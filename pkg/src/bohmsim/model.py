"""Anharmonic two-dimensional oscillator: potential, forces and initial state.

The Hamiltonian is

    H = (px^2 + py^2) / 2m + (wx^2 x^2 + wy^2 y^2) / 2 - kappa x y
        + alpha/3 (x^3 + y^3) + beta/4 (x^4 + y^4)

and the initial state is the equal-weight superposition of the four lowest
harmonic-oscillator eigenstates psi_00, psi_01, psi_10, psi_11.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainTooSmallError

__all__ = [
    "PhysParams",
    "GridSpec",
    "paper_params",
    "default_grid",
    "potential",
    "grad_potential",
    "hermite",
    "eigenstate",
    "initial_state",
]


@dataclass(frozen=True)
class PhysParams:
    """Physical constants of the Hamiltonian (all dimensionless)."""

    kappa: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    hbar: float = 1.0
    m: float = 1.0
    omega_x: float = 1.0
    omega_y: float = 1.0

    def __post_init__(self):
        for name in ("m", "omega_x", "omega_y", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")

    @property
    def is_paper_regime(self) -> bool:
        """True for alpha/3 = 0.05, beta/4 = 0.04 with unit mass and frequencies."""
        return (
            math.isclose(self.alpha / 3, 0.05)
            and math.isclose(self.beta / 4, 0.04)
            and self.m == self.omega_x == self.omega_y == 1.0
        )

    def with_(self, **changes) -> "PhysParams":
        return replace(self, **changes)


def paper_params(kappa: float = 1.0, hbar: float = 1.0) -> PhysParams:
    """Couplings used throughout the reference runs: alpha/3=0.05, beta/4=0.04."""
    return PhysParams(kappa=kappa, alpha=0.15, beta=0.16, hbar=hbar)


def _is_5_smooth(k: int) -> bool:
    for p in (2, 3, 5):
        while k % p == 0:
            k //= p
    return k == 1


@dataclass(frozen=True)
class GridSpec:
    """Uniform square grid of interior nodes on [-L, L]^2.

    Psi = 0 is imposed on the boundary, which is not stored.  ``n`` interior
    nodes per axis give a spacing ``dx = 2L / (n + 1)``.  The sine/cosine
    transforms used by the solver run as FFTs of length ``2 (n + 1)``, so
    ``n + 1`` must be 5-smooth (only prime factors 2, 3, 5); powers of two
    minus one (127, 255, 511) are the natural choices.
    """

    half_width: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError(f"need at least 16 nodes per axis, got {self.n}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if not _is_5_smooth(self.n + 1):
            raise ValueError(
                f"n + 1 = {self.n + 1} must have only prime factors 2, 3, 5 "
                "for the fast sine transform (try 127, 255 or 511)"
            )

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.n + 1)

    @property
    def coords(self) -> np.ndarray:
        """Interior node coordinates, strictly inside (-L, L)."""
        return -self.half_width + self.dx * np.arange(1, self.n + 1)

    @property
    def coords_with_boundary(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(0, self.n + 2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays with ``X[i, j] = x_i`` and ``Y[i, j] = y_j``."""
        c = self.coords
        return np.meshgrid(c, c, indexing="ij")

    def wavenumbers(self) -> np.ndarray:
        """Sine-mode wavenumbers pi j / 2L, j = 1..n."""
        return np.pi * np.arange(1, self.n + 1) / (2.0 * self.half_width)


def default_grid(hbar: float = 1.0) -> GridSpec:
    """Box and resolution used when a run does not override them.

    The packet width scales as sqrt(hbar), so the box shrinks with hbar down
    to L = 4; 255 interior nodes keep dx / sqrt(hbar) <= 0.14 over the
    range hbar in [0.05, 1].
    """
    L = max(4.0, 8.0 * math.sqrt(hbar))
    return GridSpec(half_width=L, n=255)


def potential(params: PhysParams, x, y):
    """V(x, y) of the anharmonic oscillator; broadcasts over arrays."""
    p = params
    return (
        0.5 * (p.omega_x**2 * x * x + p.omega_y**2 * y * y)
        - p.kappa * x * y
        + p.alpha / 3.0 * (x**3 + y**3)
        + p.beta / 4.0 * (x**4 + y**4)
    )


def grad_potential(params: PhysParams, x, y):
    """Analytic gradient (dV/dx, dV/dy)."""
    p = params
    gx = p.omega_x**2 * x - p.kappa * y + p.alpha * x * x + p.beta * x**3
    gy = p.omega_y**2 * y - p.kappa * x + p.alpha * y * y + p.beta * y**3
    return gx, gy


def hermite(n: int, x):
    """Physicists' Hermite polynomial H_n(x) by the three-term recurrence."""
    if n < 0:
        raise ValueError(f"Hermite order must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev
    h = 2.0 * x
    for k in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h


def eigenstate(n: int, m: int, hbar: float, x, y):
    """Harmonic-oscillator eigenfunction psi_nm(x, y) for unit mass and frequency."""
    if n < 0 or m < 0:
        raise ValueError(f"orders must be non-negative, got ({n}, {m})")
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = math.sqrt(hbar)
    norm = 1.0 / math.sqrt(2.0 ** (n + m) * math.factorial(n) * math.factorial(m) * math.pi * hbar)
    # grouping keeps psi_nm(x, y) == psi_mn(y, x) bit for bit
    return (norm * np.exp(-(x * x + y * y) / (2.0 * hbar))) * (hermite(n, x / s) * hermite(m, y / s))


def initial_state(grid: GridSpec, hbar: float, params: PhysParams | None = None, boundary_tol: float = 1e-8):
    """Equal superposition (psi_00 + psi_01 + psi_10 + psi_11) / 2 on ``grid``.

    Returns a :class:`bohmsim.tdse.WaveField` at t = 0.  Raises
    :class:`DomainTooSmallError` if the amplitude on the outermost interior
    ring exceeds ``boundary_tol`` times the peak.
    """
    from .tdse import WaveField

    if params is None:
        params = PhysParams(hbar=hbar)
    elif params.hbar != hbar:
        raise ValueError("params.hbar and hbar disagree")
    X, Y = grid.mesh()
    e = lambda a, b: eigenstate(a, b, hbar, X, Y)  # noqa: E731
    psi = 0.5 * ((e(0, 0) + e(1, 1)) + (e(0, 1) + e(1, 0)))
    check_containment(psi, boundary_tol, DomainTooSmallError)
    return WaveField(grid=grid, t=0.0, values=psi.astype(complex), params=params)


def check_containment(values: np.ndarray, tol: float, exc: type[Exception]) -> None:
    a = np.abs(values)
    peak = a.max()
    ring = max(a[0, :].max(), a[-1, :].max(), a[:, 0].max(), a[:, -1].max())
    if ring > tol * peak:
        raise exc(f"boundary amplitude {ring:.3e} exceeds {tol:g} x peak {peak:.3e}")
