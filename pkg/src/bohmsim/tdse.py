"""Split-operator solver for the time-dependent Schroedinger equation.

Strang splitting with the kinetic factor applied exactly in the sine basis,
which enforces psi = 0 on the box boundary.  Step sizes adapt by step
doubling: one step of ``dt`` is compared with two steps of ``dt / 2``.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import spectral
from .errors import BoundaryLeakError, NormDriftError
from .model import GridSpec, PhysParams, check_containment, potential

log = logging.getLogger(__name__)

__all__ = [
    "WaveField",
    "SnapshotSeries",
    "SnapshotStream",
    "Evolver",
    "step",
    "evolve",
    "norm",
    "energy",
    "apply_hamiltonian",
]


@dataclass
class WaveField:
    """Complex amplitudes on the interior nodes; ``values[i, j] = psi(x_i, y_j)``."""

    grid: GridSpec
    t: float
    values: np.ndarray
    params: PhysParams

    def __post_init__(self):
        n = self.grid.n
        if self.values.shape != (n, n):
            raise ValueError(f"values must have shape {(n, n)}, got {self.values.shape}")
        self.values = np.asarray(self.values, dtype=complex)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.t, self.values.copy(), self.params)


def norm(field: WaveField) -> float:
    """Discrete norm sum |psi|^2 dx^2."""
    return float(np.sum(np.abs(field.values) ** 2) * field.grid.dx**2)


def apply_hamiltonian(field: WaveField) -> np.ndarray:
    """H psi on the interior nodes (spectral kinetic term + pointwise potential)."""
    prop = _propagator(field.params, field.grid)
    c = spectral.coefficients(field.values)
    return spectral.to_nodes(prop.kinetic * c) + prop.V * field.values


def energy(field: WaveField) -> float:
    """<psi|H|psi> on the grid."""
    h = apply_hamiltonian(field)
    return float(np.real(np.vdot(field.values, h)) * field.grid.dx**2)


class _Propagator:
    """Precomputed potential, kinetic symbol and cached phase factors for one (params, grid)."""

    def __init__(self, params: PhysParams, grid: GridSpec):
        self.params = params
        self.grid = grid
        X, Y = grid.mesh()
        self.V = potential(params, X, Y)
        self.kinetic = spectral.kinetic_symbol(grid, params.hbar, params.m)
        self._scale = 1.0 / (4.0 * (grid.n + 1) ** 2)
        self._pot: dict[float, np.ndarray] = {}
        self._kin: dict[float, np.ndarray] = {}

    def pot(self, dt: float) -> np.ndarray:
        f = self._pot.get(dt)
        if f is None:
            f = self._pot[dt] = np.exp(-1j * self.V * (dt / self.params.hbar))
        return f

    def kin(self, dt: float) -> np.ndarray:
        f = self._kin.get(dt)
        if f is None:
            # transform normalisation folded into the phase factor
            f = self._kin[dt] = np.exp(-1j * self.kinetic * (dt / self.params.hbar)) * self._scale
        return f

    def kick(self, psi: np.ndarray, dt: float) -> np.ndarray:
        return sfft.dstn(sfft.dstn(psi, type=1) * self.kin(dt), type=1)

    def strang(self, psi: np.ndarray, dt: float) -> np.ndarray:
        h = self.pot(dt / 2)
        return self.kick(psi * h, dt) * h

    def two_halves(self, psi: np.ndarray, dt: float) -> np.ndarray:
        q = self.pot(dt / 4)
        psi = self.kick(psi * q, dt / 2) * self.pot(dt / 2)
        return self.kick(psi, dt / 2) * q


@lru_cache(maxsize=8)
def _propagator(params: PhysParams, grid: GridSpec) -> _Propagator:
    return _Propagator(params, grid)


def step(field: WaveField, dt: float) -> WaveField:
    """Advance by one Strang step: V/2, kinetic (exact in the sine basis), V/2."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    prop = _propagator(field.params, field.grid)
    return WaveField(field.grid, field.t + dt, prop.strang(field.values, dt), field.params)


@dataclass
class SnapshotSeries:
    """Snapshots at a uniform interval plus run metadata."""

    frames: list[WaveField]
    dt_snap: float
    meta: dict = dc_field(default_factory=dict)
    history: list[tuple[float, float, float]] = dc_field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, k: int) -> WaveField:
        return self.frames[k]

    def frame(self, k: int) -> WaveField:
        return self.frames[k]

    @property
    def count(self) -> int:
        return len(self.frames)

    @property
    def t0(self) -> float:
        return self.frames[0].t

    @property
    def t_end(self) -> float:
        return self.frames[-1].t

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.frames])

    @property
    def grid(self) -> GridSpec:
        return self.frames[0].grid

    @property
    def params(self) -> PhysParams:
        return self.frames[0].params


class Evolver:
    """Adaptive Strang integrator producing snapshots at multiples of ``dt_snap``.

    The internal step is ``dt_snap / 2**k``.  A step is accepted when the
    step-doubling estimate ||psi_dt - psi_{dt/2,dt/2}|| (discrete L2) is at
    most ``tol``; the two-half-step result is kept.  The step doubles again
    once the estimate drops below ``tol / 16`` and the position is aligned.
    """

    def __init__(
        self,
        field: WaveField,
        t_end: float,
        dt_snap: float,
        dt_max: float = 1e-2,
        *,
        tol: float = 1e-8,
        dt_min: float = 1e-5,
        norm_tol: float = 1e-3,
        leak_tol: float = 1e-6,
        track_energy: bool = True,
    ):
        if t_end < field.t:
            raise ValueError("t_end precedes the field time")
        if not dt_snap > 0 or not dt_max > 0:
            raise ValueError("dt_snap and dt_max must be positive")
        span = t_end - field.t
        self.n_intervals = int(round(span / dt_snap))
        if abs(self.n_intervals * dt_snap - span) > 1e-9 * max(1.0, span):
            raise ValueError(f"t_end - t0 = {span} is not a multiple of dt_snap = {dt_snap}")
        self.kmax = int(math.floor(math.log2(dt_snap / dt_min) + 1e-12))
        self.kmin = max(0, int(math.ceil(math.log2(dt_snap / dt_max) - 1e-12)))
        if self.kmin > self.kmax:
            raise ValueError("dt_max is smaller than dt_min")
        self.field = field
        self.t0 = field.t
        self.t_end = t_end
        self.dt_snap = dt_snap
        self.tol = tol
        self.norm_tol = norm_tol
        self.leak_tol = leak_tol
        self.track_energy = track_energy
        self.prop = _propagator(field.params, field.grid)
        self.level = self.kmin
        self.history: list[tuple[float, float, float]] = []
        self.accepted = 0
        self.rejected = 0
        self.tol_violations = 0
        self.max_norm_dev = 0.0

    def settings(self) -> dict:
        return {
            "dt_snap": self.dt_snap,
            "dt_max": self.dt_snap / 2**self.kmin,
            "dt_min": self.dt_snap / 2**self.kmax,
            "tol_step": self.tol,
            "norm_tol": self.norm_tol,
            "leak_tol": self.leak_tol,
        }

    def stats(self) -> dict:
        return {
            "steps_accepted": self.accepted,
            "steps_rejected": self.rejected,
            "tol_violations": self.tol_violations,
            "max_norm_deviation": self.max_norm_dev,
        }

    def _record(self, f: WaveField) -> None:
        check_containment(f.values, self.leak_tol, BoundaryLeakError)
        e = energy(f) if self.track_energy else float("nan")
        self.history.append((f.t, norm(f), e))

    def __iter__(self):
        f = self.field
        self._record(f)
        yield f
        psi = f.values
        dx2 = f.grid.dx ** 2
        total = 2**self.kmax
        for k in range(self.n_intervals):
            pos = 0
            while pos < total:
                dt = self.dt_snap / 2**self.level
                units = 2 ** (self.kmax - self.level)
                full = self.prop.strang(psi, dt)
                half = self.prop.two_halves(psi, dt)
                err = math.sqrt(np.sum(np.abs(full - half) ** 2) * dx2)
                if err > self.tol and self.level < self.kmax:
                    self.level += 1
                    self.rejected += 1
                    continue
                if err > self.tol:
                    self.tol_violations += 1
                psi = half
                pos += units
                self.accepted += 1
                nrm = float(np.sum(np.abs(psi) ** 2) * dx2)
                dev = abs(nrm - 1.0)
                self.max_norm_dev = max(self.max_norm_dev, dev)
                if dev > self.norm_tol:
                    t = self.t0 + (k + pos / total) * self.dt_snap
                    raise NormDriftError(f"norm {nrm:.6f} at t={t:.4f} outside 1 +/- {self.norm_tol:g}")
                if err < self.tol / 16 and self.level > self.kmin and pos % (2 * units) == 0:
                    self.level -= 1
            f = WaveField(f.grid, self.t0 + (k + 1) * self.dt_snap, psi, f.params)
            self._record(f)
            yield f


def evolve(field: WaveField, t_end: float, dt_snap: float, dt_max: float = 1e-2, **kw) -> SnapshotSeries:
    """Evolve to ``t_end`` keeping every snapshot in memory.

    Snapshots land on ``t0, t0 + dt_snap, ..., t_end``.  Raises
    :class:`NormDriftError` or :class:`BoundaryLeakError` on failure.
    """
    ev = Evolver(field, t_end, dt_snap, dt_max, **kw)
    frames = list(ev)
    meta = {"params": field.params, "grid": field.grid, **ev.settings(), **ev.stats()}
    return SnapshotSeries(frames=frames, dt_snap=dt_snap, meta=meta, history=ev.history)


class SnapshotStream:
    """Lazily evolved snapshot sequence keeping only the most recent ``keep`` frames.

    Exposes the same ``frame(k)`` / ``count`` / ``t0`` / ``dt_snap`` surface as
    :class:`SnapshotSeries`, so trajectories can be integrated while the
    wave function is being propagated without holding the whole history.
    """

    def __init__(self, field: WaveField, t_end: float, dt_snap: float, dt_max: float = 1e-2, keep: int = 3, **kw):
        self.evolver = Evolver(field, t_end, dt_snap, dt_max, **kw)
        self._it = iter(self.evolver)
        self._frames: deque[tuple[int, WaveField]] = deque(maxlen=keep)
        self._next = 0
        self.dt_snap = dt_snap
        self.t0 = field.t
        self.count = self.evolver.n_intervals + 1
        self.grid = field.grid
        self.params = field.params

    @property
    def t_end(self) -> float:
        return self.t0 + (self.count - 1) * self.dt_snap

    @property
    def history(self):
        return self.evolver.history

    @property
    def meta(self) -> dict:
        return {"params": self.params, "grid": self.grid, **self.evolver.settings(), **self.evolver.stats()}

    def frame(self, k: int) -> WaveField:
        if not 0 <= k < self.count:
            raise IndexError(k)
        while self._next <= k:
            self._frames.append((self._next, next(self._it)))
            self._next += 1
        for idx, f in self._frames:
            if idx == k:
                return f
        raise IndexError(f"snapshot {k} already discarded by the stream")

    __getitem__ = frame

    def __len__(self) -> int:
        return self.count
