"""Bohmian velocity field, quantum potential and trajectory integration.

Between snapshots psi is interpolated by cubic Hermite polynomials in time,
using d psi / dt = -(i / hbar) H psi evaluated spectrally at each snapshot.
In space two routes are available:

* ``"bicubic"``: bicubic Hermite patches built from nodal values and exact
  (spectral) nodal derivatives; compiled, used by the integrators.
* ``"spectral"``: direct summation of the sine series; exact derivatives of
  any order, O(n^2) per point, used for the quantum potential and force
  and as an independent check of the fast route.
"""
from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import _kernels as K
from . import spectral
from .errors import NodeProximityError, OutOfDomainError
from .tdse import _propagator

__all__ = [
    "FieldInterpolant",
    "Trajectory",
    "integrate",
    "integrate_batch",
    "integrate_adaptive",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "FLAG_OK",
    "FLAG_NODE",
    "FLAG_DOMAIN",
]

FLAG_OK = "ok"
FLAG_NODE = "node_proximity"
FLAG_DOMAIN = "out_of_domain"
_FLAGS = {K.OK: FLAG_OK, K.NODE: FLAG_NODE, K.DOMAIN: FLAG_DOMAIN}

_TIME_EPS = 1e-9


@dataclass
class _Frame:
    coef: np.ndarray
    coef_t: np.ndarray
    H: np.ndarray
    peak: float


class FieldInterpolant:
    """Continuous psi(t, x, y) over a snapshot series.

    ``series`` is anything with ``frame(k)``, ``count``, ``t0`` and
    ``dt_snap`` (a :class:`~bohmsim.tdse.SnapshotSeries` or a
    :class:`~bohmsim.tdse.SnapshotStream`).  Per-frame derivative data are
    computed on demand and kept in a small LRU cache, so long series can be
    streamed through in time order.
    """

    def __init__(self, series, node_guard: float = 1e-6, cache_size: int = 4):
        self.series = series
        self.grid = series.grid
        self.params = series.params
        self.t0 = float(series.t0)
        self.dt_snap = float(series.dt_snap)
        self.count = int(series.count)
        self.node_guard = node_guard
        self._cache: OrderedDict[int, _Frame] = OrderedDict()
        self._cache_size = cache_size
        self._slab_key = None
        self._slab = None

    @property
    def t_end(self) -> float:
        return self.t0 + (self.count - 1) * self.dt_snap

    def _frame(self, k: int) -> _Frame:
        fr = self._cache.get(k)
        if fr is not None:
            self._cache.move_to_end(k)
            return fr
        wf = self.series.frame(k)
        prop = _propagator(wf.params, wf.grid)
        c = spectral.coefficients(wf.values)
        ct = (-1j / wf.params.hbar) * (prop.kinetic * c + spectral.coefficients(prop.V * wf.values))
        fr = _Frame(
            coef=c,
            coef_t=ct,
            H=np.ascontiguousarray(
                np.stack([spectral.hermite_data(c, wf.grid), spectral.hermite_data(ct, wf.grid)], axis=2)
            ),
            peak=float(np.abs(wf.values).max()),
        )
        self._cache[k] = fr
        while len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return fr

    def locate(self, t: float) -> tuple[int, float]:
        """Slab index k and fractional position s in [0, 1] for time t."""
        if t < self.t0 - _TIME_EPS or t > self.t_end + _TIME_EPS:
            raise OutOfDomainError(f"t={t} outside [{self.t0}, {self.t_end}]")
        if self.count == 1:
            return 0, 0.0
        k = int(math.floor((t - self.t0) / self.dt_snap))
        k = min(max(k, 0), self.count - 2)
        s = (t - self.t0 - k * self.dt_snap) / self.dt_snap
        return k, min(max(s, 0.0), 1.0)

    def slab(self, k: int):
        """(Sa, Sb, t_k, guard) kernel data for slab [t_k, t_k+1]."""
        if self._slab_key != k:
            a = self._frame(k)
            b = self._frame(k + 1) if self.count > 1 else a
            self._slab = (a.H, b.H, self.t0 + k * self.dt_snap, self.node_guard * a.peak)
            self._slab_key = k
        return self._slab

    def _kernel_args(self):
        g = self.grid
        return -g.L, g.dx, g.n + 2, g.L, self.params.hbar / self.params.m

    # -- point queries ---------------------------------------------------
    def _bicubic_velocity(self, t, x, y):
        k, s = self.locate(t)
        Sa, Sb, _, guard = self.slab(k)
        xmin, dx, nn, L, hm = self._kernel_args()
        v, status = K.velocity_points(Sa, Sb, s, self.dt_snap, x, y, xmin, dx, nn, L, hm, guard)
        return v, status

    def coefficients_at(self, t: float, dt_order: int = 0) -> np.ndarray:
        """Sine coefficients of psi (or d psi / dt) at time t, Hermite-interpolated."""
        k, s = self.locate(t)
        a = self._frame(k)
        if self.count == 1:
            return a.coef if dt_order == 0 else a.coef_t
        b = self._frame(k + 1)
        d = self.dt_snap
        s2, s3 = s * s, s * s * s
        if dt_order == 0:
            w = (2 * s3 - 3 * s2 + 1, d * (s3 - 2 * s2 + s), -2 * s3 + 3 * s2, d * (s3 - s2))
        else:
            w = ((6 * s2 - 6 * s) / d, 3 * s2 - 4 * s + 1, (-6 * s2 + 6 * s) / d, 3 * s2 - 2 * s)
        return w[0] * a.coef + w[1] * a.coef_t + w[2] * b.coef + w[3] * b.coef_t

    def psi(self, t: float, x, y, dx_order: int = 0, dy_order: int = 0, method: str = "spectral"):
        """psi or one of its spatial derivatives at points (x, y) and time t."""
        x, y = self._check_points(x, y)
        if method == "spectral":
            return spectral.evaluate(self.coefficients_at(t), self.grid, x, y, dx_order, dy_order)
        if method != "bicubic" or dx_order + dy_order > 1:
            raise ValueError("bicubic route provides psi and first derivatives only")
        k, s = self.locate(t)
        Sa, Sb, _, _ = self.slab(k)
        w = K._time_weights(s, self.dt_snap)
        xmin, dx, nn, _, _ = self._kernel_args()
        idx = {(0, 0): 0, (1, 0): 1, (0, 1): 2}[(dx_order, dy_order)]
        out = np.empty(x.size, dtype=complex)
        for q in range(x.size):
            out[q] = K.eval_psi(Sa, Sb, *w, x[q], y[q], xmin, dx, nn)[idx]
        return out

    def _check_points(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        x, y = np.broadcast_arrays(x, y)
        L = self.grid.L
        if np.any(np.abs(x) >= L) or np.any(np.abs(y) >= L):
            raise OutOfDomainError(f"query outside the open box (-{L}, {L})^2")
        return np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(y, dtype=float)

    def _guard_check(self, t, p):
        k, _ = self.locate(t)
        guard = self.node_guard * self._frame(k).peak
        if np.any(np.abs(p) <= guard):
            raise NodeProximityError(f"|psi| <= {guard:.3e} at t={t}")

    def velocity(self, t: float, x, y, method: str = "bicubic"):
        """Guidance velocity (hbar/m) Im(grad psi / psi); returns (vx, vy) arrays."""
        x, y = self._check_points(x, y)
        hm = self.params.hbar / self.params.m
        if method == "bicubic":
            v, status = self._bicubic_velocity(t, x, y)
            if np.any(status == K.NODE):
                raise NodeProximityError(f"velocity requested at a nodal point, t={t}")
            if np.any(status == K.DOMAIN):
                raise OutOfDomainError("query outside the box")
            return v[:, 0], v[:, 1]
        if method != "spectral":
            raise ValueError(f"unknown method {method!r}")
        c = self.coefficients_at(t)
        p = spectral.evaluate(c, self.grid, x, y)
        self._guard_check(t, p)
        px = spectral.evaluate(c, self.grid, x, y, 1, 0)
        py = spectral.evaluate(c, self.grid, x, y, 0, 1)
        return hm * (px / p).imag, hm * (py / p).imag

    def _q_parts(self, t, x, y):
        x, y = self._check_points(x, y)
        c = self.coefficients_at(t)
        ev = lambda a, b: spectral.evaluate(c, self.grid, x, y, a, b)  # noqa: E731
        p = ev(0, 0)
        self._guard_check(t, p)
        return p, ev

    def quantum_potential(self, t: float, x, y):
        """Q = -(hbar^2 / 2m) lap(R) / R with R = |psi|."""
        p, ev = self._q_parts(t, x, y)
        gx, gy = ev(1, 0) / p, ev(0, 1) / p
        lap = (ev(2, 0) + ev(0, 2)) / p
        ratio = lap.real + gx.imag**2 + gy.imag**2
        return -(self.params.hbar**2 / (2.0 * self.params.m)) * ratio

    def quantum_force(self, t: float, x, y):
        """-grad Q, differentiated analytically through the sine series."""
        p, ev = self._q_parts(t, x, y)
        px, py = ev(1, 0), ev(0, 1)
        pxx, pxy, pyy = ev(2, 0), ev(1, 1), ev(0, 2)
        lap = pxx + pyy
        lap_x = ev(3, 0) + ev(1, 2)
        lap_y = ev(2, 1) + ev(0, 3)
        gx, gy = px / p, py / p
        out = []
        for d, lap_d, gxd, gyd in ((px, lap_x, pxx, pxy), (py, lap_y, pxy, pyy)):
            dlap = (lap_d / p - lap * d / p**2).real
            dgx = (gxd / p - px * d / p**2).imag
            dgy = (gyd / p - py * d / p**2).imag
            dratio = dlap + 2.0 * (gx.imag * dgx + gy.imag * dgy)
            out.append((self.params.hbar**2 / (2.0 * self.params.m)) * dratio)
        return out[0], out[1]


@dataclass
class Trajectory:
    """Sampled Bohmian phase-space states (t, x, y, px, py) from one seed."""

    x0: float
    y0: float
    states: np.ndarray
    flag: str = FLAG_OK
    settings: dict = dc_field(default_factory=dict)

    @property
    def t(self):
        return self.states[:, 0]

    @property
    def x(self):
        return self.states[:, 1]

    @property
    def y(self):
        return self.states[:, 2]

    @property
    def px(self):
        return self.states[:, 3]

    @property
    def py(self):
        return self.states[:, 4]

    @property
    def truncated(self) -> bool:
        return self.flag != FLAG_OK

    def mirrored(self) -> "Trajectory":
        """Image under (x, y) -> (y, x)."""
        s = self.states[:, [0, 2, 1, 4, 3]]
        return Trajectory(self.y0, self.x0, s, self.flag, dict(self.settings))


def _lattice_index(value: float, origin: float, dt: float, what: str) -> int:
    r = (value - origin) / dt
    i = int(round(r))
    if abs(r - i) > 1e-6:
        raise ValueError(f"{what} is not on the dt lattice")
    return i


def integrate_batch(
    interp: FieldInterpolant,
    seeds,
    t_span: tuple[float, float] | None = None,
    dt: float = 1e-5,
    out_every: int = 1000,
) -> list[Trajectory]:
    """Integrate the guidance equation from every seed with fixed-step RK8.

    Seeds are processed together slab by slab, so the snapshot series is
    traversed once.  Failures (node proximity, leaving the box) truncate
    the affected trajectory and set its ``flag``; the rest carry on.
    """
    seeds = [(float(a), float(b)) for a, b in seeds]
    if not seeds:
        return []
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_span is None:
        t_span = (interp.t0, interp.t_end)
    t_start, t_stop = map(float, t_span)
    if t_start < interp.t0 - _TIME_EPS or t_stop > interp.t_end + _TIME_EPS or t_stop < t_start:
        raise OutOfDomainError(f"t_span {t_span} not covered by the snapshots")
    sps = _lattice_index(interp.dt_snap, 0.0, dt, "dt_snap") if interp.count > 1 else 1
    if sps < 1:
        raise ValueError("dt must not exceed dt_snap")
    i0 = _lattice_index(t_start, interp.t0, dt, "t_span start")
    nsteps = _lattice_index(t_stop, t_start, dt, "t_span length")
    M = len(seeds)
    nrec_max = nsteps // out_every + 1
    rec = np.zeros((M, nrec_max, 5))
    nrec = np.zeros(M, dtype=np.int64)
    status = np.zeros(M, dtype=np.int64)
    pos = np.array(seeds, dtype=float).reshape(M, 2)
    xmin, dxg, nn, L, hm = interp._kernel_args()
    mass = interp.params.m

    # initial states
    k, s = interp.locate(t_start)
    Sa, Sb, tk, guard = interp.slab(k)
    v, st = K.velocity_points(Sa, Sb, s, interp.dt_snap, pos[:, 0].copy(), pos[:, 1].copy(), xmin, dxg, nn, L, hm, guard)
    for q in range(M):
        status[q] = st[q]
        if st[q] == K.OK:
            rec[q, 0] = (t_start, pos[q, 0], pos[q, 1], mass * v[q, 0], mass * v[q, 1])
            nrec[q] = 1

    g = 0
    while g < nsteps and np.any(status == K.OK):
        a = i0 + g
        k = min(a // sps, interp.count - 2) if interp.count > 1 else 0
        n_here = min((k + 1) * sps - a, nsteps - g)
        Sa, Sb, tk, guard = interp.slab(k)
        K.rk8_slab(
            pos, status, Sa, Sb, tk, interp.dt_snap, t_start, dt, g, n_here, out_every, rec, nrec,
            xmin, dxg, nn, L, hm, mass, guard, K.RK_A, K.RK_B, K.RK_C,
        )
        g += n_here

    settings = {"method": "rk8-fixed", "dt": dt, "out_every": out_every, "t_start": t_start, "t_end": t_stop}
    return [
        Trajectory(x0, y0, rec[q, : nrec[q]].copy(), _FLAGS[int(status[q])], dict(settings))
        for q, (x0, y0) in enumerate(seeds)
    ]


def integrate(interp: FieldInterpolant, x0: float, y0: float, t_span=None, dt: float = 1e-5, out_every: int = 1000) -> Trajectory:
    """Single-seed form of :func:`integrate_batch`."""
    return integrate_batch(interp, [(x0, y0)], t_span, dt, out_every)[0]


def integrate_adaptive(interp: FieldInterpolant, x0: float, y0: float, t_span=None, rtol: float = 1e-10,
                       atol: float = 1e-12, t_eval=None, method: str = "bicubic") -> Trajectory:
    """Exploration mode: embedded-error DOP853 from scipy on the same velocity field.

    Not used by the reproduction presets; handy as an independent check of
    the fixed-step integrator.
    """
    from scipy.integrate import solve_ivp

    if t_span is None:
        t_span = (interp.t0, interp.t_end)

    def rhs(t, z):
        vx, vy = interp.velocity(t, z[0], z[1], method=method)
        return [vx[0], vy[0]]

    sol = solve_ivp(rhs, t_span, [x0, y0], method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)
    ts, xs, ys = sol.t, sol.y[0], sol.y[1]
    m = interp.params.m
    states = np.empty((ts.size, 5))
    for i, (t, x, y) in enumerate(zip(ts, xs, ys)):
        vx, vy = interp.velocity(t, x, y, method=method)
        states[i] = (t, x, y, m * vx[0], m * vy[0])
    return Trajectory(x0, y0, states, FLAG_OK, {"method": "dop853-adaptive", "rtol": rtol, "atol": atol})


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV with header t,x,y,px,py,flag; only the last row of a truncated run carries its cause."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "px", "py", "flag"])
        n = len(traj.states)
        for i, row in enumerate(traj.states):
            flag = traj.flag if (i == n - 1 and traj.truncated) else FLAG_OK
            w.writerow([repr(float(v)) for v in row] + [flag])


def read_trajectory_csv(path) -> Trajectory:
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["t", "x", "y", "px", "py", "flag"]:
            raise ValueError(f"unexpected trajectory header {header}")
        rows = list(r)
    states = np.array([[float(v) for v in row[:5]] for row in rows]).reshape(-1, 5)
    flag = rows[-1][5] if rows else FLAG_OK
    x0, y0 = (states[0, 1], states[0, 2]) if len(states) else (math.nan, math.nan)
    return Trajectory(x0, y0, states, flag)
