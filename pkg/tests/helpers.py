import numpy as np

from bohmsim.model import PhysParams, eigenstate
from bohmsim.tdse import SnapshotSeries, WaveField


def ground_field(grid, params=None, t=0.0, phase=0.0):
    """psi_00 sampled on ``grid`` with a global phase."""
    params = params or PhysParams()
    X, Y = grid.mesh()
    psi = eigenstate(0, 0, params.hbar, X, Y) * np.exp(1j * phase)
    return WaveField(grid, t, psi.astype(complex), params)


def static_series(field, t_end=1.0, dt_snap=0.5):
    """Frames of an exact stationary state psi * exp(-i E t / hbar) with E = hbar."""
    n = int(round(t_end / dt_snap)) + 1
    e = field.params.hbar
    frames = [
        WaveField(field.grid, k * dt_snap, field.values * np.exp(-1j * e * k * dt_snap / field.params.hbar), field.params)
        for k in range(n)
    ]
    return SnapshotSeries(frames=frames, dt_snap=dt_snap)
