r"""
Bohmian trajectories and the mirror line
========================================

Four seeds, two of them mirror images of the other two across y = x.
With coupling the paths wander irregularly, yet each mirror pair stays
exactly symmetric because the initial state and the potential are.
"""
import sys

import numpy as np

from bohmsim.model import default_grid, initial_state, paper_params
from bohmsim.plotting import trajectory_svg
from bohmsim.tdse import SnapshotStream
from bohmsim.trajectories import FieldInterpolant, integrate_batch

t_end = float(sys.argv[1]) if len(sys.argv) > 1 else 10.0
seeds = [(1.4, 0.5), (0.5, 1.4), (0.6, -0.5), (-0.5, 0.6)]

for kappa in (0.0, 1.0):
    params = paper_params(kappa, 1.0)
    f0 = initial_state(default_grid(1.0), 1.0, params)
    interp = FieldInterpolant(SnapshotStream(f0, t_end, 0.01))
    trajs = integrate_batch(interp, seeds, (0.0, t_end), dt=1e-4, out_every=100)

    # swap x and y of the partner and compare
    gap = max(np.abs(trajs[0].x - trajs[1].y).max(), np.abs(trajs[0].y - trajs[1].x).max())
    print(f"kappa = {kappa}: mirror gap {gap:.1e}, flags {[t.flag for t in trajs]}")
    trajectory_svg(trajs, f"trajectories_kappa{kappa:g}.svg")
