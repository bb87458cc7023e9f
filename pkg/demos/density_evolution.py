r"""
Density of the coupled oscillator
=================================

Evolve the four-mode superposition under the anharmonic coupled potential
and draw |psi|^2 at a few times.  The full figure runs to t = 300; the
default here stops at t = 30 so the script finishes in about a minute.
"""
import sys

from bohmsim.model import default_grid, initial_state, paper_params
from bohmsim.plotting import density_svg
from bohmsim.tdse import energy, evolve, norm

t_end = float(sys.argv[1]) if len(sys.argv) > 1 else 30.0
dt_snap = t_end / 3

params = paper_params(kappa=1.0, hbar=1.0)
grid = default_grid(params.hbar)
f0 = initial_state(grid, params.hbar, params)

series = evolve(f0, t_end, dt_snap)
for f in series.frames:
    print(f"t = {f.t:6.1f}  norm - 1 = {norm(f) - 1:+.2e}  E = {energy(f):.8f}")

density_svg(series.frames, "density.svg", region=(-4, 4, -4, 4))
print("wrote density.svg")
