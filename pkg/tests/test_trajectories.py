import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bohmsim.errors import NodeProximityError, OutOfDomainError
from bohmsim.model import GridSpec, PhysParams, default_grid, grad_potential, initial_state, paper_params
from bohmsim.tdse import SnapshotSeries, SnapshotStream, WaveField, evolve
from bohmsim.trajectories import (
    FLAG_DOMAIN,
    FLAG_NODE,
    FLAG_OK,
    FieldInterpolant,
    integrate,
    integrate_adaptive,
    integrate_batch,
    read_trajectory_csv,
    write_trajectory_csv,
)

from helpers import ground_field, static_series


@pytest.fixture(scope="module")
def ground(small_grid):
    return FieldInterpolant(static_series(ground_field(small_grid, PhysParams()), t_end=10.0, dt_snap=0.5))


@pytest.fixture(scope="module")
def coupled(small_grid):
    """kappa = 1 paper couplings, evolved to t = 1 with the default snapshot spacing."""
    f0 = initial_state(small_grid, 1.0, paper_params(1.0))
    return FieldInterpolant(evolve(f0, 1.0, 0.01))


def plane_wave(grid, k1, k2, x0=0.0, y0=0.0, hbar=1.0):
    X, Y = grid.mesh()
    psi = np.exp(-((X - x0) ** 2 + (Y - y0) ** 2) / 2 + 1j * (k1 * X + k2 * Y)) / math.sqrt(math.pi)
    return WaveField(grid, 0.0, psi, PhysParams(hbar=hbar))


def single(field):
    return FieldInterpolant(SnapshotSeries(frames=[field], dt_snap=1.0))


def test_ground_state_velocity_vanishes(ground):
    rng = np.random.default_rng(3)
    x, y = rng.uniform(-2.5, 2.5, (2, 50))
    for method in ("bicubic", "spectral"):
        vx, vy = ground.velocity(3.3, x, y, method=method)
        assert np.max(np.abs(vx)) < 1e-8 and np.max(np.abs(vy)) < 1e-8


def test_plane_wave_velocity(small_grid):
    interp = single(plane_wave(small_grid, 0.7, -0.4))
    for method in ("bicubic", "spectral"):
        vx, vy = interp.velocity(0.0, 0.0, 0.0, method=method)
        assert vx[0] == pytest.approx(0.7, abs=1e-6)
        assert vy[0] == pytest.approx(-0.4, abs=1e-6)


def test_symmetric_field_diagonal_velocity(coupled):
    a = np.linspace(-1.5, 1.5, 11)
    vx, vy = coupled.velocity(0.537, a, a)
    assert np.max(np.abs(vx - vy)) < 1e-8


def _fd8(f, axis, h):
    c = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    out = np.zeros_like(f)
    for s, w in zip(range(-4, 5), c):
        out += w * np.roll(f, -s, axis=axis)
    return out / h


def test_velocity_matches_finite_differences_at_nodes():
    from bohmsim.model import default_grid

    g = default_grid(1.0)
    coupled = FieldInterpolant(evolve(initial_state(g, 1.0, paper_params(1.0)), 0.5, 0.5))
    frame = coupled.series.frame(1)
    psi = frame.values
    vx_fd = (_fd8(psi, 0, g.dx) / psi).imag
    vy_fd = (_fd8(psi, 1, g.dx) / psi).imag
    X, Y = g.mesh()
    live = np.abs(psi) > 1e-3 * np.abs(psi).max()
    live[:5, :] = live[-5:, :] = live[:, :5] = live[:, -5:] = False
    vx, vy = coupled.velocity(frame.t, X[live], Y[live])
    assert np.max(np.abs(vx - vx_fd[live])) < 1e-6
    assert np.max(np.abs(vy - vy_fd[live])) < 1e-6


def test_bicubic_and_spectral_routes_agree(coupled, small_grid):
    # the bicubic gradient is third order in dx, the spectral route is exact on the grid,
    # so the gap must shrink by roughly 8x when the spacing halves
    rng = np.random.default_rng(11)
    x, y = rng.uniform(-2, 2, (2, 200))
    t = 0.4137
    fine = FieldInterpolant(
        evolve(initial_state(GridSpec(small_grid.half_width, 2 * small_grid.n + 1), 1.0, paper_params(1.0)), 0.5, 0.01)
    )
    gaps = []
    for interp in (coupled, fine):
        p = interp.psi(t, x, y)
        keep = np.abs(p) > 1e-2 * np.abs(p).max()
        bx, by = interp.velocity(t, x[keep], y[keep], method="bicubic")
        sx, sy = interp.velocity(t, x[keep], y[keep], method="spectral")
        gaps.append(max(np.abs(bx - sx).max(), np.abs(by - sy).max()))
    assert gaps[0] < 5e-3
    assert gaps[1] < gaps[0] / 5


def test_quantum_potential_of_ground_state(ground):
    r = np.linspace(0, 1.9, 12)
    th = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    x, y = r * np.cos(th), r * np.sin(th)
    q = ground.quantum_potential(1.0, x, y)
    assert np.max(np.abs(q - (1 - (x * x + y * y) / 2))) < 1e-4
    fx, fy = ground.quantum_force(1.0, [0.0], [0.0])
    assert abs(fx[0]) < 1e-4 and abs(fy[0]) < 1e-4
    fx, fy = ground.quantum_force(1.0, x, y)
    assert np.max(np.abs(fx - x)) < 1e-4 and np.max(np.abs(fy - y)) < 1e-4


@pytest.mark.property
@settings(max_examples=25)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.0, 0.99))
def test_quantum_force_is_minus_grad_q(x, y, t):
    interp = _coupled_cache()
    h = 1e-4
    try:
        q = lambda a, b: interp.quantum_potential(t, [a], [b])[0]  # noqa: E731
        fx, fy = interp.quantum_force(t, [x], [y])
        gx = (q(x + h, y) - q(x - h, y)) / (2 * h)
        gy = (q(x, y + h) - q(x, y - h)) / (2 * h)
    except NodeProximityError:
        return
    if abs(interp.psi(t, x, y)[0]) < 1e-2:
        return  # Q is steep near nodes; central differences lose accuracy there
    assert abs(fx[0] + gx) < 1e-4 * max(1.0, abs(gx))
    assert abs(fy[0] + gy) < 1e-4 * max(1.0, abs(gy))


_CACHE = {}


def _coupled_cache():
    if "c" not in _CACHE:
        g = GridSpec(7.0, 79)
        _CACHE["c"] = FieldInterpolant(evolve(initial_state(g, 1.0, paper_params(1.0)), 1.0, 0.01))
    return _CACHE["c"]


def test_domain_errors(coupled):
    L = coupled.grid.L
    with pytest.raises(OutOfDomainError):
        coupled.velocity(0.5, L, 0.0)
    with pytest.raises(OutOfDomainError):
        coupled.velocity(1.5, 0.0, 0.0)
    with pytest.raises(OutOfDomainError):
        integrate(coupled, 0.1, 0.1, (0.0, 2.0), dt=1e-3)


def test_node_proximity(small_grid):
    X, Y = small_grid.mesh()
    x0 = small_grid.coords[40]
    psi = ((X - x0) + 1j * Y) * np.exp(-(X**2 + Y**2) / 2)
    interp = single(WaveField(small_grid, 0.0, psi.astype(complex), PhysParams()))
    with pytest.raises(NodeProximityError):
        interp.velocity(0.0, x0, 0.0)
    with pytest.raises(NodeProximityError):
        interp.quantum_potential(0.0, x0, 0.0)
    tr = integrate_batch(interp, [(x0, 0.0), (0.5, 0.5)], (0.0, 0.0))
    assert tr[0].flag == FLAG_NODE and len(tr[0].states) == 0
    assert tr[1].flag == FLAG_OK


def test_truncation_flags(small_grid):
    # a packet moving right: the particle walks into the tail and is stopped by the guard,
    # or, with the guard off, reaches the wall
    f = plane_wave(small_grid, 3.0, 0.0)
    series = SnapshotSeries(frames=[f, WaveField(f.grid, 1.0, f.values, f.params),
                                    WaveField(f.grid, 2.0, f.values, f.params),
                                    WaveField(f.grid, 3.0, f.values, f.params)], dt_snap=1.0)
    guarded = integrate(FieldInterpolant(series), 0.0, 0.0, (0.0, 3.0), dt=1e-3, out_every=10)
    assert guarded.flag == FLAG_NODE and guarded.truncated
    assert guarded.t[-1] < 3.0
    free = integrate(FieldInterpolant(series, node_guard=0.0), 0.0, 0.0, (0.0, 3.0), dt=1e-3, out_every=10)
    assert free.flag == FLAG_DOMAIN
    assert free.x[-1] > guarded.x[-1]


def test_ground_state_trajectories_are_stationary(ground):
    rng = np.random.default_rng(5)
    seeds = rng.uniform(-2, 2, (20, 2))
    trajs = integrate_batch(ground, seeds, (0.0, 10.0), dt=1e-3, out_every=100)
    for tr in trajs:
        assert tr.flag == FLAG_OK
        assert np.max(np.hypot(tr.x - tr.x0, tr.y - tr.y0)) < 1e-6


def test_batch_semantics(coupled):
    assert integrate_batch(coupled, [], (0.0, 0.1), dt=1e-3) == []
    one = integrate(coupled, 1.1, 0.3, (0.0, 0.5), dt=1e-3, out_every=10)
    many = integrate_batch(coupled, [(0.2, -0.7), (1.1, 0.3)], (0.0, 0.5), dt=1e-3, out_every=10)
    assert np.array_equal(one.states, many[1].states)
    again = integrate(coupled, 1.1, 0.3, (0.0, 0.5), dt=1e-3, out_every=10)
    assert np.array_equal(one.states, again.states)
    assert one.t[0] == 0.0 and np.all(np.diff(one.t) > 0)
    assert one.t[-1] == pytest.approx(0.5)


def test_mirror_symmetry_of_batch(coupled):
    seeds = [(1.4, 0.5), (0.6, -0.5), (0.3, 1.2)]
    mirrored = [(b, a) for a, b in seeds]
    tr = integrate_batch(coupled, seeds + mirrored, (0.0, 1.0), dt=1e-3, out_every=10)
    for a, b in zip(tr[:3], tr[3:]):
        m = b.mirrored()
        assert np.max(np.abs(a.states[:, 1:] - m.states[:, 1:])) < 1e-10


def test_fixed_step_agrees_with_adaptive(coupled):
    fixed = integrate(coupled, 1.4, 0.5, (0.0, 1.0), dt=1e-3, out_every=100)
    adaptive = integrate_adaptive(coupled, 1.4, 0.5, (0.0, 1.0), rtol=1e-11, atol=1e-12, t_eval=fixed.t)
    assert np.max(np.abs(fixed.states[:, 1:3] - adaptive.states[:, 1:3])) < 1e-8


def test_rk8_converges_at_high_order(coupled):
    ref = integrate(coupled, 1.4, 0.5, (0.0, 1.0), dt=1e-4, out_every=10000)
    e1 = np.abs(integrate(coupled, 1.4, 0.5, (0.0, 1.0), dt=0.01, out_every=100).states[-1, 1:3] - ref.states[-1, 1:3]).max()
    e2 = np.abs(integrate(coupled, 1.4, 0.5, (0.0, 1.0), dt=0.005, out_every=200).states[-1, 1:3] - ref.states[-1, 1:3]).max()
    # steps must divide the snapshot spacing; halving the step should buy well over 2^5
    assert e2 < e1 / 32


def test_newton_form_consistency(harmonic):
    # m x'' = -grad V - grad Q along a guidance trajectory (harmonic superposition);
    # the default grid keeps the bicubic/spectral gap well under the tolerance
    interp = FieldInterpolant(evolve(initial_state(default_grid(1.0), 1.0, harmonic), 1.0, 0.01))
    tr = integrate(interp, 0.4, -0.2, (0.0, 1.0), dt=1e-4, out_every=10)
    h = 1e-3
    t, x, y = tr.t, tr.x, tr.y
    ax = (x[2:] - 2 * x[1:-1] + x[:-2]) / h**2
    ay = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    idx = np.arange(1, len(t) - 1, 25)
    fq = np.array([interp.quantum_force(t[i], x[i], y[i]) for i in idx])[:, :, 0]
    gx, gy = grad_potential(harmonic, x[idx], y[idx])
    # accelerations reach ~30 where Q is steep, so the bound scales with |a|
    for num, exact in ((ax[idx - 1], -gx + fq[:, 0]), (ay[idx - 1], -gy + fq[:, 1])):
        assert np.max(np.abs(num - exact) / (1 + np.abs(exact))) < 1e-3


def test_csv_round_trip(coupled, tmp_path):
    tr = integrate(coupled, 1.4, 0.5, (0.0, 0.2), dt=1e-3, out_every=20)
    p = tmp_path / "t.csv"
    write_trajectory_csv(tr, p)
    assert p.read_text().splitlines()[0] == "t,x,y,px,py,flag"
    back = read_trajectory_csv(p)
    assert np.array_equal(back.states, tr.states)
    assert back.flag == tr.flag


@pytest.mark.slow
def test_probability_transport_harmonic(small_grid, harmonic):
    # trajectories drawn from |psi(0)|^2 stay |psi(t)|^2 distributed (continuity equation)
    series = evolve(initial_state(small_grid, 1.0, harmonic), 1.0, 0.01)
    interp = FieldInterpolant(series)
    rng = np.random.default_rng(2024)

    def sample(field, n):
        p = field.density.ravel()
        idx = rng.choice(p.size, size=n, p=p / p.sum())
        X, Y = field.grid.mesh()
        jit = rng.uniform(-0.5, 0.5, (2, n)) * field.grid.dx
        return X.ravel()[idx] + jit[0], Y.ravel()[idx] + jit[1]

    x0, y0 = sample(series.frame(0), 1000)
    trajs = integrate_batch(interp, np.column_stack([x0, y0]), (0.0, 1.0), dt=1e-3, out_every=1000)
    ok = [tr for tr in trajs if tr.flag == FLAG_OK]
    assert len(ok) > 980
    xt = np.array([tr.x[-1] for tr in ok])
    yt = np.array([tr.y[-1] for tr in ok])
    xs, ys = sample(series.frame(series.count - 1), 4000)
    assert stats.ks_2samp(xt, xs).pvalue > 0.01
    assert stats.ks_2samp(yt, ys).pvalue > 0.01
    # and the distribution did move: the t = 0 sample is distinguishable
    assert stats.ks_2samp(x0, xs).statistic > stats.ks_2samp(xt, xs).statistic


@pytest.mark.slow
def test_snapshot_spacing_self_convergence():
    # halving dt_snap moves trajectories by less than 1e-5 at t = 10 (kappa = 1, default grid)
    from bohmsim.model import default_grid

    g = default_grid(1.0)
    f0 = initial_state(g, 1.0, paper_params(1.0))
    seeds = [(1.4, 0.5), (0.6, -0.5), (-1.2, 1.3)]
    out = []
    for ds in (0.01, 0.005):
        interp = FieldInterpolant(SnapshotStream(f0, 10.0, ds))
        out.append(integrate_batch(interp, seeds, (0.0, 10.0), dt=1e-4, out_every=1000))
    for a, b in zip(*out):
        assert a.flag == b.flag == FLAG_OK
        assert np.max(np.abs(a.states[:, 1:3] - b.states[:, 1:3])) < 1e-5
