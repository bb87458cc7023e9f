"""``bohmsim`` command line: evolve, traj, vortex, chaos and plot subcommands.

Every run directory gets ``effective.ini`` (the fully resolved config, which
re-runs the job when passed back with ``--config``) and a key=value
manifest.  Runs that consume snapshots record the sha256 of the snapshot
manifest they read, or the solver settings when the field was evolved inline.

Exit status: 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from . import config as cfgmod
from .errors import BohmsimError, ConfigError
from .io import SnapshotFile, SnapshotWriter, file_sha256, write_history_csv, write_manifest
from .model import initial_state
from .tdse import Evolver, SnapshotStream

log = logging.getLogger("bohmsim")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("evolve", "traj", "vortex", "chaos", "plot")


def point_name(cfg) -> str:
    p = cfg.params
    return f"kappa={p.kappa:g}_hbar={p.hbar:g}"


def _start(cfg, outdir: Path, command: str) -> dict:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "effective.ini").write_text(cfg.to_ini())
    return {"command": command, "version": __version__, **cfg.flat()}


def _solver_kw(cfg) -> dict:
    s = cfg.solver
    return {"tol": s.tol, "dt_min": s.dt_min, "norm_tol": s.norm_tol, "leak_tol": s.leak_tol}


def _snap_t_end(cfg, t_end: float) -> float:
    """Smallest snapshot time at or after ``t_end``."""
    ds = cfg.solver.dt_snap
    k = -(-round(t_end / ds * 1e9) // 10**9)
    return k * ds


def _field_source(cfg, t_end: float, outdir: Path, man: dict):
    """Snapshot file named in the config, or an inline stream up to ``t_end``."""
    if cfg.snapshots:
        path = Path(cfg.snapshots.format(point=point_name(cfg)))
        try:
            snaps = SnapshotFile(path)
        except ValueError as exc:
            raise OSError(f"unreadable snapshot file: {exc}") from None
        if snaps.params != cfg.params or snaps.grid != cfg.grid:
            raise ConfigError(f"{path} was written for {snaps.params}, {snaps.grid}; config wants "
                              f"{cfg.params}, {cfg.grid}")
        if snaps.t_end < t_end - 1e-12:
            raise ConfigError(f"{path} ends at t={snaps.t_end}, run needs {t_end}")
        sman = path.with_suffix(".manifest")
        man["snapshots.source"] = str(path)
        man["snapshots.sha256"] = file_sha256(path)
        man["snapshots.manifest_sha256"] = file_sha256(sman)
        return snaps, None
    f0 = initial_state(cfg.grid, cfg.params.hbar, cfg.params)
    stream = SnapshotStream(f0, _snap_t_end(cfg, t_end), cfg.solver.dt_snap, cfg.solver.dt_max, **_solver_kw(cfg))
    man["snapshots.source"] = "inline"
    return stream, stream


def _finish_inline(stream, outdir: Path, man: dict) -> None:
    if stream is None:
        return
    write_history_csv(outdir / "history.csv", stream.history)
    man["snapshots.history_sha256"] = file_sha256(outdir / "history.csv")
    for k, v in {**stream.evolver.settings(), **stream.evolver.stats()}.items():
        man[f"snapshots.{k}"] = v


# -- subcommands (one sweep point each) --------------------------------------

def run_evolve(cfg, outdir: Path) -> dict:
    man = _start(cfg, outdir, "evolve")
    f0 = initial_state(cfg.grid, cfg.params.hbar, cfg.params)
    ev = Evolver(f0, cfg.solver.t_end, cfg.solver.dt_snap, cfg.solver.dt_max, **_solver_kw(cfg))
    snap = outdir / "snapshots.bin"
    with SnapshotWriter(snap, cfg.params, cfg.grid, cfg.solver.dt_snap, ev.n_intervals + 1, f0.t) as w:
        for f in ev:
            w.append(f)
            log.info("%s t=%g norm-1=%.2e", point_name(cfg), f.t, ev.history[-1][1] - 1.0)
    write_history_csv(outdir / "history.csv", ev.history)
    man.update({f"solver.effective.{k}": v for k, v in ev.settings().items()})
    man.update({f"stats.{k}": v for k, v in ev.stats().items()})
    man["output.snapshots"] = snap.name
    man["output.snapshots_sha256"] = file_sha256(snap)
    man["output.history"] = "history.csv"
    man["output.history_sha256"] = file_sha256(outdir / "history.csv")
    man["snapshot_count"] = ev.n_intervals + 1
    write_manifest(outdir / "snapshots.manifest", man)
    return {"point": point_name(cfg), "max_norm_deviation": ev.max_norm_dev}


def run_traj(cfg, outdir: Path) -> dict:
    from .trajectories import FieldInterpolant, integrate_batch, write_trajectory_csv

    tc = cfg.trajectories
    if not tc.seeds:
        raise ConfigError("[trajectories] seeds is empty")
    man = _start(cfg, outdir, "traj")
    series, stream = _field_source(cfg, tc.t_end, outdir, man)
    interp = FieldInterpolant(series)
    trajs = integrate_batch(interp, tc.seeds, (0.0, tc.t_end), tc.dt, tc.out_every)
    for i, tr in enumerate(trajs):
        name = f"traj_{i:03d}.csv"
        write_trajectory_csv(tr, outdir / name)
        man[f"traj.{i:03d}.seed"] = (tr.x0, tr.y0)
        man[f"traj.{i:03d}.flag"] = tr.flag
        man[f"traj.{i:03d}.t_last"] = float(tr.t[-1]) if len(tr.t) else "none"
        man[f"traj.{i:03d}.sha256"] = file_sha256(outdir / name)
    man["method"] = "rk8-fixed"
    _finish_inline(stream, outdir, man)
    write_manifest(outdir / "traj.manifest", man)
    return {"point": point_name(cfg), "flags": [t.flag for t in trajs]}


def run_vortex(cfg, outdir: Path) -> dict:
    from .vortices import find_nodes, total_winding, track, write_events_csv, write_tracks_csv

    vc = cfg.vortices
    ratio = vc.frame_interval / cfg.solver.dt_snap
    stride = round(ratio)
    if stride < 1 or abs(ratio - stride) > 1e-9 * ratio:
        raise ConfigError("[vortices] frame_interval must be a multiple of [solver] dt_snap")
    man = _start(cfg, outdir, "vortex")
    series, stream = _field_source(cfg, vc.t_end, outdir, man)
    frames = []
    k0 = max(0, round((vc.t_start - series.t0) / series.dt_snap))
    for k in range(series.count):
        t = series.t0 + k * series.dt_snap
        if k < k0 or (k - k0) % stride or t > vc.t_end + 1e-9:
            continue
        f = series.frame(k)
        frames.append((f.t, find_nodes(f, vc.region)))
    dx = cfg.grid.dx
    match_radius = vc.match_radius or 5.0 * dx
    pair_radius = vc.pair_radius or 10.0 * dx
    result = track(frames, match_radius, pair_radius, region=vc.region)
    write_tracks_csv(result, outdir / "tracks.csv")
    write_events_csv(result, outdir / "events.csv")
    windings = sorted({total_winding(nodes) for _, nodes in frames})
    man.update({
        "frames": len(frames),
        "match_radius": match_radius,
        "pair_radius": pair_radius,
        "tracks": len(result.tracks),
        "events": len(result.events),
        "total_winding_values": ",".join(str(w) for w in windings),
        "ambiguities": len(result.ambiguities),
        "output.tracks_sha256": file_sha256(outdir / "tracks.csv"),
        "output.events_sha256": file_sha256(outdir / "events.csv"),
    })
    for i, e in enumerate(result.events):
        man[f"event.{i:03d}"] = f"{e.kind} t={e.t!r} x={e.x!r} y={e.y!r}"
    _finish_inline(stream, outdir, man)
    write_manifest(outdir / "vortex.manifest", man)
    return {"point": point_name(cfg), "events": [(e.kind, e.t) for e in result.events]}


def run_chaos(cfg, outdir: Path) -> dict:
    from .chaos import bootstrap_slope, ensemble_mean, fit_slope, make_pairs, run_pairs, write_mean_csv, write_pairs_csv
    from .trajectories import FieldInterpolant

    cc = cfg.chaos
    man = _start(cfg, outdir, "chaos")
    try:
        pairs = make_pairs(cc.region, cc.count, cc.epsilon, cc.direction)
    except ValueError as exc:
        raise ConfigError(f"[chaos] {exc}") from None
    series, stream = _field_source(cfg, cc.t_end, outdir, man)
    interp = FieldInterpolant(series)
    seps, trajs = run_pairs(interp, pairs, (0.0, cc.t_end), cc.dt, cc.out_every)
    mean = ensemble_mean(seps, cc.min_coverage)
    fit = fit_slope(mean, cc.fit_window)
    lo, hi = bootstrap_slope(mean, cc.fit_window, cc.n_boot, 0.95, cc.seed)
    write_mean_csv(mean, outdir / "mean_ln_xi.csv")
    write_pairs_csv(mean, outdir / "pairs_ln_xi.csv")
    man.update({
        "pairs": len(pairs),
        "pairs.excluded": ",".join(str(i) for i in mean.excluded),
        "pairs.truncated": sum(t.truncated for t in trajs),
        "fit.slope": fit.slope,
        "fit.intercept": fit.intercept,
        "fit.residual": fit.residual,
        "fit.window": fit.window,
        "fit.samples": fit.n,
        "fit.ci95": (lo, hi),
        "output.mean_sha256": file_sha256(outdir / "mean_ln_xi.csv"),
        "output.pairs_sha256": file_sha256(outdir / "pairs_ln_xi.csv"),
    })
    _finish_inline(stream, outdir, man)
    write_manifest(outdir / "chaos.manifest", man)
    return {"point": point_name(cfg), "slope": fit.slope, "ci95": (lo, hi)}


def run_plot(cfg, outdir: Path) -> dict:
    from .plotting import plot_files

    man = _start(cfg, outdir, "plot")
    out = outdir / f"plot_{cfg.plot.kind}.svg"
    plot_files(cfg.plot.kind, cfg.plot.inputs, out, cfg.plot.times)
    for i, p in enumerate(cfg.plot.inputs):
        man[f"input.{i}.sha256"] = file_sha256(p)
    man["output.svg_sha256"] = file_sha256(out)
    write_manifest(outdir / "plot.manifest", man)
    return {"svg": str(out)}


RUNNERS = {"evolve": run_evolve, "traj": run_traj, "vortex": run_vortex, "chaos": run_chaos, "plot": run_plot}


def _run_point(command: str, cfg, outdir: Path):
    return RUNNERS[command](cfg, outdir)


def run(command: str, cfg, outdir: Path, jobs: int = 1) -> list[dict]:
    """Run ``command`` for every sweep point; points go to subdirectories when there are several."""
    points = cfg.points() if command != "plot" else [cfg]
    if len(points) == 1:
        return [_run_point(command, points[0], outdir)]
    dirs = [outdir / point_name(p) for p in points]
    if jobs <= 1:
        results = [_run_point(command, p, d) for p, d in zip(points, dirs)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_run_point, command, p, d) for p, d in zip(points, dirs)]
            results = [f.result() for f in futs]
    sweep = {"command": command, "version": __version__, "points": len(points)}
    for i, d in enumerate(dirs):
        sweep[f"point.{i:02d}"] = d.name
        sweep[f"point.{i:02d}.manifest_sha256"] = file_sha256(d / f"{_MANIFEST[command]}")
    write_manifest(outdir / "sweep.manifest", sweep)
    return results


_MANIFEST = {"evolve": "snapshots.manifest", "traj": "traj.manifest", "vortex": "vortex.manifest",
             "chaos": "chaos.manifest", "plot": "plot.manifest"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bohmsim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bohmsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--preset", help=f"built-in preset ({', '.join(sorted(cfgmod.PRESETS))})")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "plot":
            sp.add_argument("--kind", choices=("density", "quiver", "trajectory", "lnxi"))
            sp.add_argument("--input", action="append", help="input file (repeatable)")
            sp.add_argument("--times", help="snapshot times for density/quiver plots")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        extra = ""
        if args.command == "plot" and (args.kind or args.input or args.times):
            extra = "[plot]\n"
            if args.kind:
                extra += f"kind = {args.kind}\n"
            if args.input:
                extra += "input = " + "; ".join(str(Path(p).resolve()) for p in args.input) + "\n"
            if args.times:
                extra += f"times = {args.times}\n"
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = cfgmod.load(args.config, args.preset, extra or None)
        outdir = cfgmod.output_dir(cfg, args.out)
        results = run(args.command, cfg, outdir, args.jobs)
    except ConfigError as exc:
        print(f"bohmsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BohmsimError as exc:
        print(f"bohmsim: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"bohmsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"bohmsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for r in results:
        print(" ".join(f"{k}={v}" for k, v in r.items()))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
