"""Run configuration: INI files with section headers and preset inheritance.

A config may name a ``preset`` in its ``[run]`` section (or one is passed on
the command line); the preset's values are loaded first and the file's own
values override them.  Presets may inherit from other presets.

``kappa`` and ``hbar`` accept whitespace/comma separated lists; every
combination becomes one sweep point.
"""
from __future__ import annotations

import configparser
import itertools
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .chaos import FIG4_LEFT, FIG4_RIGHT, RegionSpec
from .errors import ConfigError
from .model import GridSpec, PhysParams, default_grid

_BASE = """
[physics]
kappa = 1.0
hbar = 1.0
alpha = 0.15
beta = 0.16
m = 1.0
omega_x = 1.0
omega_y = 1.0

[grid]
half_width = auto
n = auto

[solver]
t_end = 10.0
dt_snap = 0.01
dt_max = 0.01
dt_min = 1e-5
tol = 1e-8
norm_tol = 1e-3
leak_tol = 1e-6

[trajectories]
dt = 1e-5
out_every = 1000
seeds = 1.4 0.5
t_end = auto

[vortices]
region = -2 3 -2 3
t_start = 0.0
t_end = auto
frame_interval = 0.01
match_radius = auto
pair_radius = auto

[chaos]
region = fig4L
count = 60
epsilon = 1e-4
direction = 1 1
fit_window = auto
min_coverage = 0.8
n_boot = 1000
seed = 0
dt = 1e-5
out_every = 1000
t_end = auto

[plot]
kind = density
input =
times =
"""

PRESETS: dict[str, str] = {
    "base": _BASE,
    "fig1": """
[run]
preset = base
[physics]
kappa = 1
hbar = 1
[solver]
t_end = 300
dt_snap = 100
""",
    "fig2": """
[run]
preset = base
[physics]
kappa = 0.1
hbar = 1
[solver]
t_end = 3.5
dt_snap = 0.01
[vortices]
region = -2 3 -2 3
t_start = 2.6
t_end = 3.5
frame_interval = 0.01
""",
    "fig3": """
[run]
preset = base
[physics]
kappa = 1, 0
hbar = 1
[solver]
t_end = 50
dt_snap = 0.01
[trajectories]
seeds = 1.4 0.5; 0.5 1.4; 0.6 -0.5; -0.5 0.6
dt = 1e-5
""",
    "fig4L": """
[run]
preset = base
[physics]
kappa = 0, 0.05, 0.5, 1
hbar = 1
[solver]
t_end = 50
dt_snap = 0.01
[chaos]
region = fig4L
count = 60
epsilon = 1e-4
dt = 1e-5
""",
    "fig4R": """
[run]
preset = fig4L
[physics]
kappa = 1
hbar = 0.05, 0.5, 1
[chaos]
region = fig4R
""",
}

NAMED_REGIONS = {"fig4L": FIG4_LEFT, "fig4R": FIG4_RIGHT}


@dataclass(frozen=True)
class SolverSettings:
    t_end: float
    dt_snap: float
    dt_max: float
    dt_min: float
    tol: float
    norm_tol: float
    leak_tol: float


@dataclass(frozen=True)
class TrajSettings:
    dt: float
    out_every: int
    seeds: tuple[tuple[float, float], ...]
    t_end: float


@dataclass(frozen=True)
class VortexSettings:
    region: tuple[float, float, float, float]
    t_start: float
    t_end: float
    frame_interval: float
    match_radius: float | None
    pair_radius: float | None


@dataclass(frozen=True)
class ChaosSettings:
    region: RegionSpec
    region_name: str
    count: int
    epsilon: float
    direction: tuple[float, float]
    fit_window: tuple[float, float] | None
    min_coverage: float
    n_boot: int
    seed: int
    dt: float
    out_every: int
    t_end: float


@dataclass(frozen=True)
class PlotSettings:
    kind: str
    inputs: tuple[str, ...]
    times: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    preset: str | None
    params: PhysParams
    grid: GridSpec
    solver: SolverSettings
    trajectories: TrajSettings
    vortices: VortexSettings
    chaos: ChaosSettings
    plot: PlotSettings
    snapshots: str | None = None
    sweep: tuple[tuple[float, float], ...] = field(default=())
    source: str = ""
    out: str | None = None
    grid_overrides: tuple[tuple[str, str], ...] = ()
    resolved: tuple = ()

    def to_ini(self) -> str:
        """Fully resolved config text; loading it reproduces this run exactly."""
        lines = []
        for sec, items in self.resolved:
            if sec == "run":
                items = tuple((k, v) for k, v in items if k != "preset")
                if not items:
                    continue
            lines.append(f"[{sec}]")
            for k, v in items:
                if sec == "physics" and k == "kappa":
                    v = " ".join(repr(a) for a in dict.fromkeys(k_ for k_, _ in self.sweep))
                elif sec == "physics" and k == "hbar":
                    v = " ".join(repr(b) for b in dict.fromkeys(h_ for _, h_ in self.sweep))
                elif sec == "plot" and k == "input":
                    v = "; ".join(self.plot.inputs)
                elif sec == "input" and k == "snapshots":
                    v = self.snapshots or ""
                elif sec == "run" and k == "out":
                    v = self.out or ""
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)

    def points(self) -> list["RunConfig"]:
        """One config per (kappa, hbar) sweep point."""
        out = []
        for kappa, hbar in self.sweep or ((self.params.kappa, self.params.hbar),):
            out.append(self._at(kappa, hbar))
        return out

    def _at(self, kappa: float, hbar: float) -> "RunConfig":
        return replace(self, params=self.params.with_(kappa=kappa, hbar=hbar),
                       grid=self._grid_for(hbar), sweep=((kappa, hbar),))

    def _grid_for(self, hbar):
        return _grid(dict(self.grid_overrides), hbar)

    @property
    def is_sweep(self) -> bool:
        return len(self.sweep) > 1

    def flat(self) -> dict:
        """Every effective setting as a flat dict, for manifests."""
        d = {"preset": self.preset or "", "source": self.source}
        for k, v in asdict(self.params).items():
            d[f"physics.{k}"] = v
        d["grid.half_width"] = self.grid.half_width
        d["grid.n"] = self.grid.n
        for name in ("solver", "trajectories", "vortices", "plot"):
            for k, v in asdict(getattr(self, name)).items():
                d[f"{name}.{k}"] = _flat_value(v)
        c = self.chaos
        d.update({
            "chaos.region": c.region_name,
            "chaos.x_intervals": _flat_value(c.region.x_intervals),
            "chaos.y_intervals": _flat_value(c.region.y_intervals),
            "chaos.count": c.count, "chaos.epsilon": c.epsilon,
            "chaos.direction": _flat_value(c.direction),
            "chaos.fit_window": _flat_value(c.fit_window),
            "chaos.min_coverage": c.min_coverage, "chaos.n_boot": c.n_boot,
            "chaos.seed": c.seed, "chaos.dt": c.dt, "chaos.out_every": c.out_every,
            "chaos.t_end": c.t_end,
        })
        d["input.snapshots"] = self.snapshots or ""
        d["sweep"] = ";".join(f"{k!r} {h!r}" for k, h in self.sweep)
        return d


def _flat_value(v):
    """Manifest text: pairs as 'a b', lists of them joined by ';'."""
    if v is None:
        return "auto"
    if isinstance(v, (list, tuple)):
        if v and all(isinstance(x, (list, tuple)) for x in v):
            return ";".join(" ".join(repr(float(a)) for a in x) for x in v)
        return " ".join(x if isinstance(x, str) else repr(float(x)) for x in v)
    return v


# -- parsing ---------------------------------------------------------------

def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
    cp.optionxform = str
    return cp


def _load_layers(text: str, name: str, seen: tuple[str, ...] = ()) -> list[configparser.ConfigParser]:
    cp = _parser()
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(f"{name}: {exc}") from None
    parent = cp.get("run", "preset", fallback=None)
    layers = []
    if parent:
        layers = _preset_layers(parent.strip(), seen)
    return layers + [cp]


def _preset_layers(name: str, seen: tuple[str, ...] = ()) -> list[configparser.ConfigParser]:
    if name in seen:
        raise ConfigError(f"preset cycle: {' -> '.join(seen + (name,))}")
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (known: {', '.join(sorted(PRESETS))})")
    return _load_layers(PRESETS[name], f"<preset {name}>", seen + (name,))


def _merge(layers) -> dict[str, dict[str, str]]:
    merged: dict[str, dict[str, str]] = {}
    for cp in layers:
        for sec in cp.sections():
            merged.setdefault(sec, {}).update(cp[sec])
    return merged


_KNOWN = {
    "run": {"preset", "out"},
    "input": {"snapshots"},
}
for _sec, _keys in _merge(_preset_layers("base")).items():
    _KNOWN.setdefault(_sec, set()).update(_keys)


def _num(sec, key, raw, lo=None, hi=None, *, integer=False, lo_open=False):
    try:
        v = int(raw) if integer else float(raw)
    except ValueError:
        raise ConfigError(f"[{sec}] {key} = {raw!r} is not a number") from None
    if not integer and not math.isfinite(v):
        raise ConfigError(f"[{sec}] {key} must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(f"[{sec}] {key} = {raw} below bound {lo}")
    if hi is not None and v > hi:
        raise ConfigError(f"[{sec}] {key} = {raw} above bound {hi}")
    return v


def _floats(sec, key, raw) -> list[float]:
    parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
    return [_num(sec, key, p) for p in parts]


def _grid(raw: dict, hbar: float) -> GridSpec:
    base = default_grid(hbar)
    hw = raw.get("half_width", "auto").strip()
    n = raw.get("n", "auto").strip()
    L = base.half_width if hw == "auto" else _num("grid", "half_width", hw, 0, lo_open=True)
    nn = base.n if n == "auto" else _num("grid", "n", n, 16, integer=True)
    try:
        return GridSpec(half_width=L, n=nn)
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None


def _auto(raw: str, fallback: float, sec: str, key: str) -> float:
    raw = raw.strip()
    return fallback if raw == "auto" else _num(sec, key, raw, 0)


def build(merged: dict[str, dict[str, str]], preset: str | None, source: str, base_dir: Path) -> RunConfig:
    for sec, items in merged.items():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(items) - _KNOWN[sec]
        if extra:
            raise ConfigError(f"[{sec}] unknown keys: {', '.join(sorted(extra))}")

    ph = merged["physics"]
    kappas = _floats("physics", "kappa", ph["kappa"])
    hbars = _floats("physics", "hbar", ph["hbar"])
    if not kappas or not hbars:
        raise ConfigError("[physics] kappa and hbar need at least one value")
    for h in hbars:
        if h <= 0:
            raise ConfigError("[physics] hbar must be positive")
    sweep = tuple(itertools.product(kappas, hbars))
    try:
        params = PhysParams(
            kappa=kappas[0], hbar=hbars[0],
            alpha=_num("physics", "alpha", ph["alpha"]),
            beta=_num("physics", "beta", ph["beta"], 0),
            m=_num("physics", "m", ph["m"], 0, lo_open=True),
            omega_x=_num("physics", "omega_x", ph["omega_x"], 0, lo_open=True),
            omega_y=_num("physics", "omega_y", ph["omega_y"], 0, lo_open=True),
        )
    except ValueError as exc:
        raise ConfigError(f"[physics] {exc}") from None

    so = merged["solver"]
    solver = SolverSettings(
        t_end=_num("solver", "t_end", so["t_end"], 0),
        dt_snap=_num("solver", "dt_snap", so["dt_snap"], 0, lo_open=True),
        dt_max=_num("solver", "dt_max", so["dt_max"], 0, lo_open=True),
        dt_min=_num("solver", "dt_min", so["dt_min"], 0, lo_open=True),
        tol=_num("solver", "tol", so["tol"], 0, lo_open=True),
        norm_tol=_num("solver", "norm_tol", so["norm_tol"], 0, 1, lo_open=True),
        leak_tol=_num("solver", "leak_tol", so["leak_tol"], 0, 1, lo_open=True),
    )
    if solver.dt_min > solver.dt_max:
        raise ConfigError("[solver] dt_min exceeds dt_max")
    n_snap = solver.t_end / solver.dt_snap
    if abs(n_snap - round(n_snap)) > 1e-9 * max(1.0, n_snap):
        raise ConfigError("[solver] t_end must be a multiple of dt_snap")

    tr = merged["trajectories"]
    seeds = []
    for chunk in tr["seeds"].split(";"):
        if chunk.strip():
            xy = _floats("trajectories", "seeds", chunk)
            if len(xy) != 2:
                raise ConfigError(f"[trajectories] seed {chunk.strip()!r} needs two coordinates")
            seeds.append(tuple(xy))
    traj = TrajSettings(
        dt=_num("trajectories", "dt", tr["dt"], 0, lo_open=True),
        out_every=_num("trajectories", "out_every", tr["out_every"], 1, integer=True),
        seeds=tuple(seeds),
        t_end=_auto(tr["t_end"], solver.t_end, "trajectories", "t_end"),
    )

    vo = merged["vortices"]
    region = _floats("vortices", "region", vo["region"])
    if len(region) != 4 or region[0] >= region[1] or region[2] >= region[3]:
        raise ConfigError("[vortices] region must be 'xmin xmax ymin ymax'")
    pr = vo["pair_radius"].strip()
    mr = vo["match_radius"].strip()
    vort = VortexSettings(
        region=tuple(region),
        t_start=_num("vortices", "t_start", vo["t_start"], 0),
        t_end=_auto(vo["t_end"], solver.t_end, "vortices", "t_end"),
        frame_interval=_num("vortices", "frame_interval", vo["frame_interval"], 0, lo_open=True),
        match_radius=None if mr == "auto" else _num("vortices", "match_radius", mr, 0, lo_open=True),
        pair_radius=None if pr == "auto" else _num("vortices", "pair_radius", pr, 0, lo_open=True),
    )
    if vort.t_start > vort.t_end:
        raise ConfigError("[vortices] t_start after t_end")

    ch = merged["chaos"]
    rname = ch["region"].strip()
    if rname in NAMED_REGIONS:
        creg = NAMED_REGIONS[rname]
    else:
        ivs = []
        for chunk in rname.split(";"):
            ab = _floats("chaos", "region", chunk)
            if len(ab) != 2 or ab[0] > ab[1]:
                raise ConfigError(f"[chaos] bad interval {chunk.strip()!r}")
            ivs.append(tuple(ab))
        creg = RegionSpec.symmetric(ivs)
    fw = ch["fit_window"].strip()
    window = None
    if fw != "auto":
        window = tuple(_floats("chaos", "fit_window", fw))
        if len(window) != 2 or window[0] >= window[1]:
            raise ConfigError("[chaos] fit_window must be 't1 t2' with t1 < t2")
    direction = tuple(_floats("chaos", "direction", ch["direction"]))
    if len(direction) != 2 or direction == (0.0, 0.0):
        raise ConfigError("[chaos] direction must be two numbers, not both zero")
    chaos = ChaosSettings(
        region=creg, region_name=rname,
        count=_num("chaos", "count", ch["count"], 1, integer=True),
        epsilon=_num("chaos", "epsilon", ch["epsilon"], 0, lo_open=True),
        direction=direction, fit_window=window,
        min_coverage=_num("chaos", "min_coverage", ch["min_coverage"], 0, 1),
        n_boot=_num("chaos", "n_boot", ch["n_boot"], 1, integer=True),
        seed=_num("chaos", "seed", ch["seed"], 0, integer=True),
        dt=_num("chaos", "dt", ch["dt"], 0, lo_open=True),
        out_every=_num("chaos", "out_every", ch["out_every"], 1, integer=True),
        t_end=_auto(ch["t_end"], solver.t_end, "chaos", "t_end"),
    )

    pl = merged["plot"]
    kind = pl["kind"].strip()
    if kind not in ("density", "quiver", "trajectory", "lnxi"):
        raise ConfigError(f"[plot] unknown kind {kind!r}")
    inputs = tuple(str((base_dir / p).resolve()) for p in re.split(r"[;\n]+", pl["input"]) if p.strip()
                   for p in [p.strip()])
    plot = PlotSettings(kind=kind, inputs=inputs, times=tuple(_floats("plot", "times", pl["times"])))

    for name, t in (("trajectories", traj.t_end), ("vortices", vort.t_end), ("chaos", chaos.t_end)):
        if t > solver.t_end + 1e-12:
            raise ConfigError(f"[{name}] t_end {t} exceeds [solver] t_end {solver.t_end}")

    snap = merged.get("input", {}).get("snapshots", "").strip()
    out = merged.get("run", {}).get("out", "").strip()
    cfg = RunConfig(
        preset=preset, params=params, grid=_grid(merged["grid"], hbars[0]), solver=solver,
        trajectories=traj, vortices=vort, chaos=chaos, plot=plot,
        snapshots=str((base_dir / snap).resolve()) if snap else None,
        sweep=sweep, source=source,
        out=str((base_dir / out).resolve()) if out else None,
        grid_overrides=tuple(sorted(merged["grid"].items())),
        resolved=tuple((sec, tuple(sorted(merged[sec].items()))) for sec in sorted(merged)),
    )
    return cfg


def load(path=None, preset: str | None = None, overrides: str | None = None) -> RunConfig:
    """Resolve a config file and/or preset into a validated :class:`RunConfig`.

    ``preset`` (e.g. from the command line) replaces any preset the file names.
    ``overrides`` is extra INI text applied last (used by tests).
    """
    if path is None and preset is None:
        raise ConfigError("need a config file or a preset")
    layers = []
    base_dir = Path.cwd()
    source = ""
    file_layer = None
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        base_dir = p.resolve().parent
        source = str(p)
        file_layer = _parser()
        try:
            file_layer.read_string(text, source=str(p))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        if preset is None:
            preset = file_layer.get("run", "preset", fallback=None)
            preset = preset.strip() if preset else None
    layers += _preset_layers(preset or "base")
    if file_layer is not None:
        layers.append(file_layer)
    if overrides:
        layers += _load_layers(overrides, "<overrides>")[-1:]
    return build(_merge(layers), preset, source, base_dir)


def output_dir(cfg: RunConfig, out: str | None) -> Path:
    """``--out`` wins, then ``[run] out``, then ``./out_<preset>``."""
    if out:
        return Path(out)
    if cfg.out:
        return Path(cfg.out)
    return Path.cwd() / f"out_{cfg.preset or 'run'}"
