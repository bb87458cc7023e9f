"""SVG figures: density heatmaps, velocity quivers, trajectories, <ln xi> curves.

Output is byte-identical for identical inputs (fixed SVG hash salt, no
date stamp).  Heatmaps use a linear ``viridis`` scale normalised to each
panel's own maximum.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import spectral  # noqa: E402
from .errors import SchemaError  # noqa: E402
from .tdse import WaveField  # noqa: E402

_RC = {"svg.hashsalt": "bohmsim", "svg.fonttype": "none", "path.simplify": False}


def _save(fig, path) -> None:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def density_svg(fields: list[WaveField], path, region=None) -> list[np.ndarray]:
    """One heatmap panel of |psi|^2 per field; returns the images drawn (rows are y)."""
    n = len(fields)
    images = []
    cols = min(n, 2)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 4 * rows), squeeze=False)
    for ax, f in zip(axes.flat, fields):
        L = f.grid.half_width
        rho = f.density
        images.append(rho.T)
        ax.imshow(rho.T, origin="lower", extent=(-L, L, -L, L), cmap="viridis",
                  vmin=0.0, vmax=float(rho.max()), interpolation="nearest")
        if region is not None:
            ax.set_xlim(region[0], region[1])
            ax.set_ylim(region[2], region[3])
        ax.set_title(f"t = {f.t:g}")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    for ax in list(axes.flat)[n:]:
        ax.axis("off")
    fig.tight_layout()
    _save(fig, path)
    return images


def velocity_grid(field: WaveField, stride: int = 8, floor: float = 1e-3):
    """Guidance velocity on every ``stride``-th node; masked where |psi| < floor*max."""
    g = field.grid
    p = field.params
    c = spectral.coefficients(field.values)
    psi = spectral.synthesize(c, g)[1:-1, 1:-1]
    px = spectral.synthesize(c, g, 1, 0)[1:-1, 1:-1]
    py = spectral.synthesize(c, g, 0, 1)[1:-1, 1:-1]
    amp = np.abs(psi)
    live = amp > floor * amp.max()
    safe = np.where(live, psi, 1.0)
    hm = p.hbar / p.m
    u = np.where(live, hm * np.imag(px / safe), np.nan)
    v = np.where(live, hm * np.imag(py / safe), np.nan)
    X, Y = g.mesh()
    sl = (slice(stride // 2, None, stride),) * 2
    return X[sl], Y[sl], u[sl], v[sl]


def quiver_svg(field: WaveField, path, stride: int = 8, region=None):
    """Arrow plot of the guidance field over the density; returns the arrays drawn."""
    X, Y, U, V = velocity_grid(field, stride)
    if region is not None:
        keep = (X >= region[0]) & (X <= region[1]) & (Y >= region[2]) & (Y <= region[3])
        U = np.where(keep, U, np.nan)
        V = np.where(keep, V, np.nan)
    fig, ax = plt.subplots(figsize=(5, 5))
    L = field.grid.half_width
    ax.imshow(field.density.T, origin="lower", extent=(-L, L, -L, L), cmap="Greys", interpolation="nearest")
    ax.quiver(X, Y, U, V, color="tab:red", angles="xy", pivot="mid")
    if region is not None:
        ax.set_xlim(region[0], region[1])
        ax.set_ylim(region[2], region[3])
    ax.set_title(f"velocity field, t = {field.t:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, path)
    return X, Y, U, V


def trajectory_svg(trajs, path, labels=None) -> None:
    """Parametric (x(t), y(t)) curves with the line y = x for reference."""
    fig, ax = plt.subplots(figsize=(5, 5))
    lo, hi = np.inf, -np.inf
    for i, tr in enumerate(trajs):
        lab = labels[i] if labels else f"({tr.x0:g}, {tr.y0:g})"
        ax.plot(tr.x, tr.y, lw=0.6, label=lab)
        lo = min(lo, tr.x.min(), tr.y.min())
        hi = max(hi, tr.x.max(), tr.y.max())
    if np.isfinite(lo):
        ax.plot([lo, hi], [lo, hi], color="0.6", lw=0.5, ls="--")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(fontsize=7)
    _save(fig, path)


def lnxi_svg(curves, path) -> None:
    """``curves`` is a list of (label, t, mean_ln_xi)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, t, m in curves:
        ax.plot(t, m, lw=0.8, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("<ln xi>")
    ax.legend()
    _save(fig, path)


# -- file front end ----------------------------------------------------------

def _read_csv(path, header: list[str]) -> list[list[str]]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != header:
        got = rows[0] if rows else "empty file"
        raise SchemaError(f"{path}: expected header {','.join(header)}, got {got}")
    return rows[1:]


def _label(path) -> str:
    p = Path(path)
    return p.parent.name or p.stem


def plot_files(kind: str, inputs, out, times=()) -> None:
    """Dispatch on ``kind`` and check that every input has the matching schema."""
    from .io import SnapshotFile
    from .trajectories import read_trajectory_csv

    inputs = list(inputs)
    if not inputs:
        raise SchemaError("no input files given")
    if kind in ("density", "quiver"):
        try:
            snaps = SnapshotFile(inputs[0])
        except ValueError as exc:
            raise SchemaError(str(exc)) from None
        ts = snaps.times
        want = list(times) or (list(ts) if kind == "density" else [ts[0]])
        frames = []
        for t in want:
            k = int(np.argmin(np.abs(ts - t)))
            if abs(ts[k] - t) > 1e-9 * max(1.0, abs(t)):
                raise SchemaError(f"no snapshot at t = {t}")
            frames.append(snaps.frame(k))
        if kind == "density":
            density_svg(frames, out)
        else:
            quiver_svg(frames[0], out)
    elif kind == "trajectory":
        trajs = []
        for p in inputs:
            _read_csv(p, ["t", "x", "y", "px", "py", "flag"])
            trajs.append(read_trajectory_csv(p))
        trajectory_svg(trajs, out)
    elif kind == "lnxi":
        curves = []
        for p in inputs:
            rows = _read_csv(p, ["t", "mean_ln_xi", "n_effective"])
            a = np.array([[float(r[0]), float(r[1])] for r in rows]).reshape(-1, 2)
            curves.append((_label(p), a[:, 0], a[:, 1]))
        lnxi_svg(curves, out)
    else:
        raise SchemaError(f"unknown plot kind {kind!r}")
