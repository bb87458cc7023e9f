"""Sensitivity to initial conditions from pairs of nearby Bohmian trajectories.

For a pair a, b the phase-space distance is

    d(t) = sqrt(dx^2 + dy^2 + dpx^2 + dpy^2),   xi(t) = d(t) / d(0),

and the ensemble diagnostic is the mean of ln xi(t) over pairs together
with its least-squares slope in time.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import ZeroInitialSeparation
from .trajectories import FieldInterpolant, Trajectory, integrate_batch

__all__ = [
    "RegionSpec",
    "PairSpec",
    "PairSeparation",
    "SeparationSeries",
    "SlopeFit",
    "FIG4_LEFT",
    "FIG4_RIGHT",
    "make_pairs",
    "separation",
    "ensemble_mean",
    "fit_slope",
    "bootstrap_slope",
    "run_pairs",
    "write_mean_csv",
    "write_pairs_csv",
]


@dataclass(frozen=True)
class RegionSpec:
    """Seed region: a union of intervals on each axis (the product set is sampled)."""

    x_intervals: tuple[tuple[float, float], ...]
    y_intervals: tuple[tuple[float, float], ...]

    @classmethod
    def symmetric(cls, intervals) -> "RegionSpec":
        iv = tuple((float(a), float(b)) for a, b in intervals)
        return cls(iv, iv)

    def contains(self, x: float, y: float, tol: float = 1e-12) -> bool:
        inx = any(a - tol <= x <= b + tol for a, b in self.x_intervals)
        iny = any(a - tol <= y <= b + tol for a, b in self.y_intervals)
        return inx and iny


FIG4_LEFT = RegionSpec.symmetric([(-1.5, -1.1), (1.1, 1.5)])
FIG4_RIGHT = RegionSpec.symmetric([(-0.5, -0.1), (0.1, 0.5)])


@dataclass(frozen=True)
class PairSpec:
    x0: float
    y0: float
    dx0: float
    dy0: float

    @property
    def epsilon(self) -> float:
        return math.hypot(self.dx0, self.dy0)

    @property
    def seeds(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (self.x0, self.y0), (self.x0 + self.dx0, self.y0 + self.dy0)


def _axis_points(intervals, k: int) -> list[float]:
    pts = []
    for a, b in intervals:
        if b < a:
            raise ValueError(f"empty interval ({a}, {b})")
        pts.extend([a] if a == b else np.linspace(a, b, k).tolist())
    return pts


def make_pairs(region: RegionSpec, count: int = 60, epsilon: float = 1e-4,
               direction: tuple[float, float] = (1.0, 1.0)) -> list[PairSpec]:
    """Regular lattice of pair seeds over ``region``, row-major, first ``count`` points.

    Each interval gets the same number of evenly spaced points, the smallest
    number for which the product lattice holds ``count`` seeds.  The partner
    of each base seed is displaced by ``epsilon`` along ``direction``.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    norm = math.hypot(*direction)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    ux, uy = direction[0] / norm, direction[1] / norm
    k = 1
    while True:
        xs = _axis_points(region.x_intervals, k)
        ys = _axis_points(region.y_intervals, k)
        if len(xs) * len(ys) >= count:
            break
        if all(a == b for a, b in region.x_intervals + region.y_intervals):
            raise ValueError(f"region holds only {len(xs) * len(ys)} seeds, {count} requested")
        k += 1
    bases = [(x, y) for x in xs for y in ys][:count]
    return [PairSpec(x, y, epsilon * ux, epsilon * uy) for x, y in bases]


@dataclass
class PairSeparation:
    t: np.ndarray
    ln_xi: np.ndarray
    truncated: bool = False


def separation(traj_a: Trajectory, traj_b: Trajectory) -> PairSeparation:
    """ln xi(t) of two trajectories sampled at the same times.

    The series stops at the shorter of the two; ``truncated`` is set if
    either trajectory ended early.  A seed placed on a node has no samples
    at all, which gives an empty, truncated series.
    """
    n = min(len(traj_a.states), len(traj_b.states))
    if n == 0:
        return PairSeparation(np.empty(0), np.empty(0), True)
    a, b = traj_a.states[:n], traj_b.states[:n]
    if not np.allclose(a[:, 0], b[:, 0], rtol=0, atol=1e-9):
        raise ValueError("trajectories are not sampled at the same times")
    d = np.sqrt(np.sum((a[:, 1:] - b[:, 1:]) ** 2, axis=1))
    if d[0] == 0:
        raise ZeroInitialSeparation("pair starts at zero phase-space distance")
    truncated = traj_a.truncated or traj_b.truncated or len(traj_a.states) != len(traj_b.states)
    return PairSeparation(a[:, 0].copy(), np.log(d / d[0]), truncated)


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    window: tuple[float, float]
    n: int


@dataclass
class SeparationSeries:
    t: np.ndarray
    mean: np.ndarray
    n_effective: np.ndarray
    per_pair: list[PairSeparation]
    pair_ids: list[int]
    excluded: list[int] = dc_field(default_factory=list)
    fit: SlopeFit | None = None

    @property
    def count(self) -> int:
        return len(self.per_pair)


def ensemble_mean(series: list[PairSeparation], min_coverage: float = 0.8,
                  pair_ids: list[int] | None = None) -> SeparationSeries:
    """Pointwise mean of ln xi over pairs.

    Pairs whose series end before ``min_coverage`` of the full time span are
    excluded (and listed in ``excluded``).  Shorter surviving pairs only
    contribute where they have samples; ``n_effective`` counts contributors
    per time.  Sums are exactly rounded, so the result does not depend on
    the order of the pairs.
    """
    if pair_ids is None:
        pair_ids = list(range(len(series)))
    if len(series) < 2:
        raise ValueError("need at least two series")
    longest = max(series, key=lambda s: len(s.t))
    t = longest.t
    span = t[-1] - t[0]
    keep, keep_ids, excluded = [], [], []
    for pid, s in zip(pair_ids, series):
        if len(s.t) and s.t[-1] - t[0] >= min_coverage * span - 1e-12:
            keep.append(s)
            keep_ids.append(pid)
        else:
            excluded.append(pid)
    if not keep:
        raise ValueError("every pair was excluded")
    mean = np.empty(len(t))
    neff = np.zeros(len(t), dtype=int)
    for i in range(len(t)):
        vals = [s.ln_xi[i] for s in keep if i < len(s.ln_xi)]
        neff[i] = len(vals)
        mean[i] = math.fsum(vals) / len(vals) if vals else math.nan
    return SeparationSeries(t.copy(), mean, neff, keep, keep_ids, excluded)


def fit_slope(series: SeparationSeries, window: tuple[float, float] | None = None) -> SlopeFit:
    """Ordinary least squares of mean ln xi against t over ``window``.

    The default window is [t_end / 5, t_end].
    """
    t, y = series.t, series.mean
    if window is None:
        window = (t[0] + (t[-1] - t[0]) / 5.0, t[-1])
    t1, t2 = window
    if t1 < t[0] - 1e-12 or t2 > t[-1] + 1e-12 or t2 <= t1:
        raise ValueError(f"window {window} outside the sampled range [{t[0]}, {t[-1]}]")
    sel = (t >= t1 - 1e-12) & (t <= t2 + 1e-12) & np.isfinite(y)
    if sel.sum() < 10:
        raise ValueError(f"fit window holds {int(sel.sum())} samples, need at least 10")
    A = np.vstack([t[sel], np.ones(sel.sum())]).T
    coef, res, *_ = np.linalg.lstsq(A, y[sel], rcond=None)
    rss = float(res[0]) if res.size else float(np.sum((A @ coef - y[sel]) ** 2))
    fit = SlopeFit(float(coef[0]), float(coef[1]), rss, (float(t1), float(t2)), int(sel.sum()))
    series.fit = fit
    return fit


def bootstrap_slope(series: SeparationSeries, window=None, n_boot: int = 1000, level: float = 0.95,
                    seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval of the fitted slope, resampling pairs."""
    fit = fit_slope(series, window)
    t = series.t
    sel = (t >= fit.window[0] - 1e-12) & (t <= fit.window[1] + 1e-12)
    n = len(series.per_pair)
    tw = t[sel]
    mat = np.full((n, sel.sum()), np.nan)
    for i, s in enumerate(series.per_pair):
        seg = np.full(len(t), np.nan)
        seg[: len(s.ln_xi)] = s.ln_xi
        mat[i] = seg[sel]
    rng = np.random.default_rng(seed)
    slopes = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        y = np.nanmean(mat[idx], axis=0)
        ok = np.isfinite(y)
        slopes[b] = np.polyfit(tw[ok], y[ok], 1)[0]
    lo, hi = np.quantile(slopes, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def run_pairs(interp: FieldInterpolant, pairs: list[PairSpec], t_span=None, dt: float = 1e-5,
              out_every: int = 1000) -> tuple[list[PairSeparation], list[Trajectory]]:
    """Integrate both members of every pair and return their ln xi series."""
    seeds = [s for p in pairs for s in p.seeds]
    trajs = integrate_batch(interp, seeds, t_span, dt, out_every)
    seps = [separation(trajs[2 * i], trajs[2 * i + 1]) for i in range(len(pairs))]
    return seps, trajs


def write_mean_csv(series: SeparationSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean_ln_xi", "n_effective"])
        for t, m, n in zip(series.t, series.mean, series.n_effective):
            w.writerow([repr(float(t)), repr(float(m)), int(n)])


def write_pairs_csv(series: SeparationSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair_id", "t", "ln_xi"])
        for pid, s in zip(series.pair_ids, series.per_pair):
            for t, v in zip(s.t, s.ln_xi):
                w.writerow([pid, repr(float(t)), repr(float(v))])
