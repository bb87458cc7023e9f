"""Nodal points of psi, their winding numbers, and identity tracking in time."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import _kernels as K
from . import spectral
from .errors import AmbiguousMatchError, DegenerateFieldError
from .tdse import WaveField

log = logging.getLogger(__name__)

__all__ = [
    "NodalPoint",
    "VortexTrack",
    "VortexEvent",
    "TrackResult",
    "find_nodes",
    "track",
    "total_winding",
    "write_tracks_csv",
    "write_events_csv",
]


@dataclass(frozen=True)
class NodalPoint:
    t: float
    x: float
    y: float
    winding: int
    residual: float

    @property
    def degenerate(self) -> bool:
        return abs(self.winding) > 1


@dataclass
class VortexTrack:
    id: int
    points: list[NodalPoint]
    birth: tuple[str, float, int | None] = ("initial", math.nan, None)
    death: tuple[str, float, int | None] = ("final", math.nan, None)

    @property
    def winding(self) -> int:
        return self.points[0].winding

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def xy(self) -> np.ndarray:
        return np.array([(p.x, p.y) for p in self.points])


@dataclass(frozen=True)
class VortexEvent:
    kind: str  # "creation" or "annihilation"
    t: float
    x: float
    y: float
    track_a: int
    track_b: int


@dataclass
class TrackResult:
    tracks: list[VortexTrack]
    events: list[VortexEvent]
    ambiguities: list[str] = dc_field(default_factory=list)

    def __iter__(self):
        return iter(self.tracks)

    def __len__(self):
        return len(self.tracks)


def _frame_data(field: WaveField) -> np.ndarray:
    c = spectral.coefficients(field.values)
    H = np.zeros((field.grid.n + 2, field.grid.n + 2, 2, 4), dtype=complex)
    H[:, :, 0, :] = spectral.hermite_data(c, field.grid)
    return H


class _Static:
    """Bicubic evaluator for a single field (time weights 1, 0, 0, 0)."""

    def __init__(self, field: WaveField):
        self.H = _frame_data(field)
        g = field.grid
        self.xmin, self.dx, self.nn = -g.L, g.dx, g.n + 2

    def __call__(self, x, y):
        p, px, py, ok = K.eval_psi(self.H, self.H, 1.0, 0.0, 0.0, 0.0, x, y, self.xmin, self.dx, self.nn)
        if not ok:
            raise ValueError("outside the grid")
        return p, px, py


def _winding(ev: _Static, x0: float, y0: float, radius: float, samples: int) -> int:
    ang = 2.0 * np.pi * np.arange(samples + 1) / samples
    ph = np.array([np.angle(ev(x0 + radius * math.cos(a), y0 + radius * math.sin(a))[0]) for a in ang])
    d = np.diff(ph)
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(d.sum() / (2.0 * np.pi)))


def _newton(ev: _Static, x: float, y: float, max_iter: int = 50, tol: float = 1e-12):
    for _ in range(max_iter):
        try:
            p, px, py = ev(x, y)
        except ValueError:
            return x, y, False
        a, b, c, d = px.real, py.real, px.imag, py.imag
        det = a * d - b * c
        scale = max(abs(a), abs(b), abs(c), abs(d))
        if scale == 0.0 or abs(det) < 1e-12 * scale * scale:
            return x, y, False
        dx_ = -(d * p.real - b * p.imag) / det
        dy_ = -(-c * p.real + a * p.imag) / det
        x += dx_
        y += dy_
        if math.hypot(dx_, dy_) < tol:
            return x, y, True
    return x, y, True


def _diagonal_start(ev: _Static, x0: float, y0: float, h: float):
    """Best starting point on the two cell diagonals (fallback when the Jacobian is singular)."""
    s = np.linspace(0.0, 1.0, 33)
    best = (math.inf, x0 + h / 2, y0 + h / 2)
    for (ax, ay), (bx, by) in (((x0, y0), (x0 + h, y0 + h)), ((x0 + h, y0), (x0, y0 + h))):
        for u in s:
            x, y = ax + u * (bx - ax), ay + u * (by - ay)
            r = abs(ev(x, y)[0])
            if r < best[0]:
                best = (r, x, y)
    return best[1], best[2]


def find_nodes(
    field: WaveField,
    region: tuple[float, float, float, float] | None = None,
    *,
    winding_radius: float = 1.5,
    winding_samples: int = 32,
    degenerate_fraction: float = 0.02,
    residual_tol: float = 1e-8,
    amplitude_floor: float = 1e-6,
) -> list[NodalPoint]:
    """Isolated zeros of psi inside ``region = (xmin, xmax, ymin, ymax)``.

    Candidate cells show a sign change of both Re psi and Im psi, or a
    nonzero phase circulation around their corners.  Each candidate is
    refined by Newton iteration on the bicubic interpolant, and its winding
    is the phase circulation on a circle of ``winding_radius * dx``.
    Cells whose corner amplitudes are all below ``amplitude_floor * peak``
    are ignored: in the far tails the phase is roundoff noise.
    """
    g = field.grid
    L = g.L
    if region is None:
        region = (-L, L, -L, L)
    x0r, x1r, y0r, y1r = region
    if not (-L <= x0r < x1r <= L and -L <= y0r < y1r <= L):
        raise ValueError(f"region {region} not inside the box [-{L}, {L}]^2")
    ev = _Static(field)
    vals = ev.H[:, :, 0, 0]
    xs = g.coords_with_boundary
    ix = np.nonzero((xs >= x0r) & (xs <= x1r))[0]
    iy = np.nonzero((xs >= y0r) & (xs <= y1r))[0]
    if ix.size < 2 or iy.size < 2:
        return []
    sub = vals[ix[0] : ix[-1] + 1, iy[0] : iy[-1] + 1]
    peak = float(np.abs(field.values).max())

    # real up to a global phase: nodal lines, not points
    z = np.sum(sub * sub)
    rot = sub * np.exp(-0.5j * np.angle(z)) if z != 0 else sub
    nrm = np.linalg.norm(sub)
    corners = [sub[:-1, :-1], sub[1:, :-1], sub[1:, 1:], sub[:-1, 1:]]

    def straddles(parts):
        lo = np.minimum.reduce(parts)
        hi = np.maximum.reduce(parts)
        return (lo <= 0) & (hi >= 0)

    live = np.maximum.reduce([np.abs(c) for c in corners]) >= amplitude_floor * peak
    flagged = straddles([c.real for c in corners]) & straddles([c.imag for c in corners]) & live
    if nrm > 0 and np.linalg.norm(rot.imag) <= 1e-10 * nrm and np.any(straddles([c.real for c in [rot[:-1, :-1], rot[1:, :-1], rot[1:, 1:], rot[:-1, 1:]]])):
        raise DegenerateFieldError("field is real up to a global phase; zero set consists of nodal lines")
    frac = flagged.sum() / max(int(live.sum()), 1)
    if frac > degenerate_fraction:
        raise DegenerateFieldError(f"{100 * frac:.1f}% of cells flag crossings (> {100 * degenerate_fraction:g}%)")

    ph = np.angle(corners)
    circ = sum(((ph[(q + 1) % 4] - ph[q] + np.pi) % (2 * np.pi) - np.pi) for q in range(4))
    plaquette = (np.abs(circ) > np.pi) & live
    cand = np.argwhere(flagged | plaquette)

    dx = g.dx
    found: list[tuple[float, float, float]] = []
    for a, b in cand:
        cx, cy = xs[ix[0] + a], xs[iy[0] + b]
        x, y, ok = _newton(ev, cx + dx / 2, cy + dx / 2)
        if not ok:
            x, y = _diagonal_start(ev, cx, cy, dx)
            x, y, ok = _newton(ev, x, y)
        if not ok:
            continue
        # must stay near the seeding cell and inside the region
        if not (cx - dx <= x <= cx + 2 * dx and cy - dx <= y <= cy + 2 * dx):
            continue
        if not (x0r <= x <= x1r and y0r <= y <= y1r):
            continue
        res = abs(ev(x, y)[0])
        if res >= residual_tol * peak:
            continue
        if any(math.hypot(x - u, y - v) < 1e-3 * dx for u, v, _ in found):
            continue
        found.append((x, y, res))

    nodes = []
    for q, (x, y, res) in enumerate(found):
        others = [math.hypot(x - u, y - v) for k, (u, v, _) in enumerate(found) if k != q]
        r = winding_radius * dx
        if others:
            r = min(r, 0.4 * min(others))
        w = _winding(ev, x, y, r, winding_samples)
        if w == 0:
            continue
        if abs(w) > 1:
            log.warning("degenerate node at (%.4f, %.4f) with winding %d", x, y, w)
        nodes.append(NodalPoint(field.t, x, y, w, res))
    nodes.sort(key=lambda p: (p.x, p.y))
    return nodes


def total_winding(frame) -> int:
    """Net topological charge of a frame (list of nodes or (t, nodes))."""
    nodes = frame[1] if isinstance(frame, tuple) else frame
    return int(sum(p.winding for p in nodes))


def _pair_up(ids, pos, wind, radius):
    """Greedy (+1, -1) pairing of tracks by distance; returns list of (id_a, id_b)."""
    cands = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if wind[i] + wind[j] == 0:
                d = math.dist(pos[i], pos[j])
                if d < radius:
                    cands.append((d, ids[i], ids[j], i, j))
    cands.sort()
    used, pairs = set(), []
    for d, a, b, i, j in cands:
        if i in used or j in used:
            continue
        used.update((i, j))
        pairs.append((a, b, i, j))
    return pairs


def track(
    frames,
    match_radius: float,
    pair_radius: float | None = None,
    *,
    strict: bool = False,
    tie_tol: float = 1e-6,
    region: tuple[float, float, float, float] | None = None,
) -> TrackResult:
    """Link nodes frame to frame into identity-resolved tracks.

    ``frames`` is a time-ordered (increasing or decreasing) list of
    ``(t, nodes)``.  Matching is greedy nearest-neighbour among nodes of
    equal winding closer than ``match_radius``.  Tracks that start (end) in
    the same frame as an opposite-winding partner within ``pair_radius``
    are linked as a creation (annihilation) event.  Ties within ``tie_tol``
    are resolved by the smaller track id and reported in ``ambiguities``;
    with ``strict=True`` they raise :class:`AmbiguousMatchError` instead.
    Given the analysis ``region``, unpaired births and deaths within
    ``match_radius`` of its edge are labelled ``"boundary"`` (the node
    crossed the window edge) rather than ``"unpaired"``.
    """
    if pair_radius is None:
        pair_radius = 2.0 * match_radius
    frames = [(float(t), list(nodes)) for t, nodes in frames]
    ts = [t for t, _ in frames]
    if len(ts) > 1:
        d = np.diff(ts)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("frames must be strictly monotonic in time")
    tracks: list[VortexTrack] = []
    events: list[VortexEvent] = []
    ambiguities: list[str] = []
    active: list[int] = []

    def lone(x, y):
        if region is not None:
            x0, x1, y0, y1 = region
            if min(x - x0, x1 - x, y - y0, y1 - y) < match_radius:
                return "boundary"
        return "unpaired"

    def births(new_ids, t, first):
        if first:
            return
        info = [(tracks[i].points[0].x, tracks[i].points[0].y) for i in new_ids]
        w = [tracks[i].winding for i in new_ids]
        for a, b, i, j in _pair_up(new_ids, info, w, pair_radius):
            tracks[a].birth = ("creation", t, b)
            tracks[b].birth = ("creation", t, a)
            mx, my = (info[i][0] + info[j][0]) / 2, (info[i][1] + info[j][1]) / 2
            events.append(VortexEvent("creation", t, mx, my, min(a, b), max(a, b)))
        for i in new_ids:
            if tracks[i].birth[0] != "creation":
                p = tracks[i].points[0]
                tracks[i].birth = (lone(p.x, p.y), t, None)

    def deaths(dead_ids, t):
        info = [(tracks[i].points[-1].x, tracks[i].points[-1].y) for i in dead_ids]
        w = [tracks[i].winding for i in dead_ids]
        for a, b, i, j in _pair_up(dead_ids, info, w, pair_radius):
            tracks[a].death = ("annihilation", t, b)
            tracks[b].death = ("annihilation", t, a)
            mx, my = (info[i][0] + info[j][0]) / 2, (info[i][1] + info[j][1]) / 2
            events.append(VortexEvent("annihilation", t, mx, my, min(a, b), max(a, b)))
        for i in dead_ids:
            if tracks[i].death[0] != "annihilation":
                p = tracks[i].points[-1]
                tracks[i].death = (lone(p.x, p.y), t, None)

    for f, (t, nodes) in enumerate(frames):
        if f == 0:
            for p in nodes:
                tracks.append(VortexTrack(len(tracks), [p], ("initial", t, None)))
                active.append(len(tracks) - 1)
            continue
        cands = []
        for tid in active:
            last = tracks[tid].points[-1]
            for k, p in enumerate(nodes):
                if p.winding != last.winding:
                    continue
                d = math.hypot(p.x - last.x, p.y - last.y)
                if d < match_radius:
                    cands.append((d, tid, k))
        cands.sort()
        for q in range(1, len(cands)):
            if abs(cands[q][0] - cands[q - 1][0]) <= tie_tol and (
                cands[q][1] == cands[q - 1][1] or cands[q][2] == cands[q - 1][2]
            ):
                msg = f"tie at t={t}: tracks {cands[q - 1][1]}/{cands[q][1]} nodes {cands[q - 1][2]}/{cands[q][2]}"
                if strict:
                    raise AmbiguousMatchError(msg)
                ambiguities.append(msg)
        used_t, used_n = set(), set()
        for d, tid, k in cands:
            if tid in used_t or k in used_n:
                continue
            used_t.add(tid)
            used_n.add(k)
            tracks[tid].points.append(nodes[k])
        dead = [tid for tid in active if tid not in used_t]
        deaths(dead, frames[f - 1][0])
        new_ids = []
        for k, p in enumerate(nodes):
            if k not in used_n:
                tracks.append(VortexTrack(len(tracks), [p]))
                new_ids.append(len(tracks) - 1)
        births(new_ids, t, False)
        active = [tid for tid in active if tid in used_t] + new_ids
    t_last = frames[-1][0] if frames else math.nan
    for tid in active:
        tracks[tid].death = ("final", t_last, None)
    events.sort(key=lambda e: (e.t, e.kind, e.track_a))
    return TrackResult(tracks, events, ambiguities)


def write_tracks_csv(result: TrackResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["track_id", "t", "x", "y", "winding"])
        for tr in result.tracks:
            for p in tr.points:
                w.writerow([tr.id, repr(p.t), repr(p.x), repr(p.y), p.winding])


def write_events_csv(result: TrackResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_type", "t", "x", "y", "track_id_a", "track_id_b"])
        for e in result.events:
            w.writerow([e.kind, repr(e.t), repr(e.x), repr(e.y), e.track_a, e.track_b])
