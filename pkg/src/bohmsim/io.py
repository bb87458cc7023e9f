"""Snapshot container, run manifests and small CSV helpers.

Snapshot file layout (all integers little-endian uint32)::

    b"BOHMSNAP" | version | endian marker 0x01020304 | header length H
    H bytes of UTF-8 "key=value" lines (params, grid, dt_snap, count, t0)
    count records of: float64 t, then n*n pairs of float64 (re, im), row-major

The reader memory-maps the records, so frames are loaded on demand.
"""
from __future__ import annotations

import csv
import hashlib
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import GridSpec, PhysParams
from .tdse import WaveField

MAGIC = b"BOHMSNAP"
VERSION = 1
ENDIAN_MARKER = 0x01020304

__all__ = [
    "SnapshotWriter",
    "SnapshotFile",
    "write_snapshots",
    "read_snapshots",
    "write_manifest",
    "read_manifest",
    "write_history_csv",
    "file_sha256",
]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def write_manifest(path, entries: dict) -> None:
    """Sorted ``key=value`` lines; floats use repr so they round-trip exactly."""
    lines = [f"{k}={_fmt(entries[k])}" for k in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_history_csv(path, history) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "norm", "energy"])
        for t, n, e in history:
            w.writerow([repr(float(t)), repr(float(n)), repr(float(e))])


def _header_text(params: PhysParams, grid: GridSpec, dt_snap: float, count: int, t0: float) -> bytes:
    entries = {f"param.{k}": v for k, v in asdict(params).items()}
    entries.update({"grid.half_width": grid.half_width, "grid.n": grid.n,
                    "dt_snap": float(dt_snap), "count": int(count), "t0": float(t0)})
    return "".join(f"{k}={_fmt(entries[k])}\n" for k in sorted(entries)).encode()


class SnapshotWriter:
    """Append frames to a snapshot file; ``count`` must be known up front."""

    def __init__(self, path, params: PhysParams, grid: GridSpec, dt_snap: float, count: int, t0: float):
        self.path = Path(path)
        self.grid = grid
        self.count = count
        self.written = 0
        head = _header_text(params, grid, dt_snap, count, t0)
        self._fh = self.path.open("wb")
        self._fh.write(MAGIC + struct.pack("<III", VERSION, ENDIAN_MARKER, len(head)) + head)

    def append(self, field: WaveField) -> None:
        if self.written >= self.count:
            raise ValueError("more frames than declared")
        self._fh.write(struct.pack("<d", float(field.t)))
        self._fh.write(np.ascontiguousarray(field.values, dtype="<c16").tobytes())
        self.written += 1

    def close(self) -> None:
        self._fh.close()
        if self.written != self.count:
            raise ValueError(f"declared {self.count} frames, wrote {self.written}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if exc[0] is None:
            self.close()
        else:
            self._fh.close()


def write_snapshots(series, path) -> None:
    with SnapshotWriter(path, series.params, series.grid, series.dt_snap, series.count, series.t0) as w:
        for k in range(series.count):
            w.append(series.frame(k))


class SnapshotFile:
    """Read-only, memory-mapped snapshot series (same surface as SnapshotSeries)."""

    def __init__(self, path):
        self.path = Path(path)
        with self.path.open("rb") as fh:
            magic = fh.read(8)
            if magic != MAGIC:
                raise ValueError(f"{path}: not a snapshot file")
            version, marker, hlen = struct.unpack("<III", fh.read(12))
            if marker != ENDIAN_MARKER:
                raise ValueError(f"{path}: bad endianness marker {marker:#x}")
            if version != VERSION:
                raise ValueError(f"{path}: unsupported format version {version}")
            head = fh.read(hlen).decode()
        meta = dict(line.split("=", 1) for line in head.splitlines() if line)
        self.header = meta
        self.params = PhysParams(**{k[6:]: float(v) for k, v in meta.items() if k.startswith("param.")})
        self.grid = GridSpec(float(meta["grid.half_width"]), int(meta["grid.n"]))
        self.dt_snap = float(meta["dt_snap"])
        self.count = int(meta["count"])
        self.t0 = float(meta["t0"])
        n = self.grid.n
        rec = np.dtype([("t", "<f8"), ("psi", "<c16", (n, n))])
        offset = 20 + hlen
        expected = offset + rec.itemsize * self.count
        size = self.path.stat().st_size
        if size != expected:
            raise ValueError(f"{path}: size {size} does not match header ({expected})")
        self._rec = np.memmap(self.path, dtype=rec, mode="r", offset=offset, shape=(self.count,))

    @property
    def t_end(self) -> float:
        return self.t0 + (self.count - 1) * self.dt_snap

    @property
    def times(self) -> np.ndarray:
        return np.array(self._rec["t"])

    def frame(self, k: int) -> WaveField:
        r = self._rec[k]
        return WaveField(self.grid, float(r["t"]), np.array(r["psi"], dtype=complex), self.params)

    __getitem__ = frame

    def __len__(self) -> int:
        return self.count


def read_snapshots(path) -> SnapshotFile:
    return SnapshotFile(path)
