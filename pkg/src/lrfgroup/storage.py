"""Scan-data storage: a forgetting store and a persistent occupancy grid.

Map binary layout (little-endian)::

    magic    6 bytes  b"LRFMAP"
    version  u16      FORMAT_VERSION
    origin   3 x f64  gx, gy, gz of the grid's lower-left corner
    res      f64      meters per cell
    extent   f64      side length in meters
    nx, ny   2 x u32  cell counts along GX and GY
    hits     u32[ny * nx]  row-major, row index along GY
    misses   u32[ny * nx]

A JSON sidecar ``<path>.json`` repeats the header fields for inspection; it is
never read back.
"""

from __future__ import annotations

import enum
import heapq
import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lrfgroup.coordsys import FrameConfig, GlobalPoint, body_to_global
from lrfgroup.errors import FormatVersionMismatch, IoFailure, OutOfGrid
from lrfgroup.lrf import ScanSample

log = logging.getLogger(__name__)

MAGIC = b"LRFMAP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<6sH3dddII")

OCCUPIED_MIN_HITS = 2
FREE_MIN_MISSES = 5


class StorageKind(str, enum.Enum):
    OBSCURED = "obscured"
    MAP_PLANNING = "map"


class CellState(enum.IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


@dataclass(frozen=True)
class StoragePolicy:
    kind: StorageKind = StorageKind.OBSCURED
    max_retention_range: float = 10.0
    cell_size: float = 0.05
    grid_resolution: float = 0.1
    grid_extent: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "kind", StorageKind(self.kind))
        if self.kind is StorageKind.OBSCURED:
            if not (self.max_retention_range > 0 and self.cell_size > 0):
                raise ValueError("obscured storage needs positive retention range and cell size")
        elif not (self.grid_resolution > 0 and self.grid_extent > 0):
            raise ValueError("map storage needs positive grid resolution and extent")


def _horizontal_distance(a: GlobalPoint, b: GlobalPoint) -> float:
    return math.hypot(a.gx - b.gx, a.gy - b.gy)


def _sort_key(s: ScanSample):
    return (s.time, s.lrf_id, s.reading.phi)


class ObscuredStore:
    """Keeps only samples near the robot; everything farther away is forgotten.

    Samples are keyed by the ``cell_size`` grid cell of their global position and
    a newer sample replaces an older one in the same cell. Distances are measured
    in the horizontal GX/GY plane.

    Each sample is rechecked only once the robot has travelled farther than the
    sample's slack (retention range minus its distance at the last check); before
    that the triangle inequality guarantees it is still in range.
    """

    def __init__(self, max_retention_range: float, cell_size: float = 0.05):
        self.max_retention_range = max_retention_range
        self.cell_size = cell_size
        self.samples: dict[tuple[int, int], ScanSample] = {}
        self.robot_global: GlobalPoint | None = None
        self.evicted = 0
        self._travel = 0.0
        self._due: list[tuple[float, int, tuple[int, int]]] = []
        self._stamp: dict[tuple[int, int], int] = {}
        self._seq = 0

    def __len__(self) -> int:
        return len(self.samples)

    def capacity_bound(self) -> float:
        """Largest number of cells that can touch the retention disk."""
        return math.pi * (self.max_retention_range + math.sqrt(2.0) * self.cell_size) ** 2 / self.cell_size**2

    def _key(self, g: GlobalPoint) -> tuple[int, int]:
        return (math.floor(g.gx / self.cell_size), math.floor(g.gy / self.cell_size))

    def _schedule(self, key, g: GlobalPoint, robot_global: GlobalPoint) -> bool:
        slack = self.max_retention_range - _horizontal_distance(g, robot_global)
        if slack < 0.0:
            return False
        self._seq += 1
        self._stamp[key] = self._seq
        heapq.heappush(self._due, (self._travel + slack, self._seq, key))
        return True

    def _drop(self, key) -> None:
        del self.samples[key]
        del self._stamp[key]
        self.evicted += 1

    def record(self, sample: ScanSample, robot_global: GlobalPoint) -> ObscuredStore:
        return self.record_many([sample], robot_global)

    def record_many(self, samples, robot_global: GlobalPoint) -> ObscuredStore:
        """Insert the hits among ``samples`` then evict everything out of range."""
        if self.robot_global is not None:
            self._travel += _horizontal_distance(self.robot_global, robot_global)
        self.robot_global = robot_global
        for s in samples:
            if not s.is_hit:
                continue
            key = self._key(s.global_)
            if self._schedule(key, s.global_, robot_global):
                self.samples[key] = s
            elif key in self.samples:
                # the cell's newest sample is already out of range
                self._drop(key)
        due = self._due
        while due and due[0][0] < self._travel:
            _, seq, key = heapq.heappop(due)
            if self._stamp.get(key) != seq:
                continue
            if not self._schedule(key, self.samples[key].global_, robot_global):
                self._drop(key)
        return self

    def query_region(self, center: GlobalPoint, radius: float) -> list[ScanSample]:
        if not radius > 0:
            raise ValueError("radius must be > 0")
        found = [s for s in self.samples.values() if _horizontal_distance(s.global_, center) <= radius]
        return sorted(found, key=_sort_key)

    def stats(self) -> dict:
        return {"kind": StorageKind.OBSCURED.value, "retained": len(self), "evicted": self.evicted}


@dataclass(frozen=True)
class CellSummary:
    ix: int
    iy: int
    center: GlobalPoint
    hits: int
    misses: int
    state: CellState


def cell_state(hits, misses):
    """Threshold rule, elementwise on arrays or on plain ints."""
    hits = np.asarray(hits)
    misses = np.asarray(misses)
    state = np.full(hits.shape, CellState.UNKNOWN, dtype=np.uint8)
    state[(misses >= FREE_MIN_MISSES) & (hits == 0)] = CellState.FREE
    state[(hits >= OCCUPIED_MIN_HITS) & (hits > misses)] = CellState.OCCUPIED
    return state if state.ndim else CellState(int(state))


def grid_traverse(x0: float, y0: float, x1: float, y1: float) -> list[tuple[int, int]]:
    """Cells (unit grid) crossed by the segment from (x0, y0) to (x1, y1), in order.

    Amanatides-Woo stepping. The last entry is the cell containing the end point.
    """
    ix, iy = math.floor(x0), math.floor(y0)
    ex, ey = math.floor(x1), math.floor(y1)
    dx, dy = x1 - x0, y1 - y0
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    t_max_x = ((ix + (step_x > 0)) - x0) / dx if dx != 0 else math.inf
    t_max_y = ((iy + (step_y > 0)) - y0) / dy if dy != 0 else math.inf
    t_dx = abs(1.0 / dx) if dx != 0 else math.inf
    t_dy = abs(1.0 / dy) if dy != 0 else math.inf
    cells = [(ix, iy)]
    limit = abs(ex - ix) + abs(ey - iy)
    for _ in range(limit):
        if iy == ey or (ix != ex and t_max_x < t_max_y):
            ix += step_x
            t_max_x += t_dx
        else:
            iy += step_y
            t_max_y += t_dy
        cells.append((ix, iy))
    return cells


@dataclass
class OccupancyMap:
    """Hit/miss counting grid over the GX/GY plane.

    Cell ``(ix, iy)`` covers ``[origin.gx + ix*res, origin.gx + (ix+1)*res)`` and
    likewise along GY. Counts live in ``hits[iy, ix]`` and ``misses[iy, ix]``.
    """

    origin: GlobalPoint
    resolution: float
    extent: float
    hits: np.ndarray = None
    misses: np.ndarray = None
    dropped: int = 0

    def __post_init__(self):
        n = int(math.ceil(self.extent / self.resolution - 1e-9))
        if self.hits is None:
            self.hits = np.zeros((n, n), dtype=np.uint32)
        if self.misses is None:
            self.misses = np.zeros((n, n), dtype=np.uint32)
        if self.hits.shape != self.misses.shape:
            raise ValueError("hit and miss grids differ in shape")

    @classmethod
    def centered(cls, center: GlobalPoint, resolution: float, extent: float) -> OccupancyMap:
        o = GlobalPoint(center.gx - extent / 2.0, center.gy - extent / 2.0, center.gz)
        return cls(o, resolution, extent)

    @property
    def shape(self) -> tuple[int, int]:
        return self.hits.shape

    def _grid_coords(self, g: GlobalPoint) -> tuple[float, float]:
        return ((g.gx - self.origin.gx) / self.resolution, (g.gy - self.origin.gy) / self.resolution)

    def _inside(self, u: float, v: float) -> bool:
        ny, nx = self.shape
        return 0.0 <= u < nx and 0.0 <= v < ny

    @property
    def state(self) -> np.ndarray:
        return cell_state(self.hits, self.misses)

    def record(
        self, sample: ScanSample, robot_global: GlobalPoint | None = None, strict: bool = False
    ) -> OccupancyMap:
        """Miss-increment cells the ray passes through; hit-increment its end cell.

        A no-return ray only clears cells. Rays starting or ending outside the grid
        are dropped and counted in ``dropped``, or raise ``OutOfGrid`` when ``strict``.
        """
        start = body_to_global(sample.exit_body, sample.frame)
        u0, v0 = self._grid_coords(start)
        u1, v1 = self._grid_coords(sample.global_)
        if not (self._inside(u0, v0) and self._inside(u1, v1)):
            msg = f"ray to {sample.global_.as_tuple()} leaves the map"
            if strict:
                raise OutOfGrid(msg)
            self.dropped += 1
            log.debug("dropping sample: %s", msg)
            return self
        cells = grid_traverse(u0, v0, u1, v1)
        for ix, iy in cells[:-1]:
            self.misses[iy, ix] += 1
        ix, iy = cells[-1]
        if sample.is_hit:
            self.hits[iy, ix] += 1
        else:
            self.misses[iy, ix] += 1
        return self

    def record_many(self, samples, robot_global: GlobalPoint | None = None) -> OccupancyMap:
        for s in samples:
            self.record(s, robot_global)
        return self

    def cell_center(self, ix: int, iy: int) -> GlobalPoint:
        o = self.origin
        return GlobalPoint(o.gx + (ix + 0.5) * self.resolution, o.gy + (iy + 0.5) * self.resolution, o.gz)

    def query_region(self, center: GlobalPoint, radius: float) -> list[CellSummary]:
        """Observed cells whose centers lie within ``radius``, in row-major order."""
        if not radius > 0:
            raise ValueError("radius must be > 0")
        state = self.state
        out = []
        for iy, ix in zip(*np.nonzero((self.hits > 0) | (self.misses > 0))):
            c = self.cell_center(int(ix), int(iy))
            if _horizontal_distance(c, center) <= radius:
                out.append(
                    CellSummary(int(ix), int(iy), c, int(self.hits[iy, ix]), int(self.misses[iy, ix]),
                                CellState(int(state[iy, ix])))
                )
        return out

    def stats(self) -> dict:
        st = self.state
        return {
            "kind": StorageKind.MAP_PLANNING.value,
            "cells": int(st.size),
            "occupied": int(np.sum(st == CellState.OCCUPIED)),
            "free": int(np.sum(st == CellState.FREE)),
            "dropped": self.dropped,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyMap):
            return NotImplemented
        return (
            self.origin == other.origin
            and self.resolution == other.resolution
            and self.extent == other.extent
            and np.array_equal(self.hits, other.hits)
            and np.array_equal(self.misses, other.misses)
        )


def make_store(policy: StoragePolicy, f: FrameConfig | None = None):
    """Fresh store for a policy; the map is centered on the task-start position."""
    if policy.kind is StorageKind.OBSCURED:
        return ObscuredStore(policy.max_retention_range, policy.cell_size)
    center = (f or FrameConfig()).global_origin
    return OccupancyMap.centered(center, policy.grid_resolution, policy.grid_extent)


def save_map(m: OccupancyMap, path) -> None:
    path = Path(path)
    ny, nx = m.shape
    o = m.origin
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, o.gx, o.gy, o.gz, m.resolution, m.extent, nx, ny)
    sidecar = {
        "format": "lrfgroup-occupancy-map",
        "version": FORMAT_VERSION,
        "origin": [o.gx, o.gy, o.gz],
        "resolution": m.resolution,
        "extent": m.extent,
        "nx": nx,
        "ny": ny,
        "byte_order": "little",
        "count_dtype": "uint32",
    }
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(m.hits.astype("<u4").tobytes(order="C"))
            fh.write(m.misses.astype("<u4").tobytes(order="C"))
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_map(path) -> OccupancyMap:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(data) < _HEADER.size:
        raise FormatVersionMismatch(f"{path}: truncated header")
    magic, version, gx, gy, gz, res, extent, nx, ny = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatVersionMismatch(f"{path}: not an occupancy map file")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    n = nx * ny
    expected = _HEADER.size + 8 * n
    if len(data) != expected:
        raise FormatVersionMismatch(f"{path}: body is {len(data) - _HEADER.size} bytes, expected {8 * n}")
    counts = np.frombuffer(data, dtype="<u4", offset=_HEADER.size).astype(np.uint32)
    hits = counts[:n].reshape(ny, nx).copy()
    misses = counts[n:].reshape(ny, nx).copy()
    return OccupancyMap(GlobalPoint(gx, gy, gz), res, extent, hits, misses)
