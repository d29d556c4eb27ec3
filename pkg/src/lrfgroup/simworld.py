"""Scripted 2.5-D world: vertical prisms moving along piecewise-linear tracks.

Entities stand on the ground plane ``z = base_z`` and extend ``height`` meters
up. Ray casting is analytic: each entity yields a parametric entry/exit
interval from its footprint (quadratic for cylinders, slabs for boxes) which
is intersected with the vertical slab of its height.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Sequence

import numpy as np

from lrfgroup.coordsys import (
    BodyPoint,
    FrameConfig,
    LrfMount,
    RobotPose,
    exit_point,
    normalize_angle,
)
from lrfgroup.errors import OutOfTimeRange
from lrfgroup.intervals import ScanInterval, make_interval

if TYPE_CHECKING:
    from lrfgroup.scenario import Scenario


class EntityKind(str, enum.Enum):
    TARGET = "target"
    IRRELEVANT_HUMAN = "irrelevant_human"
    OBSTACLE = "obstacle"


@dataclass(frozen=True, slots=True)
class Cylinder:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"cylinder radius must be > 0, got {self.radius}")


@dataclass(frozen=True, slots=True)
class Box:
    """Axis-aligned (in the following frame) box footprint."""

    half_x: float
    half_y: float

    def __post_init__(self):
        if not (self.half_x > 0 and self.half_y > 0):
            raise ValueError(f"box half-extents must be > 0, got {(self.half_x, self.half_y)}")


Shape = Cylinder | Box


def _interp_track(times: np.ndarray, values: np.ndarray, t: float) -> np.ndarray:
    if len(times) == 1:
        return values[0]
    return np.array([np.interp(t, times, values[:, k]) for k in range(values.shape[1])])


@dataclass(frozen=True)
class Entity:
    id: str
    kind: EntityKind
    shape: Shape
    height: float
    motion: tuple[tuple[float, float, float], ...]  # (t, x, y) waypoints
    base_z: float = 0.0

    def __post_init__(self):
        if not self.height > 0:
            raise ValueError(f"entity {self.id!r}: height must be > 0")
        if not self.motion:
            raise ValueError(f"entity {self.id!r}: motion needs at least one waypoint")
        ts = [w[0] for w in self.motion]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"entity {self.id!r}: waypoint times must be strictly increasing")

    def position_at(self, t: float) -> tuple[float, float]:
        """Footprint center at time ``t``; held constant outside the scripted span."""
        arr = np.asarray(self.motion, dtype=float)
        x, y = _interp_track(arr[:, 0], arr[:, 1:], t)
        return float(x), float(y)


@dataclass(frozen=True, slots=True)
class PlacedEntity:
    entity: Entity
    x: float
    y: float

    @property
    def id(self) -> str:
        return self.entity.id


@dataclass(frozen=True)
class Scene:
    time: float
    robot: RobotPose
    entities: tuple[PlacedEntity, ...] = ()

    def get(self, entity_id: str) -> PlacedEntity:
        for pe in self.entities:
            if pe.id == entity_id:
                return pe
        raise KeyError(entity_id)

    @property
    def ids(self) -> list[str]:
        return [pe.id for pe in self.entities]

    @cached_property
    def geometry(self) -> _Geometry:
        return _geometry(self.entities)


def robot_pose_at(track: Sequence[Sequence[float]], t: float) -> RobotPose:
    arr = np.asarray(track, dtype=float)
    x, y, z = _interp_track(arr[:, 0], arr[:, 1:4], t)
    return RobotPose(BodyPoint(float(x), float(y), float(z)), t)


def scene_at(scenario: Scenario, t: float) -> Scene:
    """Resolve every scripted track at time ``t`` by linear interpolation."""
    if not (0.0 <= t <= scenario.duration + 1e-12):
        raise OutOfTimeRange(f"t={t} outside [0, {scenario.duration}]")
    placed = tuple(PlacedEntity(e, *e.position_at(t)) for e in scenario.entities)
    return Scene(t, robot_pose_at(scenario.robot_track, t), placed)


def _slab(o, d: np.ndarray, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """Parametric [t_in, t_out] of a line within ``lo <= o + t d <= hi``; empty as (inf, -inf).

    All arguments broadcast against each other.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    t_in = np.minimum(t1, t2)
    t_out = np.maximum(t1, t2)
    parallel = d == 0.0
    if np.any(parallel):
        inside = (o >= lo) & (o <= hi)
        t_in = np.where(parallel, np.where(inside, -np.inf, np.inf), t_in)
        t_out = np.where(parallel, np.where(inside, np.inf, -np.inf), t_out)
    return t_in, t_out


def _circle(ox, oy, dx: np.ndarray, dy: np.ndarray, radius) -> tuple[np.ndarray, np.ndarray]:
    """Parametric interval of a line inside an infinite vertical cylinder; broadcasts."""
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - 4.0 * a * c
    ok = (disc >= 0.0) & (a > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    # stable roots: q and c/q instead of the textbook pair
    q = -0.5 * (b + np.where(b >= 0.0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / a
        r2 = np.where(q != 0.0, c / np.where(q != 0.0, q, 1.0), r1)
    t_in = np.where(ok, np.minimum(r1, r2), np.inf)
    t_out = np.where(ok, np.maximum(r1, r2), -np.inf)
    # vertical rays: inside for all t when the origin is over the footprint
    over = (a == 0.0) & (c <= 0.0)
    if np.any(over):
        t_in = np.where(over, -np.inf, t_in)
        t_out = np.where(over, np.inf, t_out)
    return t_in, t_out


@dataclass(frozen=True)
class _Geometry:
    """Entity parameters as arrays, split by shape kind."""

    cyl: np.ndarray  # indices into scene.entities
    cyl_xy: np.ndarray
    cyl_r: np.ndarray
    cyl_z: np.ndarray  # (base, top)
    box: np.ndarray
    box_xy: np.ndarray
    box_half: np.ndarray
    box_z: np.ndarray


def _geometry(entities: Sequence[PlacedEntity]) -> _Geometry:
    cyl = [k for k, pe in enumerate(entities) if isinstance(pe.entity.shape, Cylinder)]
    box = [k for k, pe in enumerate(entities) if not isinstance(pe.entity.shape, Cylinder)]

    def xy(ks):
        return np.array([(entities[k].x, entities[k].y) for k in ks], dtype=float).reshape(-1, 2)

    def zr(ks):
        return np.array(
            [(entities[k].entity.base_z, entities[k].entity.base_z + entities[k].entity.height) for k in ks],
            dtype=float,
        ).reshape(-1, 2)

    return _Geometry(
        np.array(cyl, dtype=int),
        xy(cyl),
        np.array([entities[k].entity.shape.radius for k in cyl], dtype=float),
        zr(cyl),
        np.array(box, dtype=int),
        xy(box),
        np.array([(entities[k].entity.shape.half_x, entities[k].entity.shape.half_y) for k in box],
                 dtype=float).reshape(-1, 2),
        zr(box),
    )


def _entry(a_in, a_out, oz, dz, zr) -> np.ndarray:
    z_in, z_out = _slab(oz, dz, zr[:, 0], zr[:, 1])
    t_in = np.maximum(np.maximum(a_in, z_in), 0.0)
    t_out = np.minimum(a_out, z_out)
    return np.where(t_in <= t_out, t_in, np.inf)


def hit_table(origin, dirs: np.ndarray, entities: Sequence[PlacedEntity], geom: _Geometry | None = None) -> np.ndarray:
    """Entry distance of every ray into every entity, shape (rays, entities); ``inf`` on a miss."""
    g = geom or _geometry(entities)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    origin = np.asarray(origin, dtype=float)
    # one shared origin, or one per ray
    o = origin.reshape(1, 3) if origin.ndim == 1 else origin
    ox0, oy0, oz = o[:, 0:1], o[:, 1:2], o[:, 2:3]
    dx, dy, dz = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
    out = np.full((len(dirs), len(entities)), np.inf)
    if len(g.cyl):
        ox = ox0 - g.cyl_xy[:, 0]
        oy = oy0 - g.cyl_xy[:, 1]
        a_in, a_out = _circle(ox, oy, dx, dy, g.cyl_r)
        out[:, g.cyl] = _entry(a_in, a_out, oz, dz, g.cyl_z)
    if len(g.box):
        ox = ox0 - g.box_xy[:, 0]
        oy = oy0 - g.box_xy[:, 1]
        hx, hy = g.box_half[:, 0], g.box_half[:, 1]
        x_in, x_out = _slab(ox, dx, -hx, hx)
        y_in, y_out = _slab(oy, dy, -hy, hy)
        out[:, g.box] = _entry(np.maximum(x_in, y_in), np.minimum(x_out, y_out), oz, dz, g.box_z)
    return out


def entity_hit_distances(origin, dirs: np.ndarray, pe: PlacedEntity) -> np.ndarray:
    """Entry distance of each ray into one entity volume; ``inf`` where it misses."""
    return hit_table(origin, dirs, (pe,))[:, 0]


def cast_rays(origin, dirs, scene: Scene) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hit for a bundle of rays.

    ``origin`` is one point shared by all rays or an array with one row per ray.
    Returns the distance array (``inf`` for misses) and the index into
    ``scene.entities`` (``-1`` for misses). Directions must be unit vectors.
    Ties go to the entity listed first.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    if not scene.entities:
        return np.full(len(dirs), np.inf), np.full(len(dirs), -1, dtype=int)
    table = hit_table(origin, dirs, scene.entities, scene.geometry)
    idx = np.argmin(table, axis=1)
    best = table[np.arange(len(dirs)), idx]
    return best, np.where(np.isfinite(best), idx, -1)


def ray_cast(origin: BodyPoint, direction, scene: Scene) -> tuple[float, str] | None:
    """Distance and entity id of the nearest hit, or ``None`` when the ray hits nothing."""
    d = np.asarray(direction, dtype=float)
    n = float(np.linalg.norm(d))
    if not math.isclose(n, 1.0, rel_tol=1e-9):
        raise ValueError(f"direction must be a unit vector, norm={n}")
    dist, idx = cast_rays(origin.as_tuple(), d[None, :], scene)
    if idx[0] < 0:
        return None
    return float(dist[0]), scene.entities[idx[0]].id


def azimuth_directions(azimuths: np.ndarray, zenith: float, theta_g: float) -> np.ndarray:
    """Unit ray directions in following-frame axes for R0-referenced azimuths."""
    body_az = np.asarray(azimuths, dtype=float) + theta_g
    st = math.sin(zenith)
    return np.column_stack(
        [st * np.cos(body_az), st * np.sin(body_az), np.full(body_az.shape, math.cos(zenith))]
    )


def face_interval(f: FrameConfig) -> tuple[float, float]:
    """Start azimuth (R0-referenced) and width of the forward 180 degree sector.

    The sector runs counterclockwise from the robot's right (+X) through
    forward (+Y) to its left.
    """
    return normalize_angle(-f.theta_g), math.pi


@dataclass(frozen=True)
class OracleInterval:
    entity_id: str
    interval: ScanInterval


def brute_force_intervals(
    scene: Scene,
    mount: LrfMount,
    f: FrameConfig,
    resolution: float,
    az_interval: tuple[float, float] | None = None,
    zenith: float = math.pi / 2.0,
    max_range: float = math.inf,
) -> list[OracleInterval]:
    """Dense noiseless sweep clustered by ground-truth entity id.

    ``az_interval`` is ``(start, width)``; defaults to the forward sector. Each
    maximal run of consecutive rays hitting the same entity becomes one interval.
    """
    start, width = az_interval if az_interval is not None else face_interval(f)
    n = int(math.floor(width / resolution + 1e-9)) + 1
    az = start + resolution * np.arange(n)
    e = exit_point(scene.robot, mount)
    dist, idx = cast_rays(e.as_tuple(), azimuth_directions(az, zenith, f.theta_g), scene)
    idx = np.where(dist <= max_range, idx, -1)
    out: list[OracleInterval] = []
    k = 0
    while k < n:
        if idx[k] < 0:
            k += 1
            continue
        j = k
        while j + 1 < n and idx[j + 1] == idx[k]:
            j += 1
        out.append(
            OracleInterval(scene.entities[idx[k]].id, make_interval(az[k], az[j], f.theta_g))
        )
        k = j + 1
    return out


def subtended_interval(pe: PlacedEntity, origin_xy: tuple[float, float], f: FrameConfig):
    """Exact angular extent ``(start, width)`` of an entity footprint from a point.

    Angles are R0-referenced. Returns ``None`` when the point lies inside the footprint.
    """
    cx = pe.x - origin_xy[0]
    cy = pe.y - origin_xy[1]
    d = math.hypot(cx, cy)
    center = math.atan2(cy, cx)
    shape = pe.entity.shape
    if isinstance(shape, Cylinder):
        if d <= shape.radius:
            return None
        half = math.asin(shape.radius / d)
        lo, hi = -half, half
    else:
        if abs(cx) <= shape.half_x and abs(cy) <= shape.half_y:
            return None
        offs = []
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                a = math.atan2(cy + sy * shape.half_y, cx + sx * shape.half_x) - center
                offs.append(math.remainder(a, 2.0 * math.pi))
        lo, hi = min(offs), max(offs)
    return normalize_angle(center + lo - f.theta_g), hi - lo
