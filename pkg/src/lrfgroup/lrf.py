"""Steerable laser range finders and the two-unit LRF group."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from lrfgroup.coordsys import (
    BodyPoint,
    FrameConfig,
    GlobalPoint,
    LrfMount,
    RobotPose,
    SphericalPoint,
    body_to_global,
    exit_point,
    normalize_angle,
    spherical_to_body,
)
from lrfgroup.errors import EmptyInterval, OutOfGimbalRange
from lrfgroup.simworld import Scene, azimuth_directions, cast_rays

DEFAULT_RESOLUTION = math.radians(0.25)


class ScanMode(str, enum.Enum):
    NORMAL = "normal"
    LOCKING = "locking"


@dataclass(frozen=True, slots=True)
class LrfUnit:
    """One range finder with a zenith (rotate1) and an azimuth (rotate2) axis."""

    id: str
    mount: LrfMount = field(default_factory=LrfMount)
    rotate1: float = math.pi / 2.0
    rotate2: float = 0.0
    max_range: float = 10.0
    angular_resolution: float = DEFAULT_RESOLUTION
    range_noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.max_range > 0:
            raise ValueError(f"{self.id}: max_range must be > 0")
        if not self.angular_resolution > 0:
            raise ValueError(f"{self.id}: angular_resolution must be > 0")
        if self.range_noise_sigma < 0:
            raise ValueError(f"{self.id}: range_noise_sigma must be >= 0")
        if not 0.0 <= self.rotate1 <= math.pi:
            raise OutOfGimbalRange(f"{self.id}: rotate1={self.rotate1} outside [0, pi]")
        object.__setattr__(self, "rotate2", normalize_angle(self.rotate2))


@dataclass(frozen=True, slots=True)
class LrfGroup:
    """Two units stacked on one vertical line; they never interfere with each other."""

    upper: LrfUnit
    lower: LrfUnit

    def __post_init__(self):
        a, b = self.upper.mount.offset, self.lower.mount.offset
        if a.x != b.x or a.y != b.y:
            raise ValueError("LRF group mounts must share x and y offsets")
        if self.upper.id == self.lower.id:
            raise ValueError("LRF group units need distinct ids")

    def unit(self, lrf_id: str) -> LrfUnit:
        for u in (self.upper, self.lower):
            if u.id == lrf_id:
                return u
        raise KeyError(lrf_id)


@dataclass(frozen=True, eq=True)
class ScanSample:
    """One ray measurement.

    ``body`` and ``global_`` are always derived from ``reading`` and the pose
    context; they cannot be set independently. ``hit`` is ``None`` for no return,
    in which case ``reading.r`` equals the unit's max range.
    """

    time: float
    lrf_id: str
    reading: SphericalPoint
    hit: str | None
    mode_tag: ScanMode
    robot: RobotPose
    mount: LrfMount
    frame: FrameConfig

    @property
    def is_hit(self) -> bool:
        return self.hit is not None

    @cached_property
    def body(self) -> BodyPoint:
        return spherical_to_body(self.reading, self.robot, self.mount, self.frame)

    @cached_property
    def global_(self) -> GlobalPoint:
        return body_to_global(self.body, self.frame)

    @property
    def exit_body(self) -> BodyPoint:
        return exit_point(self.robot, self.mount)


def steer(u: LrfUnit, zenith: float, azimuth: float) -> LrfUnit:
    if not 0.0 <= zenith <= math.pi:
        raise OutOfGimbalRange(f"zenith {zenith} outside [0, pi]")
    return replace(u, rotate1=zenith, rotate2=azimuth)


def _read(
    u: LrfUnit,
    azimuths: np.ndarray,
    zenith: float,
    robot: RobotPose,
    f: FrameConfig,
    scene: Scene,
    rng: np.random.Generator,
    mode: ScanMode,
) -> list[ScanSample]:
    e = exit_point(robot, u.mount)
    dist, idx = cast_rays(e.as_tuple(), azimuth_directions(azimuths, zenith, f.theta_g), scene)
    hit = dist <= u.max_range
    r = np.where(hit, dist, u.max_range)
    if u.range_noise_sigma > 0:
        # one draw per ray regardless of outcome keeps the stream aligned across scenes
        noise = rng.normal(0.0, u.range_noise_sigma, len(azimuths))
        r = np.where(hit, np.clip(r + noise, 0.0, u.max_range), r)
    ids = scene.ids
    return [
        ScanSample(
            robot.time,
            u.id,
            SphericalPoint(float(r[k]), float(azimuths[k]), zenith),
            ids[idx[k]] if hit[k] else None,
            mode,
            robot,
            u.mount,
            f,
        )
        for k in range(len(azimuths))
    ]


def measure(
    u: LrfUnit,
    robot: RobotPose,
    f: FrameConfig,
    scene: Scene,
    rng: np.random.Generator,
    mode: ScanMode = ScanMode.NORMAL,
) -> ScanSample:
    """Fire one ray along the unit's current steering angles."""
    return _read(u, np.array([u.rotate2]), u.rotate1, robot, f, scene, rng, mode)[0]


def sweep_azimuths(start: float, end: float, resolution: float) -> np.ndarray:
    width = end - start
    if not width > 0:
        raise EmptyInterval(f"sweep interval [{start}, {end}] is empty")
    if width > 2.0 * math.pi + 1e-9:
        raise ValueError(f"sweep width {width} exceeds a full turn")
    n = int(math.floor(width / resolution + 1e-9)) + 1
    return start + resolution * np.arange(n)


def sweep(
    u: LrfUnit,
    zenith: float,
    az_interval: tuple[float, float],
    robot: RobotPose,
    f: FrameConfig,
    scene: Scene,
    rng: np.random.Generator,
    mode: ScanMode = ScanMode.NORMAL,
    reverse: bool = False,
) -> list[ScanSample]:
    """Sample every resolution step across ``az_interval = (start, end)``, ``end > start``.

    Azimuths are R0-referenced and may run past ``2*pi``; the stored readings are
    wrapped. With ``reverse`` the same azimuth grid is visited from the end.
    """
    if not 0.0 <= zenith <= math.pi:
        raise OutOfGimbalRange(f"zenith {zenith} outside [0, pi]")
    az = sweep_azimuths(az_interval[0], az_interval[1], u.angular_resolution)
    if reverse:
        az = az[::-1]
    return _read(u, az, zenith, robot, f, scene, rng, mode)


def group_sweep(
    g: LrfGroup,
    az_interval: tuple[float, float],
    robot: RobotPose,
    f: FrameConfig,
    scene: Scene,
    rng: np.random.Generator,
    mode: ScanMode = ScanMode.NORMAL,
) -> tuple[list[ScanSample], list[ScanSample]]:
    """Both units sweep the same interval, each at its own zenith."""
    upper = sweep(g.upper, g.upper.rotate1, az_interval, robot, f, scene, rng, mode)
    lower = sweep(g.lower, g.lower.rotate1, az_interval, robot, f, scene, rng, mode)
    return upper, lower
