"""Combined coordinate system: global positioning frame, following frame, detection sphere.

Three frames are involved:

* ``GlobalPoint`` (GX, GY, GZ): fixed positioning frame. GX points north, GY east,
  both treated as local meters.
* ``BodyPoint`` (X, Y, Z): the following frame, fixed at the robot's geometric
  center when the task starts. Y is the initial forward direction, X the right.
* ``SphericalPoint`` (r, phi, theta): the detection sphere centered at an LRF
  exit point. ``phi`` is measured counterclockwise from the polar axis R0, which
  stays parallel to GX for the whole task, ``theta`` is the zenith angle from +Z.

The following frame is the hub: global and spherical points are only ever
converted through it.

``theta_g`` is the counterclockwise plane angle between GX and X. A body vector
``(x, y)`` becomes the global vector obtained by rotating it through ``-theta_g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from lrfgroup.errors import ZeroRange

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap an angle into ``[0, 2*pi)``."""
    w = math.fmod(a, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if w >= TWO_PI:
        w = 0.0
    return w


def _not_finite(name: str, *values: float) -> None:
    raise ValueError(f"{name} components must be finite, got {values}")


@dataclass(frozen=True, slots=True)
class GlobalPoint:
    gx: float
    gy: float
    gz: float

    def __post_init__(self):
        if not (math.isfinite(self.gx) and math.isfinite(self.gy) and math.isfinite(self.gz)):
            _not_finite("GlobalPoint", self.gx, self.gy, self.gz)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.gx, self.gy, self.gz)


@dataclass(frozen=True, slots=True)
class BodyPoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            _not_finite("BodyPoint", self.x, self.y, self.z)

    def __add__(self, other: BodyPoint) -> BodyPoint:
        return BodyPoint(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: BodyPoint) -> BodyPoint:
        return BodyPoint(self.x - other.x, self.y - other.y, self.z - other.z)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


ORIGIN = BodyPoint(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class SphericalPoint:
    """Reading in the detection sphere. ``phi`` is wrapped into ``[0, 2*pi)`` on construction."""

    r: float
    phi: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.phi) and math.isfinite(self.theta)):
            _not_finite("SphericalPoint", self.r, self.phi, self.theta)
        if self.r < 0.0:
            raise ValueError(f"radial distance must be >= 0, got {self.r}")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"zenith angle must lie in [0, pi], got {self.theta}")
        object.__setattr__(self, "phi", normalize_angle(self.phi))


@dataclass(frozen=True, slots=True)
class FrameConfig:
    """Static relation between the positioning and following frames, frozen at task start."""

    theta_g: float = 0.0
    global_origin: GlobalPoint = field(default_factory=lambda: GlobalPoint(0.0, 0.0, 0.0))

    def __post_init__(self):
        if not math.isfinite(self.theta_g):
            raise ValueError(f"FrameConfig theta_g must be finite, got {self.theta_g}")
        object.__setattr__(self, "theta_g", normalize_angle(self.theta_g))


@dataclass(frozen=True, slots=True)
class LrfMount:
    """Light-exit point of an LRF relative to the robot's geometric center."""

    offset: BodyPoint = ORIGIN


@dataclass(frozen=True, slots=True)
class RobotPose:
    position: BodyPoint = ORIGIN
    time: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.time):
            raise ValueError(f"RobotPose time must be finite, got {self.time}")


def exit_point(robot: RobotPose, mount: LrfMount) -> BodyPoint:
    """LRF light-exit point in the following frame."""
    return robot.position + mount.offset


def _exit_xyz(robot: RobotPose, mount: LrfMount) -> tuple[float, float, float]:
    p, o = robot.position, mount.offset
    return p.x + o.x, p.y + o.y, p.z + o.z


def body_to_global(p: BodyPoint, f: FrameConfig) -> GlobalPoint:
    # rho*cos(alpha - theta_g) with alpha = atan2(y, x), expanded so that every
    # quadrant is handled and theta_g = 0 is an exact pass-through
    c = math.cos(f.theta_g)
    s = math.sin(f.theta_g)
    o = f.global_origin
    return GlobalPoint(p.x * c + p.y * s + o.gx, p.y * c - p.x * s + o.gy, p.z + o.gz)


def global_to_body(g: GlobalPoint, f: FrameConfig) -> BodyPoint:
    c = math.cos(f.theta_g)
    s = math.sin(f.theta_g)
    o = f.global_origin
    dx = g.gx - o.gx
    dy = g.gy - o.gy
    return BodyPoint(dx * c - dy * s, dy * c + dx * s, g.gz - o.gz)


def lrf_frame_to_body(p_lrf: BodyPoint, mount: LrfMount) -> BodyPoint:
    """Shift a point expressed relative to the LRF exit into robot-center coordinates."""
    return p_lrf + mount.offset


def body_to_lrf_frame(p: BodyPoint, mount: LrfMount) -> BodyPoint:
    return p - mount.offset


def body_to_spherical(
    pa: BodyPoint, robot: RobotPose, mount: LrfMount, f: FrameConfig
) -> SphericalPoint:
    """Express a following-frame point in the detection sphere of one LRF.

    Raises ``ZeroRange`` when ``pa`` is the LRF exit point itself.
    """
    ex, ey, ez = _exit_xyz(robot, mount)
    dx = pa.x - ex
    dy = pa.y - ey
    dz = pa.z - ez
    r = math.sqrt(dx * dx + dy * dy + dz * dz)
    if r == 0.0:
        raise ZeroRange(f"point {pa} coincides with the LRF exit point")
    rho = math.hypot(dx, dy)
    theta = math.atan2(rho, dz)
    # on the Z axis the azimuth is arbitrary; pin it to 0
    phi = 0.0 if rho == 0.0 else math.atan2(dy, dx) - f.theta_g
    return SphericalPoint(r, phi, theta)


def spherical_offset(ps: SphericalPoint, f: FrameConfig) -> tuple[float, float, float]:
    """Cartesian displacement of a spherical reading, rotated into following-frame axes."""
    st = math.sin(ps.theta)
    rx = ps.r * st * math.cos(ps.phi)
    ry = ps.r * st * math.sin(ps.phi)
    rz = ps.r * math.cos(ps.theta)
    c = math.cos(f.theta_g)
    s = math.sin(f.theta_g)
    return (rx * c - ry * s, ry * c + rx * s, rz)


def spherical_to_body(
    ps: SphericalPoint, robot: RobotPose, mount: LrfMount, f: FrameConfig
) -> BodyPoint:
    dx, dy, dz = spherical_offset(ps, f)
    ex, ey, ez = _exit_xyz(robot, mount)
    return BodyPoint(dx + ex, dy + ey, dz + ez)


def global_to_spherical(
    g: GlobalPoint, robot: RobotPose, mount: LrfMount, f: FrameConfig
) -> SphericalPoint:
    return body_to_spherical(global_to_body(g, f), robot, mount, f)


def spherical_to_global(
    ps: SphericalPoint, robot: RobotPose, mount: LrfMount, f: FrameConfig
) -> GlobalPoint:
    return body_to_global(spherical_to_body(ps, robot, mount, f), f)
