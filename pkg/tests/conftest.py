import math

import numpy as np
import pytest

from lrfgroup.coordsys import BodyPoint, FrameConfig, GlobalPoint, LrfMount, RobotPose
from lrfgroup.simworld import Box, Cylinder, Entity, EntityKind, PlacedEntity, Scene


def rot2(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def random_frame(rng) -> FrameConfig:
    return FrameConfig(
        rng.uniform(-4 * math.pi, 4 * math.pi),
        GlobalPoint(*rng.uniform(-1e3, 1e3, 2), rng.uniform(-50, 50)),
    )


def random_body(rng, scale=50.0) -> BodyPoint:
    return BodyPoint(*rng.uniform(-scale, scale, 3))


def random_pose(rng) -> tuple[RobotPose, LrfMount]:
    return RobotPose(random_body(rng, 20.0)), LrfMount(BodyPoint(*rng.uniform(-0.5, 0.5, 3)))


def inside(p, pe: PlacedEntity) -> bool:
    """Point-membership test for an entity volume (independent of the ray caster)."""
    e = pe.entity
    if not (e.base_z <= p[2] <= e.base_z + e.height):
        return False
    dx, dy = p[0] - pe.x, p[1] - pe.y
    if isinstance(e.shape, Cylinder):
        return dx * dx + dy * dy <= e.shape.radius ** 2
    return abs(dx) <= e.shape.half_x and abs(dy) <= e.shape.half_y


def march_distance(origin, direction, scene: Scene, max_range=20.0, step=2e-3):
    """Nearest entry along a ray by dense marching plus bisection; ``None`` on a miss."""
    o = np.asarray(origin, float)
    d = np.asarray(direction, float)
    ts = np.arange(0.0, max_range + step, step)
    best = None
    for pe in scene.entities:
        pts = o[None, :] + ts[:, None] * d[None, :]
        e = pe.entity
        zin = (pts[:, 2] >= e.base_z) & (pts[:, 2] <= e.base_z + e.height)
        dx, dy = pts[:, 0] - pe.x, pts[:, 1] - pe.y
        if isinstance(e.shape, Cylinder):
            xy = dx * dx + dy * dy <= e.shape.radius ** 2
        else:
            xy = (np.abs(dx) <= e.shape.half_x) & (np.abs(dy) <= e.shape.half_y)
        hits = np.nonzero(zin & xy)[0]
        if len(hits) == 0:
            continue
        k = hits[0]
        if k == 0:
            t = 0.0
        else:
            lo, hi = ts[k - 1], ts[k]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if inside(o + mid * d, pe):
                    hi = mid
                else:
                    lo = mid
            t = hi
        if best is None or t < best[0]:
            best = (t, pe.id)
    return best


def make_scene(entities, robot=None, t=0.0) -> Scene:
    robot = robot or RobotPose(time=t)
    placed = tuple(PlacedEntity(e, *e.position_at(t)) for e in entities)
    return Scene(t, robot, placed)


def cylinder(eid, x, y, radius, height=2.0, base_z=-1.0, kind=EntityKind.OBSTACLE):
    return Entity(eid, kind, Cylinder(radius), height, ((0.0, x, y),), base_z)


def box(eid, x, y, hx, hy, height=2.0, base_z=-1.0, kind=EntityKind.OBSTACLE):
    return Entity(eid, kind, Box(hx, hy), height, ((0.0, x, y),), base_z)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
