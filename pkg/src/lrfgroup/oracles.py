"""Small reference setups with closed-form answers, shared by the CLI and tests."""

from __future__ import annotations

import math

import numpy as np

from lrfgroup.coordsys import BodyPoint, FrameConfig, LrfMount, RobotPose
from lrfgroup.lrf import LrfGroup, LrfUnit, group_sweep
from lrfgroup.scanmodes import associate, fuse_dual
from lrfgroup.simworld import Cylinder, Entity, EntityKind, PlacedEntity, Scene


def disk_scene(distance: float, radius: float, azimuth: float = 0.0, height: float = 2.0,
               base_z: float = -1.0, robot: RobotPose | None = None) -> Scene:
    """One cylinder whose axis is ``distance`` from the robot center along a body-frame azimuth."""
    robot = robot or RobotPose()
    p = robot.position
    x = p.x + distance * math.cos(azimuth)
    y = p.y + distance * math.sin(azimuth)
    e = Entity("disk", EntityKind.OBSTACLE, Cylinder(radius), height, ((0.0, x, y),), base_z)
    return Scene(robot.time, robot, (PlacedEntity(e, x, y),))


def disk_subtended(distance: float, radius: float) -> float:
    return 2.0 * math.asin(radius / distance)


def disk_range(distance: float, radius: float, azimuth):
    """Distance from the origin to a disk centered at (distance, 0) along ``azimuth``."""
    az = np.asarray(azimuth, dtype=float)
    return distance * np.cos(az) - np.sqrt(radius**2 - (distance * np.sin(az)) ** 2)


def fusion_trial(sigma: float = 0.05, n: int = 10_000, seed: int = 0,
                 distance: float = 3.0, radius: float = 0.5, z_gap: float = 0.3) -> dict:
    """Dual noisy sweep of a disk, fused by coordinate averaging.

    Both units sit on one vertical line and sweep ``n`` horizontal rays across
    the middle 90% of the disk's angular extent. Radial errors are measured
    against the closed-form ray/disk distance along each ray.
    """
    half = 0.45 * disk_subtended(distance, radius)
    res = 2.0 * half / (n - 1)
    f = FrameConfig()
    upper = LrfUnit("upper", LrfMount(BodyPoint(0.0, 0.0, z_gap)), angular_resolution=res, range_noise_sigma=sigma)
    lower = LrfUnit("lower", LrfMount(BodyPoint(0.0, 0.0, 0.0)), angular_resolution=res, range_noise_sigma=sigma)
    group = LrfGroup(upper, lower)
    robot = RobotPose()
    scene = disk_scene(distance, radius)
    rng = np.random.default_rng(seed)
    # a hair wider than (n-1) steps so floating error cannot drop the last ray
    su, sl = group_sweep(group, (-half, half + 0.5 * res), robot, f, scene, rng)
    fused = fuse_dual(su, sl)[: len(su)]
    az = np.array([math.remainder(s.reading.phi, 2.0 * math.pi) for s in su])
    truth = disk_range(distance, radius, az)
    single = np.array([math.hypot(s.body.x, s.body.y) for s in su]) - truth
    fz = np.array([math.hypot(p.x, p.y) for p in fused]) - truth
    rms_single = float(np.sqrt(np.mean(single**2)))
    rms_fused = float(np.sqrt(np.mean(fz**2)))
    return {
        "sigma": sigma,
        "n": len(su),
        "pairs": len(associate(su, sl)),
        "seed": seed,
        "rms_single": rms_single,
        "rms_fused": rms_fused,
        "ratio": rms_fused / rms_single,
        "theory": 1.0 / math.sqrt(2.0),
    }
