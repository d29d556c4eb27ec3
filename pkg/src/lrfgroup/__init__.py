"""Dual laser range finder sensing toolkit for front-following robots."""

from lrfgroup.coordsys import (
    BodyPoint,
    FrameConfig,
    GlobalPoint,
    LrfMount,
    RobotPose,
    SphericalPoint,
    body_to_global,
    body_to_spherical,
    global_to_body,
    global_to_spherical,
    spherical_to_body,
    spherical_to_global,
)
from lrfgroup.errors import LrfError

__version__ = "0.1.0"

__all__ = [
    "BodyPoint",
    "FrameConfig",
    "GlobalPoint",
    "LrfError",
    "LrfMount",
    "RobotPose",
    "SphericalPoint",
    "body_to_global",
    "body_to_spherical",
    "global_to_body",
    "global_to_spherical",
    "spherical_to_body",
    "spherical_to_global",
]
