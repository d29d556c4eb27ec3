"""Boundary-angle intervals of a detected object."""

from __future__ import annotations

import math
from dataclasses import dataclass

from lrfgroup.coordsys import normalize_angle


@dataclass(frozen=True, slots=True)
class ScanInterval:
    """Angular extent of one object as seen from an LRF.

    ``psi_a`` and ``psi_b`` are the first and second boundary angles, measured
    counterclockwise from R0. The interval runs counterclockwise from ``psi_a``
    to ``psi_b``. ``deflection`` is the counterclockwise angle from the +Y
    start line of the following frame to the first boundary line.
    """

    psi_a: float
    psi_b: float
    deflection: float

    @property
    def range(self) -> float:
        return scan_angle_range(self)

    def widened(self, guard: float) -> tuple[float, float]:
        """Start azimuth and width of the interval grown by ``guard`` on both sides."""
        return normalize_angle(self.psi_a - guard), min(self.range + 2.0 * guard, 2.0 * math.pi)

    def contains(self, angle: float, tol: float = 0.0) -> bool:
        off = normalize_angle(angle - self.psi_a + tol)
        return off <= self.range + 2.0 * tol


def scan_angle_range(i: ScanInterval) -> float:
    """Counterclockwise sweep from the first to the second boundary, in ``[0, 2*pi)``."""
    return normalize_angle(i.psi_b - i.psi_a)


def make_interval(psi_a: float, psi_b: float, theta_g: float) -> ScanInterval:
    """Build an interval from R0-referenced boundary angles.

    The deflection is taken from the following frame's +Y axis, which lies at
    R0 azimuth ``pi/2 - theta_g``.
    """
    psi_a = normalize_angle(psi_a)
    psi_b = normalize_angle(psi_b)
    deflection = normalize_angle(psi_a + theta_g - math.pi / 2.0)
    return ScanInterval(psi_a, psi_b, deflection)


def interval_within(inner: tuple[float, float], outer: tuple[float, float], tol: float = 1e-12) -> bool:
    """True when the ccw arc ``inner`` (start, width) lies inside the ccw arc ``outer``."""
    start = normalize_angle(inner[0] - outer[0] + tol) - tol
    return start >= -tol and start + inner[1] <= outer[1] + tol
