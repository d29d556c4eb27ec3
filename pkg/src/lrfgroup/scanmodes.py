"""Normal and locking scan modes of an LRF group.

Normal mode: both units sweep the forward 180 degree sector and their hits are
fused pairwise by averaging coordinates. Locking mode: one unit sweeps back and
forth over the target's boundary-angle interval plus a guard band while the
other unit covers the rest of the sector.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from lrfgroup.coordsys import BodyPoint, FrameConfig, RobotPose, body_to_global, normalize_angle
from lrfgroup.errors import TargetLost
from lrfgroup.intervals import ScanInterval, make_interval, scan_angle_range
from lrfgroup.lrf import LrfGroup, ScanMode, ScanSample, sweep
from lrfgroup.simworld import Scene, face_interval

__all__ = [
    "Cluster",
    "LockState",
    "LockingPass",
    "NormalPass",
    "ScanInterval",
    "ScanMode",
    "TrackRecord",
    "TransitionState",
    "associate",
    "extract_intervals",
    "fuse_dual",
    "locking_step",
    "mode_transition",
    "normal_step",
    "scan_angle_range",
    "seed_lock",
]

FUSION_GATE = 0.2
TARGET_GATE = 0.5
DEFAULT_GUARD = math.radians(5.0)
DEFAULT_MISS_LIMIT = 3
GAP_TOLERANCE = 1
RANGE_JUMP = 0.5


@dataclass(frozen=True)
class Cluster:
    """Contiguous run of hits from one sweep."""

    samples: tuple[ScanSample, ...]
    interval: ScanInterval
    entity_id: str | None

    @cached_property
    def centroid(self) -> BodyPoint:
        pts = np.array([s.body.as_tuple() for s in self.samples])
        return BodyPoint(*map(float, pts.mean(axis=0)))


def _close(run: list[ScanSample], theta_g: float) -> Cluster:
    label = Counter(s.hit for s in run).most_common(1)[0][0]
    return Cluster(tuple(run), make_interval(run[0].reading.phi, run[-1].reading.phi, theta_g), label)


def extract_intervals(
    samples: Sequence[ScanSample],
    gap_tolerance: int = GAP_TOLERANCE,
    range_jump: float = RANGE_JUMP,
) -> list[Cluster]:
    """Split one sweep, ordered by increasing azimuth, into hit clusters.

    Up to ``gap_tolerance`` consecutive no-return samples are bridged. A range
    step larger than ``range_jump`` between neighbouring hits starts a new
    cluster. Each cluster's first and last hit give its boundary angles.
    """
    if not samples:
        return []
    theta_g = samples[0].frame.theta_g
    clusters: list[Cluster] = []
    run: list[ScanSample] = []
    gap = 0
    for s in samples:
        if not s.is_hit:
            if run:
                gap += 1
                if gap > gap_tolerance:
                    clusters.append(_close(run, theta_g))
                    run = []
            continue
        if run and abs(s.reading.r - run[-1].reading.r) > range_jump:
            clusters.append(_close(run, theta_g))
            run = []
        run.append(s)
        gap = 0
    if run:
        clusters.append(_close(run, theta_g))
    return clusters


def _nearest(sorted_vals: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Index into ``sorted_vals`` of the closest value to each query."""
    k = np.clip(np.searchsorted(sorted_vals, queries), 1, len(sorted_vals) - 1)
    left = sorted_vals[k - 1]
    right = sorted_vals[k]
    return np.where(queries - left <= right - queries, k - 1, k)


def associate(
    samples_upper: Sequence[ScanSample],
    samples_lower: Sequence[ScanSample],
    gate: float = FUSION_GATE,
) -> list[tuple[int, int]]:
    """Index pairs of hits that look at the same spot.

    The units share one vertical line, so equal azimuth means equal bearing.
    Hits are paired when each is the other's nearest in azimuth and their
    horizontal separation is at most ``gate``.
    """
    up = [k for k, s in enumerate(samples_upper) if s.is_hit]
    lo = [k for k, s in enumerate(samples_lower) if s.is_hit]
    if not up or not lo:
        return []
    ref = samples_upper[up[0]].reading.phi
    au = np.array([normalize_angle(samples_upper[k].reading.phi - ref) for k in up])
    al = np.array([normalize_angle(samples_lower[k].reading.phi - ref) for k in lo])
    ou, ol = np.argsort(au, kind="stable"), np.argsort(al, kind="stable")
    su, sl = au[ou], al[ol]
    if len(sl) == 1:
        u2l = np.zeros(len(su), dtype=int)
    else:
        u2l = _nearest(sl, su)
    if len(su) == 1:
        l2u = np.zeros(len(sl), dtype=int)
    else:
        l2u = _nearest(su, sl)
    pairs = []
    for i, j in enumerate(u2l):
        if l2u[j] != i:
            continue
        a = samples_upper[up[ou[i]]].body
        b = samples_lower[lo[ol[j]]].body
        if math.hypot(a.x - b.x, a.y - b.y) <= gate:
            pairs.append((up[ou[i]], lo[ol[j]]))
    pairs.sort()
    return pairs


def fuse_dual(
    samples_upper: Sequence[ScanSample],
    samples_lower: Sequence[ScanSample],
    gate: float = FUSION_GATE,
) -> list[BodyPoint]:
    """Average the coordinates of paired hits; unpaired hits pass through unchanged.

    Output order: upper hits in sweep order (fused where paired), then the
    unpaired lower hits.
    """
    partner = dict(associate(samples_upper, samples_lower, gate))
    used = set(partner.values())
    fused = []
    for i, s in enumerate(samples_upper):
        if not s.is_hit:
            continue
        if i in partner:
            a, b = s.body, samples_lower[partner[i]].body
            fused.append(BodyPoint((a.x + b.x) / 2.0, (a.y + b.y) / 2.0, (a.z + b.z) / 2.0))
        else:
            fused.append(s.body)
    fused.extend(s.body for j, s in enumerate(samples_lower) if s.is_hit and j not in used)
    return fused


@dataclass(frozen=True)
class NormalPass:
    upper: list[ScanSample]
    lower: list[ScanSample]
    fused: list[BodyPoint]

    @property
    def samples(self) -> list[ScanSample]:
        return self.upper + self.lower


def normal_step(
    group: LrfGroup,
    robot: RobotPose,
    f: FrameConfig,
    scene: Scene,
    rng: np.random.Generator,
    store=None,
) -> NormalPass:
    """Both units sweep the forward sector; hits are fused and handed to ``store``."""
    start, width = face_interval(f)
    az = (start, start + width)
    upper = sweep(group.upper, group.upper.rotate1, az, robot, f, scene, rng, ScanMode.NORMAL)
    lower = sweep(group.lower, group.lower.rotate1, az, robot, f, scene, rng, ScanMode.NORMAL)
    result = NormalPass(upper, lower, fuse_dual(upper, lower))
    if store is not None:
        store.record_many(result.samples, body_to_global(robot.position, f))
    return result


@dataclass(frozen=True)
class TransitionState:
    mode: ScanMode = ScanMode.NORMAL
    misses: int = 0
    miss_limit: int = DEFAULT_MISS_LIMIT


def mode_transition(state: TransitionState, target_detected: bool) -> TransitionState:
    """Enter locking on the first detection; fall back after ``miss_limit`` consecutive misses."""
    if state.mode is ScanMode.NORMAL:
        if target_detected:
            return replace(state, mode=ScanMode.LOCKING, misses=0)
        return state
    if target_detected:
        return replace(state, misses=0)
    misses = state.misses + 1
    if misses >= state.miss_limit:
        return replace(state, mode=ScanMode.NORMAL, misses=0)
    return replace(state, misses=misses)


@dataclass(frozen=True)
class TrackRecord:
    time: float
    centroid_body: BodyPoint
    interval: ScanInterval
    robot_pose: RobotPose


@dataclass(frozen=True)
class LockingPass:
    """What one locking pass swept and saw."""

    time: float
    reverse: bool
    tracker_arc: tuple[float, float]  # (start, width), R0-referenced
    sweeper_arcs: tuple[tuple[float, float], ...]
    tracker_samples: list[ScanSample]
    sweeper_samples: list[ScanSample]
    clusters: list[Cluster]

    @property
    def samples(self) -> list[ScanSample]:
        return self.tracker_samples + self.sweeper_samples


@dataclass(frozen=True)
class LockState:
    target_id: str
    interval: ScanInterval
    centroid: BodyPoint
    tracker_lrf: str
    sweeper_lrf: str
    guard: float = DEFAULT_GUARD
    track: tuple[TrackRecord, ...] = ()
    passes: int = 0
    last_pass: LockingPass | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.tracker_lrf == self.sweeper_lrf:
            raise ValueError("tracker and sweeper must be different units")


def seed_lock(
    cluster: Cluster, tracker_lrf: str, sweeper_lrf: str, guard: float = DEFAULT_GUARD
) -> LockState:
    """Lock onto a target cluster found by a normal-mode sweep."""
    return LockState(cluster.entity_id, cluster.interval, cluster.centroid, tracker_lrf, sweeper_lrf, guard)


def _complement(face: tuple[float, float], arc: tuple[float, float], margin: float):
    """Pieces of ``face`` left after removing ``arc``, both given as (start, width)."""
    f0, fw = face
    a = normalize_angle(arc[0] - f0)
    pieces = [(0.0, fw)]
    for lo in (a, a - 2.0 * math.pi):
        hi = lo + arc[1]
        nxt = []
        for p0, p1 in pieces:
            if hi < p0 or lo > p1:
                nxt.append((p0, p1))
                continue
            if lo - margin > p0:
                nxt.append((p0, lo - margin))
            if hi + margin < p1:
                nxt.append((hi + margin, p1))
        pieces = nxt
    return tuple((f0 + p0, p1 - p0) for p0, p1 in pieces if p1 > p0)


def locking_step(
    lock: LockState,
    group: LrfGroup,
    robot: RobotPose,
    f: FrameConfig,
    scene: Scene,
    rng: np.random.Generator,
) -> LockState:
    """One round-trip pass over the locked interval plus the complementary obstacle sweep.

    The tracker reverses direction every pass. Raises ``TargetLost`` (carrying the
    pass and the unchanged lock) when no target cluster lies within the association
    gate of the previous centroid.
    """
    tracker = group.unit(lock.tracker_lrf)
    sweeper = group.unit(lock.sweeper_lrf)
    reverse = lock.passes % 2 == 1
    arc = lock.interval.widened(lock.guard)
    t_samples = sweep(
        tracker, tracker.rotate1, (arc[0], arc[0] + arc[1]), robot, f, scene, rng, ScanMode.LOCKING, reverse
    )
    ordered = t_samples[::-1] if reverse else t_samples
    clusters = extract_intervals(ordered)

    s_arcs = _complement(face_interval(f), arc, 0.5 * sweeper.angular_resolution)
    s_samples: list[ScanSample] = []
    for start, width in s_arcs:
        s_samples += sweep(sweeper, sweeper.rotate1, (start, start + width), robot, f, scene, rng, ScanMode.LOCKING)

    info = LockingPass(robot.time, reverse, arc, s_arcs, t_samples, s_samples, clusters)
    best, best_d = None, TARGET_GATE
    for c in clusters:
        if c.entity_id != lock.target_id:
            continue
        cen = c.centroid
        d = math.hypot(cen.x - lock.centroid.x, cen.y - lock.centroid.y)
        if d < best_d:
            best, best_d = c, d
    if best is None:
        lost = replace(lock, passes=lock.passes + 1, last_pass=info)
        raise TargetLost(f"target {lock.target_id!r} not found at t={robot.time}", lost)

    rec = TrackRecord(robot.time, best.centroid, best.interval, robot)
    if lock.track and rec.time <= lock.track[-1].time:
        raise ValueError("track times must strictly increase")
    return replace(
        lock,
        interval=best.interval,
        centroid=rec.centroid_body,
        track=lock.track + (rec,),
        passes=lock.passes + 1,
        last_pass=info,
    )
