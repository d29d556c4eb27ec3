import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrfgroup.coordsys import BodyPoint, FrameConfig, LrfMount, RobotPose, SphericalPoint, normalize_angle
from lrfgroup.errors import TargetLost
from lrfgroup.intervals import ScanInterval, interval_within, make_interval, scan_angle_range
from lrfgroup.lrf import LrfGroup, LrfUnit, ScanMode, ScanSample, sweep
from lrfgroup.oracles import disk_scene, disk_subtended
from lrfgroup.scanmodes import (
    DEFAULT_GUARD,
    LockState,
    TransitionState,
    associate,
    extract_intervals,
    fuse_dual,
    locking_step,
    mode_transition,
    normal_step,
    seed_lock,
)
from lrfgroup.simworld import Cylinder, Entity, EntityKind, PlacedEntity, Scene, face_interval, subtended_interval

from conftest import cylinder, make_scene

DEG = math.radians(1.0)
RES = math.radians(0.25)


def sample(r, phi, z=0.0, lrf="u", hit="x", f=None):
    return ScanSample(0.0, lrf, SphericalPoint(r, phi, math.pi / 2), hit, ScanMode.NORMAL,
                      RobotPose(), LrfMount(BodyPoint(0.0, 0.0, z)), f or FrameConfig())


def group(sigma=0.0, res=RES):
    up = LrfUnit("up", LrfMount(BodyPoint(0.0, 0.2, 0.45)), angular_resolution=res, range_noise_sigma=sigma)
    lo = LrfUnit("lo", LrfMount(BodyPoint(0.0, 0.2, 0.15)), angular_resolution=res, range_noise_sigma=sigma)
    return LrfGroup(up, lo)


def target_scene(x, y, t=0.0, radius=0.25, extra=()):
    e = Entity("T", EntityKind.TARGET, Cylinder(radius), 1.7, ((0.0, x, y),), -0.4)
    placed = (PlacedEntity(e, x, y),) + tuple(PlacedEntity(o, *o.position_at(t)) for o in extra)
    return Scene(t, RobotPose(time=t), placed)


class TestScanAngleRange:
    @pytest.mark.parametrize(
        "a, b, expected",
        [(0.0, 10.0, 10.0), (37.0, 37.0, 0.0), (350.0, 8.0, 18.0), (180.0, 181.5, 1.5)],
    )
    def test_examples(self, a, b, expected):
        iv = make_interval(math.radians(a), math.radians(b), 0.0)
        assert math.degrees(scan_angle_range(iv)) == pytest.approx(expected, abs=1e-9)

    @given(st.floats(-20, 20), st.floats(0, 6.28))
    def test_range_in_turn(self, a, w):
        iv = make_interval(a, a + w, 0.3)
        r = scan_angle_range(iv)
        assert 0.0 <= r < 2 * math.pi
        assert math.remainder(r - w, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)

    def test_deflection_from_forward_line(self):
        # body +Y sits at R0 azimuth pi/2 - theta_g; a boundary there has zero deflection
        for theta_g in (0.0, 0.4, 2.0):
            iv = make_interval(math.pi / 2 - theta_g, math.pi / 2 - theta_g + 0.1, theta_g)
            assert math.remainder(iv.deflection, 2 * math.pi) == pytest.approx(0.0, abs=1e-12)
        iv = make_interval(math.pi, math.pi + 0.1, 0.0)
        assert iv.deflection == pytest.approx(math.pi / 2)

    def test_widened_and_contains(self):
        iv = make_interval(math.radians(350), math.radians(8), 0.0)
        start, width = iv.widened(math.radians(5))
        assert math.degrees(start) == pytest.approx(345.0)
        assert math.degrees(width) == pytest.approx(28.0)
        assert iv.contains(0.0) and iv.contains(math.radians(355))
        assert not iv.contains(math.radians(10))


class TestExtractIntervals:
    def test_empty(self):
        assert extract_intervals([]) == []

    def test_all_misses(self):
        assert extract_intervals([sample(10.0, k * DEG, hit=None) for k in range(10)]) == []

    def test_single_gap_bridged(self):
        hits = [sample(3.0, k * DEG, hit=None if k == 3 else "x") for k in range(6)]
        (c,) = extract_intervals(hits)
        assert (c.interval.psi_a, c.interval.psi_b) == (0.0, pytest.approx(5 * DEG))

    def test_double_gap_splits(self):
        hits = [sample(3.0, k * DEG, hit=None if k in (3, 4) else "x") for k in range(8)]
        assert len(extract_intervals(hits)) == 2

    def test_range_jump_splits(self):
        hits = [sample(3.0 if k < 4 else 6.0, k * DEG, hit="a" if k < 4 else "b") for k in range(8)]
        a, b = extract_intervals(hits)
        assert (a.entity_id, b.entity_id) == ("a", "b")

    @pytest.mark.parametrize("deg", [10.0, 18.0])
    def test_fig14_widths(self, deg, rng):
        rho = 0.25
        d = rho / math.sin(math.radians(deg) / 2)
        scene = disk_scene(d, rho, math.pi / 2)
        u = LrfUnit("u", LrfMount(), angular_resolution=RES)
        s = sweep(u, math.pi / 2, (0.0, math.pi), RobotPose(), FrameConfig(), scene, rng)
        (c,) = extract_intervals(s)
        assert math.degrees(c.interval.range) == pytest.approx(deg, abs=2 * math.degrees(RES))
        assert c.entity_id == "disk"

    def test_disk_formula_parameterized(self, rng):
        u = LrfUnit("u", LrfMount(), angular_resolution=RES)
        for d in np.linspace(1.0, 9.0, 9):
            for rho in (0.1, 0.3, 0.6):
                if rho >= d:
                    continue
                s = sweep(u, math.pi / 2, (0.0, math.pi), RobotPose(), FrameConfig(), disk_scene(d, rho, 1.3), rng)
                (c,) = extract_intervals(s)
                assert c.interval.range == pytest.approx(disk_subtended(d, rho), abs=2 * RES)
                # quantization never makes the measured interval wider than the truth
                assert c.interval.range <= disk_subtended(d, rho) + 1e-12

    def test_boundaries_inside_true_tangents(self, rng):
        f = FrameConfig(0.6)
        u = LrfUnit("u", LrfMount(), angular_resolution=RES)
        for _ in range(20):
            scene = disk_scene(rng.uniform(2, 8), rng.uniform(0.1, 0.8), rng.uniform(0.4, 2.7))
            start, width = face_interval(f)
            s = sweep(u, math.pi / 2, (start, start + width), RobotPose(), f, scene, rng)
            (c,) = extract_intervals(s)
            truth = subtended_interval(scene.entities[0], (0.0, 0.0), f)
            assert interval_within((c.interval.psi_a, c.interval.range), truth, tol=1e-9)
            assert c.interval.range >= truth[1] - 2 * RES


class TestFuseDual:
    def test_arithmetic_mean(self):
        (p,) = fuse_dual([sample(1.0, 0.0, lrf="a")], [sample(1.2, 0.0, lrf="b")])
        assert p.as_tuple() == pytest.approx((1.1, 0.0, 0.0))

    def test_identical_sweeps(self, rng):
        u = LrfUnit("u", LrfMount(), angular_resolution=DEG)
        s = sweep(u, math.pi / 2, (0.0, math.pi), RobotPose(), FrameConfig(), disk_scene(3.0, 0.5, 1.0), rng)
        assert fuse_dual(s, s) == [x.body for x in s if x.is_hit]

    def test_unpaired_pass_through(self):
        up = [sample(1.0, 0.0)]
        lo = [sample(5.0, 0.0, lrf="b"), sample(2.0, 90 * DEG, lrf="b")]
        out = fuse_dual(up, lo)
        assert len(out) == 3
        assert out[0] == up[0].body
        assert set(out[1:]) == {lo[0].body, lo[1].body}

    def test_misses_are_dropped(self):
        assert fuse_dual([sample(10.0, 0.0, hit=None)], [sample(10.0, 0.0, hit=None)]) == []

    def test_pairs_are_one_to_one(self, rng):
        u = LrfUnit("u", LrfMount(BodyPoint(0, 0, 0.3)), angular_resolution=DEG, range_noise_sigma=0.05)
        l = LrfUnit("l", LrfMount(), angular_resolution=DEG, range_noise_sigma=0.05)
        scene = make_scene([cylinder("a", 0, 3, 0.5), cylinder("b", 1, 3, 0.4)])
        su = sweep(u, math.pi / 2, (0.0, math.pi), RobotPose(), FrameConfig(), scene, rng)
        sl = sweep(l, math.pi / 2, (0.0, math.pi), RobotPose(), FrameConfig(), scene, rng)
        pairs = associate(su, sl)
        assert len({i for i, _ in pairs}) == len({j for _, j in pairs}) == len(pairs)
        for i, j in pairs:
            assert su[i].reading.phi == sl[j].reading.phi
        nu = sum(s.is_hit for s in su)
        nl = sum(s.is_hit for s in sl)
        assert len(fuse_dual(su, sl)) == nu + nl - len(pairs)

    def test_variance_ratio(self):
        from lrfgroup.oracles import fusion_trial

        res = fusion_trial(sigma=0.05, n=10_000, seed=5)
        assert res["n"] == 10_000
        # the 0.2 m gate rejects pairs whose noise difference exceeds ~2.8 sigma
        assert res["pairs"] >= 0.99 * res["n"]
        assert 0.64 <= res["ratio"] <= 0.78


class TestNormalStep:
    def test_sample_count_and_empty_scene(self, rng):
        out = normal_step(group(), RobotPose(), FrameConfig(0.3), make_scene([]), rng)
        assert len(out.samples) == 2 * (720 + 1)
        assert not any(s.is_hit for s in out.samples)
        assert out.fused == []

    def test_fused_matches_oracle(self, rng):
        scene = target_scene(0.5, 3.0)
        out = normal_step(group(sigma=0.02), RobotPose(), FrameConfig(1.0), scene, rng)
        assert out.fused == fuse_dual(out.upper, out.lower)
        assert all(s.mode_tag is ScanMode.NORMAL for s in out.samples)

    def test_records_into_store(self, rng):
        from lrfgroup.storage import ObscuredStore

        store = ObscuredStore(10.0)
        normal_step(group(), RobotPose(), FrameConfig(), target_scene(0.0, 3.0), rng, store)
        assert len(store) > 0


class TestModeTransition:
    def test_never_detected(self):
        st_ = TransitionState()
        for _ in range(50):
            st_ = mode_transition(st_, False)
            assert st_.mode is ScanMode.NORMAL

    def test_enters_on_first_detection(self):
        seen = [False] * 5 + [True] * 5
        st_, modes = TransitionState(), []
        for d in seen:
            st_ = mode_transition(st_, d)
            modes.append(st_.mode)
        assert modes.index(ScanMode.LOCKING) == 5

    @pytest.mark.parametrize("k", [1, 2, 3, 7])
    def test_leaves_after_exactly_k_misses(self, k):
        st_ = mode_transition(TransitionState(miss_limit=k), True)
        for i in range(k):
            assert st_.mode is ScanMode.LOCKING
            st_ = mode_transition(st_, False)
        assert st_.mode is ScanMode.NORMAL

    def test_detection_resets_miss_count(self):
        st_ = mode_transition(TransitionState(), True)
        for d in (False, False, True, False, False):
            st_ = mode_transition(st_, d)
        assert st_.mode is ScanMode.LOCKING


def _lock_on(scene, g, f, rng):
    npass = normal_step(g, RobotPose(), f, scene, rng)
    c = next(c for c in extract_intervals(npass.upper) if c.entity_id == "T")
    return seed_lock(c, "up", "lo")


class TestLockingStep:
    def test_stationary_target(self, rng):
        g, f = group(), FrameConfig(0.25)
        scene = target_scene(-0.5, 3.0)
        lock = _lock_on(scene, g, f, rng)
        first = None
        for k in range(1, 11):
            lock = locking_step(lock, g, RobotPose(time=k * 0.1), f, replace(scene, time=k * 0.1), rng)
            iv = lock.interval
            first = first or iv
            assert abs(math.remainder(iv.psi_a - first.psi_a, 2 * math.pi)) <= RES + 1e-12
            assert abs(iv.range - first.range) <= RES + 1e-12
        assert len(lock.track) == 10
        assert [p.time for p in lock.track] == sorted({p.time for p in lock.track})

    def test_round_trip_direction(self, rng):
        g, f = group(), FrameConfig()
        scene = target_scene(0.0, 3.0)
        lock = _lock_on(scene, g, f, rng)
        dirs = []
        for k in range(1, 5):
            lock = locking_step(lock, g, RobotPose(time=k), f, replace(scene, time=k), rng)
            lp = lock.last_pass
            dirs.append(lp.reverse)
            phis = [s.reading.phi for s in lp.tracker_samples]
            steps = np.diff(np.unwrap(phis))
            assert np.all(steps < 0) if lp.reverse else np.all(steps > 0)
        assert dirs == [False, True, False, True]

    def test_role_disjointness(self, rng):
        g, f = group(), FrameConfig(0.7)
        scene = target_scene(0.8, 2.5, extra=(cylinder("P", -1.5, 2.0, 0.2, kind=EntityKind.IRRELEVANT_HUMAN),))
        lock = _lock_on(scene, g, f, rng)
        lock = locking_step(lock, g, RobotPose(time=1.0), f, replace(scene, time=1.0), rng)
        lp = lock.last_pass
        arc = lp.tracker_arc
        for s in lp.sweeper_samples:
            off = normalize_angle(s.reading.phi - arc[0])
            assert not off < arc[1] - 1e-12, "sweeper ray inside the tracker arc"
        # together they cover the face sector at the sweeper's resolution
        covered = sum(w for _, w in lp.sweeper_arcs) + arc[1]
        assert covered == pytest.approx(math.pi, abs=2 * RES)

    def test_fig14_widening(self):
        from lrfgroup.runner import run
        from lrfgroup.scenario import load_bundled

        rep = run(load_bundled("fig14_locking"))
        widths = [math.degrees(r.interval.range) for r in rep.tracks]
        assert widths[0] == pytest.approx(10.0, abs=0.5)
        assert widths[-1] == pytest.approx(18.0, abs=0.5)
        assert rep.containment()["target_lost"] == 0

    def test_moving_target_stays_contained(self, rng):
        g, f = group(sigma=0.01), FrameConfig(0.4)
        d, omega = 3.0, math.radians(2.0)  # per pass, well under the 5 deg guard
        ex, ey = 0.0, 0.2
        az0 = 1.2

        def scene_for(k):
            # back-and-forth swing; angular speed peaks at omega per pass
            a = az0 + 0.8 * math.sin(k * omega / 0.8)
            return target_scene(ex + d * math.cos(a), ey + d * math.sin(a), t=float(k))

        lock = _lock_on(scene_for(0), g, f, rng)
        for k in range(1, 200):
            scene = scene_for(k)
            lock = locking_step(lock, g, RobotPose(time=float(k)), f, scene, rng)
            truth = subtended_interval(scene.get("T"), (ex, ey), f)
            assert interval_within(truth, lock.last_pass.tracker_arc)

    def test_target_lost(self, rng):
        g, f = group(), FrameConfig()
        lock = _lock_on(target_scene(0.0, 3.0), g, f, rng)
        with pytest.raises(TargetLost) as exc:
            locking_step(lock, g, RobotPose(time=1.0), f, make_scene([], t=1.0), rng)
        lost = exc.value.lock
        assert lost.passes == lock.passes + 1
        assert lost.track == lock.track and lost.interval == lock.interval
        assert lost.last_pass is not None

    def test_far_jump_is_not_associated(self, rng):
        g, f = group(), FrameConfig()
        lock = _lock_on(target_scene(0.0, 3.0), g, f, rng)
        # same id but teleported 0.6 m along the ray, beyond the centroid gate
        with pytest.raises(TargetLost):
            locking_step(lock, g, RobotPose(time=1.0), f, target_scene(0.0, 3.6, t=1.0), rng)

    def test_roles_must_differ(self):
        iv = ScanInterval(0.0, 0.1, 0.0)
        with pytest.raises(ValueError):
            LockState("T", iv, BodyPoint(0, 0, 0), "up", "up")

    def test_default_guard(self):
        assert math.degrees(DEFAULT_GUARD) == pytest.approx(5.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 8.0), st.floats(0.1, 0.8), st.floats(0.3, 2.8), st.floats(0.0, 6.28))
def test_extracted_width_law(d, rho, az, theta_g):
    if rho >= d * 0.9:
        return
    f = FrameConfig(theta_g)
    u = LrfUnit("u", LrfMount(), angular_resolution=RES)
    start, width = face_interval(f)
    s = sweep(u, math.pi / 2, (start, start + width), RobotPose(), f, disk_scene(d, rho, az), np.random.default_rng(0))
    cs = [c for c in extract_intervals(s) if c.entity_id == "disk"]
    if not cs:
        return
    truth = subtended_interval(disk_scene(d, rho, az).entities[0], (0.0, 0.0), f)
    if not interval_within(truth, (start, width)):
        return  # disk clipped by the sector edge
    (c,) = cs
    assert c.interval.range == pytest.approx(2 * math.asin(rho / d), abs=2 * RES)
