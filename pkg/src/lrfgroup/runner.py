"""Deterministic stepping of a scenario and its on-disk outputs."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lrfgroup.coordsys import body_to_global, exit_point
from lrfgroup.errors import TargetLost
from lrfgroup.intervals import interval_within
from lrfgroup.lrf import ScanMode, ScanSample
from lrfgroup.scanmodes import (
    LockState,
    TrackRecord,
    TransitionState,
    extract_intervals,
    locking_step,
    mode_transition,
    normal_step,
    seed_lock,
)
from lrfgroup.scenario import Scenario
from lrfgroup.simworld import scene_at, subtended_interval
from lrfgroup.storage import OccupancyMap, make_store, save_map

OUTPUT_VERSION = 1
TRACK_COLUMNS = ["t", "x", "y", "z", "psi_a_deg", "psi_b_deg", "range_deg", "deflection_deg"]


@dataclass
class RunReport:
    scenario: Scenario
    samples: list[tuple[int, ScanSample]] = field(default_factory=list)
    passes: list[dict] = field(default_factory=list)
    tracks: list[TrackRecord] = field(default_factory=list)
    store: object = None

    @property
    def modes(self) -> list[str]:
        return [p["mode"] for p in self.passes]

    def timeline(self) -> list[dict]:
        """Consecutive passes in the same mode, collapsed into segments."""
        out: list[dict] = []
        for p in self.passes:
            if out and out[-1]["mode"] == p["mode"]:
                out[-1]["t_end"] = p["t"]
                out[-1]["passes"] += 1
            else:
                out.append({"mode": p["mode"], "t_start": p["t"], "t_end": p["t"], "passes": 1})
        return out

    def containment(self) -> dict:
        checked = [p["contained"] for p in self.passes if p.get("contained") is not None]
        return {
            "locking_passes": sum(p["mode"] == ScanMode.LOCKING.value for p in self.passes),
            "checked": len(checked),
            "contained": sum(checked),
            "fraction": (sum(checked) / len(checked)) if checked else None,
            "target_lost": sum(bool(p.get("target_lost")) for p in self.passes),
        }

    def summary(self) -> dict:
        sc = self.scenario
        return {
            "version": OUTPUT_VERSION,
            "scenario": sc.name,
            "seed": sc.seed,
            "steps": len(self.passes),
            "normal_passes": self.modes.count(ScanMode.NORMAL.value),
            "locking_passes": self.modes.count(ScanMode.LOCKING.value),
            "mode_timeline": self.timeline(),
            "containment": self.containment(),
            "track_records": len(self.tracks),
            "track_range_deg": [math.degrees(r.interval.range) for r in self.tracks],
            "samples": len(self.samples),
            "storage": self.store.stats() if self.store is not None else None,
        }


def _target_cluster(samples, target_id):
    for c in extract_intervals(samples):
        if c.entity_id == target_id:
            return c
    return None


def run(scenario: Scenario) -> RunReport:
    """Step the scenario from t=0 in ``step_dt`` increments; a pure function of its input."""
    sc = scenario
    f = sc.frame
    rng = np.random.default_rng(sc.seed)
    report = RunReport(sc, store=make_store(sc.policy, f))
    trans = TransitionState(miss_limit=sc.miss_limit)
    lock: LockState | None = None
    target_id = sc.target.id
    tracker, sweeper = sc.tracker_unit, sc.sweeper_unit

    for k in range(sc.n_steps):
        t = k * sc.step_dt
        scene = scene_at(sc, t)
        robot = scene.robot
        log: dict = {"v": OUTPUT_VERSION, "pass": k, "t": t, "mode": trans.mode.value}

        if trans.mode is ScanMode.NORMAL:
            npass = normal_step(sc.group, robot, f, scene, rng, report.store)
            samples = npass.samples
            own = npass.upper if tracker is sc.group.upper else npass.lower
            other = npass.lower if tracker is sc.group.upper else npass.upper
            hit = _target_cluster(own, target_id) or _target_cluster(other, target_id)
            trans = mode_transition(trans, hit is not None)
            log["fused_points"] = len(npass.fused)
            log["target_detected"] = hit is not None
            if trans.mode is ScanMode.LOCKING:
                lock = seed_lock(hit, tracker.id, sweeper.id, sc.guard)
                log["seed_interval_deg"] = [math.degrees(hit.interval.psi_a), math.degrees(hit.interval.psi_b)]
        else:
            prev_track = len(lock.track)
            try:
                lock = locking_step(lock, sc.group, robot, f, scene, rng)
                detected = True
            except TargetLost as exc:
                lock = exc.lock
                detected = False
            lp = lock.last_pass
            samples = lp.samples
            report.store.record_many(samples, body_to_global(robot.position, f))
            report.tracks.extend(lock.track[prev_track:])
            e = exit_point(robot, tracker.mount)
            truth = subtended_interval(scene.get(target_id), (e.x, e.y), f)
            log.update(
                direction="reverse" if lp.reverse else "forward",
                tracker_arc_deg=[math.degrees(lp.tracker_arc[0]), math.degrees(lp.tracker_arc[1])],
                sweeper_arcs_deg=[[math.degrees(a), math.degrees(w)] for a, w in lp.sweeper_arcs],
                target_lost=not detected,
                contained=None if truth is None else interval_within(truth, lp.tracker_arc),
            )
            if detected:
                iv = lock.interval
                log["interval_deg"] = [math.degrees(iv.psi_a), math.degrees(iv.psi_b), math.degrees(iv.range)]
            trans = mode_transition(trans, detected)
            if trans.mode is ScanMode.NORMAL:
                lock = None
        log["samples"] = len(samples)
        report.passes.append(log)
        report.samples.extend((k, s) for s in samples)
    return report


def sample_record(k: int, s: ScanSample) -> dict:
    b, g, r = s.body, s.global_, s.reading
    return {
        "v": OUTPUT_VERSION,
        "pass": k,
        "t": s.time,
        "lrf": s.lrf_id,
        "mode": s.mode_tag.value,
        "r": r.r,
        "phi_deg": math.degrees(r.phi),
        "theta_deg": math.degrees(r.theta),
        "x": b.x,
        "y": b.y,
        "z": b.z,
        "gx": g.gx,
        "gy": g.gy,
        "gz": g.gz,
        "hit": s.hit,
    }


def write_outputs(report: RunReport, out_dir) -> dict[str, Path]:
    """Write samples.jsonl, passes.jsonl, track.csv, summary.json and the map if any."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "samples": out / "samples.jsonl",
        "passes": out / "passes.jsonl",
        "track": out / "track.csv",
        "summary": out / "summary.json",
    }
    with open(paths["samples"], "w", encoding="utf-8") as fh:
        for k, s in report.samples:
            fh.write(json.dumps(sample_record(k, s)) + "\n")
    with open(paths["passes"], "w", encoding="utf-8") as fh:
        for p in report.passes:
            fh.write(json.dumps(p) + "\n")
    with open(paths["track"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_COLUMNS)
        for rec in report.tracks:
            c, iv = rec.centroid_body, rec.interval
            w.writerow(
                [repr(v) for v in (
                    rec.time, c.x, c.y, c.z,
                    math.degrees(iv.psi_a), math.degrees(iv.psi_b),
                    math.degrees(iv.range), math.degrees(iv.deflection),
                )]
            )
    if isinstance(report.store, OccupancyMap):
        paths["map"] = out / "map.bin"
        save_map(report.store, paths["map"])
    summary = report.summary()
    summary["outputs"] = sorted(p.name for p in paths.values())
    paths["summary"].write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return paths
