"""Command line front-end: ``lrfgroup run | convert | oracle``.

Angles are degrees on the command line and in every output file.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from lrfgroup import coordsys as cs
from lrfgroup import oracles
from lrfgroup.errors import LrfError, ScenarioError, ZeroRange
from lrfgroup.runner import run, write_outputs
from lrfgroup.scenario import BUNDLED, load, load_bundled, with_overrides
from lrfgroup.simworld import brute_force_intervals, ray_cast

log = logging.getLogger("lrfgroup")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
FRAMES = ("global", "body", "spherical")


def _triple(text: str) -> tuple[float, float, float]:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    if len(parts) != 3 or not all(math.isfinite(v) for v in parts):
        raise argparse.ArgumentTypeError(f"expected three finite numbers, got {text!r}")
    return parts[0], parts[1], parts[2]


def _load_scenario(ref: str):
    p = Path(ref)
    if not p.exists() and ref.removesuffix(".json") in BUNDLED:
        return load_bundled(ref)
    if not p.exists():
        raise ScenarioError("no such file", ref)
    return load(p)


def _run_one(ref: str, out: Path, overrides: dict) -> dict:
    sc = with_overrides(_load_scenario(ref), **overrides)
    report = run(sc)
    write_outputs(report, out)
    return report.summary()


def cmd_run(args) -> int:
    overrides = {"seed": args.seed, "resolution_deg": args.resolution_deg, "storage": args.storage}
    refs = args.scenario
    outs = [Path(args.out)] if len(refs) == 1 else [Path(args.out) / Path(r).stem for r in refs]
    try:
        if args.jobs > 1 and len(refs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                summaries = list(ex.map(_run_one, refs, outs, [overrides] * len(refs)))
        else:
            summaries = [_run_one(r, o, overrides) for r, o in zip(refs, outs)]
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LrfError, OSError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for s, o in zip(summaries, outs):
        timeline = " -> ".join(seg["mode"] for seg in s["mode_timeline"]) or "(no passes)"
        print(f"{s['scenario']}: {s['steps']} passes, {timeline}, outputs in {o}")
    return EXIT_OK


def _fmt(values) -> str:
    return " ".join(f"{v:.12g}" for v in values)


def cmd_convert(args) -> int:
    frame = cs.FrameConfig(math.radians(args.theta_g_deg), cs.GlobalPoint(*args.origin))
    robot = cs.RobotPose(cs.BodyPoint(*args.robot))
    mount = cs.LrfMount(cs.BodyPoint(*args.mount))
    a, b, c = args.point
    try:
        if args.from_ == "global":
            body = cs.global_to_body(cs.GlobalPoint(a, b, c), frame)
        elif args.from_ == "body":
            body = cs.BodyPoint(a, b, c)
        else:
            sph = cs.SphericalPoint(a, math.radians(b), math.radians(c))
            body = cs.spherical_to_body(sph, robot, mount, frame)
        if args.to == "body":
            out = body.as_tuple()
        elif args.to == "global":
            out = cs.body_to_global(body, frame).as_tuple()
        else:
            s = cs.body_to_spherical(body, robot, mount, frame)
            out = (s.r, math.degrees(s.phi), math.degrees(s.theta))
    except (ValueError, ZeroRange) as exc:
        print(f"conversion error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(_fmt(out))
    return EXIT_OK


def cmd_oracle(args) -> int:
    res = math.radians(args.resolution_deg)
    if args.kind == "intervals":
        scene = oracles.disk_scene(args.distance, args.radius, math.pi / 2)
        found = brute_force_intervals(scene, cs.LrfMount(), cs.FrameConfig(), res / 4)
        for oi in found:
            iv = oi.interval
            print(json.dumps({
                "entity": oi.entity_id,
                "psi_a_deg": math.degrees(iv.psi_a),
                "psi_b_deg": math.degrees(iv.psi_b),
                "range_deg": math.degrees(iv.range),
                "analytic_deg": math.degrees(oracles.disk_subtended(args.distance, args.radius)),
            }))
    elif args.kind == "raycast":
        scene = oracles.disk_scene(args.distance, args.radius)
        hit = ray_cast(cs.BodyPoint(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), scene)
        print(json.dumps({
            "distance": None if hit is None else hit[0],
            "entity": None if hit is None else hit[1],
            "analytic": args.distance - args.radius,
        }))
    else:
        print(json.dumps(oracles.fusion_trial(args.sigma, args.n, args.seed)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrfgroup", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run scenario files and write logs")
    r.add_argument("--scenario", action="append", required=True,
                   help=f"scenario JSON path or bundled name ({', '.join(BUNDLED)}); repeatable")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--resolution-deg", type=float)
    r.add_argument("--storage", choices=["obscured", "map"])
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("convert", help="convert one point between frames")
    c.add_argument("--theta-g-deg", type=float, default=0.0)
    c.add_argument("--origin", type=_triple, default=(0.0, 0.0, 0.0), help="gx,gy,gz of the task start")
    c.add_argument("--from", dest="from_", choices=FRAMES, required=True)
    c.add_argument("--to", choices=FRAMES, required=True)
    c.add_argument("--point", type=_triple, required=True,
                   help="x,y,z / gx,gy,gz / r,phi_deg,theta_deg; write --point=-1,2,3 for a leading minus")
    c.add_argument("--robot", type=_triple, default=(0.0, 0.0, 0.0))
    c.add_argument("--mount", type=_triple, default=(0.0, 0.0, 0.0))
    c.set_defaults(func=cmd_convert)

    o = sub.add_parser("oracle", help="print reference vectors from closed-form setups")
    o.add_argument("--kind", choices=["intervals", "raycast", "fusion"], required=True)
    o.add_argument("--distance", type=float, default=5.0)
    o.add_argument("--radius", type=float, default=1.0)
    o.add_argument("--resolution-deg", type=float, default=0.25)
    o.add_argument("--sigma", type=float, default=0.05)
    o.add_argument("--n", type=int, default=10_000)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
