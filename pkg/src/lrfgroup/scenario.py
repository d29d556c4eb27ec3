"""Scenario documents: JSON schema, validation and conversion to runtime objects.

Angles are degrees in the document and radians everywhere else. Positions in
``robot_track`` and entity ``motion`` are following-frame meters.

Example::

    {
      "schema_version": 1,
      "name": "demo",
      "frame": {"theta_g_deg": 30.0, "global_origin": [100.0, 200.0, 12.0]},
      "robot_track": [[0.0, 0.0, 0.0, 0.0]],
      "ground_z": -0.5,
      "group": {
        "max_range": 10.0, "resolution_deg": 0.25, "sigma": 0.01,
        "upper": {"id": "lrf1", "mount": [0.0, 0.1, 0.6], "zenith_deg": 90.0},
        "lower": {"id": "lrf2", "mount": [0.0, 0.1, 0.2], "zenith_deg": 90.0}
      },
      "entities": [
        {"id": "H", "kind": "target", "shape": {"type": "cylinder", "radius": 0.25},
         "height": 1.7, "motion": [[0.0, 0.0, 3.0], [2.0, 0.5, 1.6]]}
      ],
      "policy": {"kind": "obscured", "max_retention_range": 10.0},
      "tracking": {"guard_deg": 5.0, "miss_limit": 3, "tracker": "upper"},
      "seed": 7, "duration": 3.0, "step_dt": 0.1
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema

from lrfgroup.coordsys import BodyPoint, FrameConfig, GlobalPoint, LrfMount
from lrfgroup.errors import ScenarioError
from lrfgroup.lrf import LrfGroup, LrfUnit
from lrfgroup.scanmodes import DEFAULT_GUARD, DEFAULT_MISS_LIMIT
from lrfgroup.simworld import Box, Cylinder, Entity, EntityKind
from lrfgroup.storage import StorageKind, StoragePolicy

SCHEMA_VERSION = 1
BUNDLED = ("fig13_normal", "fig14_locking", "fusion_bench")

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_unit = {
    "type": "object",
    "required": ["id", "mount"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "mount": _vec3,
        "zenith_deg": {"type": "number", "minimum": 0, "maximum": 180},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["frame", "robot_track", "group", "entities", "seed", "duration", "step_dt"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "frame": {
            "type": "object",
            "required": ["theta_g_deg", "global_origin"],
            "additionalProperties": False,
            "properties": {"theta_g_deg": {"type": "number"}, "global_origin": _vec3},
        },
        "robot_track": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
        },
        "ground_z": {"type": "number"},
        "group": {
            "type": "object",
            "required": ["upper", "lower"],
            "additionalProperties": False,
            "properties": {
                "max_range": {"type": "number", "exclusiveMinimum": 0},
                "resolution_deg": {"type": "number", "exclusiveMinimum": 0},
                "sigma": {"type": "number", "minimum": 0},
                "upper": _unit,
                "lower": _unit,
            },
        },
        "entities": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "kind", "shape", "height", "motion"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kind": {"enum": [k.value for k in EntityKind]},
                    "shape": {
                        "oneOf": [
                            {
                                "type": "object",
                                "required": ["type", "radius"],
                                "additionalProperties": False,
                                "properties": {
                                    "type": {"const": "cylinder"},
                                    "radius": {"type": "number", "exclusiveMinimum": 0},
                                },
                            },
                            {
                                "type": "object",
                                "required": ["type", "half_extents"],
                                "additionalProperties": False,
                                "properties": {
                                    "type": {"const": "box"},
                                    "half_extents": {
                                        "type": "array",
                                        "items": {"type": "number", "exclusiveMinimum": 0},
                                        "minItems": 2,
                                        "maxItems": 2,
                                    },
                                },
                            },
                        ]
                    },
                    "height": {"type": "number", "exclusiveMinimum": 0},
                    "base_z": {"type": "number"},
                    "motion": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                    },
                },
            },
        },
        "policy": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": [k.value for k in StorageKind]},
                "max_retention_range": {"type": "number", "exclusiveMinimum": 0},
                "cell_size": {"type": "number", "exclusiveMinimum": 0},
                "grid_resolution": {"type": "number", "exclusiveMinimum": 0},
                "grid_extent": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "tracking": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "guard_deg": {"type": "number", "exclusiveMinimum": 0},
                "miss_limit": {"type": "integer", "minimum": 1},
                "tracker": {"enum": ["upper", "lower"]},
            },
        },
        "seed": {"type": "integer"},
        "duration": {"type": "number", "minimum": 0},
        "step_dt": {"type": "number", "exclusiveMinimum": 0},
    },
}


@dataclass(frozen=True)
class Scenario:
    frame: FrameConfig
    robot_track: tuple[tuple[float, float, float, float], ...]
    group: LrfGroup
    entities: tuple[Entity, ...]
    duration: float
    step_dt: float
    seed: int
    policy: StoragePolicy = field(default_factory=StoragePolicy)
    guard: float = DEFAULT_GUARD
    miss_limit: int = DEFAULT_MISS_LIMIT
    tracker: str = "upper"
    name: str = "scenario"

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if not self.step_dt > 0:
            raise ValueError("step_dt must be > 0")
        targets = [e for e in self.entities if e.kind is EntityKind.TARGET]
        if len(targets) != 1:
            raise ValueError(f"scenario needs exactly one target entity, found {len(targets)}")
        ids = [e.id for e in self.entities]
        if len(set(ids)) != len(ids):
            raise ValueError("entity ids must be unique")
        ts = [w[0] for w in self.robot_track]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("robot_track times must be strictly increasing")

    @property
    def target(self) -> Entity:
        return next(e for e in self.entities if e.kind is EntityKind.TARGET)

    @property
    def tracker_unit(self) -> LrfUnit:
        return self.group.upper if self.tracker == "upper" else self.group.lower

    @property
    def sweeper_unit(self) -> LrfUnit:
        return self.group.lower if self.tracker == "upper" else self.group.upper

    @property
    def n_steps(self) -> int:
        return max(0, math.ceil(self.duration / self.step_dt - 1e-9))


def _location(err: jsonschema.ValidationError) -> str:
    return "/" + "/".join(str(p) for p in err.absolute_path)


def validate(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ScenarioError(err.message, _location(err))


def _shape(spec: dict):
    if spec["type"] == "cylinder":
        return Cylinder(float(spec["radius"]))
    hx, hy = spec["half_extents"]
    return Box(float(hx), float(hy))


def from_dict(doc: dict) -> Scenario:
    """Validate a parsed scenario document and build the runtime ``Scenario``."""
    validate(doc)
    fr = doc["frame"]
    frame = FrameConfig(math.radians(fr["theta_g_deg"]), GlobalPoint(*map(float, fr["global_origin"])))
    g = doc["group"]
    common = dict(
        max_range=float(g.get("max_range", 10.0)),
        angular_resolution=math.radians(g.get("resolution_deg", 0.25)),
        range_noise_sigma=float(g.get("sigma", 0.0)),
    )

    def unit(u: dict) -> LrfUnit:
        return LrfUnit(
            u["id"],
            LrfMount(BodyPoint(*map(float, u["mount"]))),
            rotate1=math.radians(u.get("zenith_deg", 90.0)),
            **common,
        )

    ground = float(doc.get("ground_z", 0.0))
    try:
        group = LrfGroup(unit(g["upper"]), unit(g["lower"]))
        entities = []
        for k, e in enumerate(doc["entities"]):
            try:
                entities.append(
                    Entity(
                        e["id"],
                        EntityKind(e["kind"]),
                        _shape(e["shape"]),
                        float(e["height"]),
                        tuple(tuple(map(float, w)) for w in e["motion"]),
                        float(e.get("base_z", ground)),
                    )
                )
            except ValueError as exc:
                raise ScenarioError(str(exc), f"/entities/{k}") from exc
        pol = dict(doc.get("policy", {"kind": "obscured"}))
        pol.setdefault("max_retention_range", common["max_range"])
        tr = doc.get("tracking", {})
        return Scenario(
            frame=frame,
            robot_track=tuple(tuple(map(float, w)) for w in doc["robot_track"]),
            group=group,
            entities=tuple(entities),
            duration=float(doc["duration"]),
            step_dt=float(doc["step_dt"]),
            seed=int(doc["seed"]),
            policy=StoragePolicy(**pol),
            guard=math.radians(tr.get("guard_deg", math.degrees(DEFAULT_GUARD))),
            miss_limit=int(tr.get("miss_limit", DEFAULT_MISS_LIMIT)),
            tracker=tr.get("tracker", "upper"),
            name=doc.get("name", "scenario"),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc), "/") from exc


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be an object", "/")
    return from_dict(doc)


def load(path) -> Scenario:
    return loads(Path(path).read_text(encoding="utf-8"))


def bundled_path(name: str):
    """Path-like handle to one of the packaged example scenarios."""
    stem = name.removesuffix(".json")
    if stem not in BUNDLED:
        raise KeyError(f"unknown bundled scenario {name!r}; choose from {BUNDLED}")
    return resources.files("lrfgroup") / "scenarios" / f"{stem}.json"


def load_bundled(name: str) -> Scenario:
    return loads(bundled_path(name).read_text(encoding="utf-8"))


def with_overrides(
    sc: Scenario,
    seed: int | None = None,
    resolution_deg: float | None = None,
    storage: str | None = None,
) -> Scenario:
    if seed is not None:
        sc = replace(sc, seed=seed)
    if resolution_deg is not None:
        res = math.radians(resolution_deg)
        g = sc.group
        sc = replace(
            sc,
            group=LrfGroup(replace(g.upper, angular_resolution=res), replace(g.lower, angular_resolution=res)),
        )
    if storage is not None:
        sc = replace(sc, policy=replace(sc.policy, kind=StorageKind(storage)))
    return sc
