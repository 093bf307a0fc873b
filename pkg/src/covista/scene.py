"""Canonical-frame scene model: shared objects, pivot, occlusion queries.

Scene files are human-authored JSON. Lengths are meters, angles are degrees
in the file and radians everywhere in the API. Objects live in the shared
canonical frame; per-user replica rotation is applied elsewhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .geom import (
    Pivot,
    Vec3,
    centroid,
    ray_aabb_interval,
    ray_sphere_interval,
    rotate_y,
)

_ORIGIN_PIVOT = Pivot(Vec3(0.0, 0.0, 0.0))

BOX = "box"
SPHERE = "sphere"


class SceneError(ValueError):
    """Base class for scene-file problems."""


class ParseError(SceneError):
    """Document is not valid JSON."""


class ValidationError(SceneError):
    """Document parsed but violates the scene schema.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class DegenerateSegment(SceneError):
    """Occlusion query with coincident endpoints."""


@dataclass(frozen=True)
class SceneObject:
    """One shared object: an upright box or a sphere in the canonical frame."""

    id: str
    shape: str
    position: Vec3
    yaw_deg: float
    label: str
    dimensions: Vec3 | None = None  # full box extents
    radius: float | None = None

    @property
    def yaw(self) -> float:
        return math.radians(self.yaw_deg)

    def half_extents(self) -> Vec3:
        assert self.dimensions is not None
        return self.dimensions.scaled(0.5)


@dataclass(frozen=True)
class Scene:
    name: str
    objects: tuple[SceneObject, ...]
    table_center: Vec3 | None = None

    def object_by_id(self, object_id: str) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)


@dataclass(frozen=True)
class Pin:
    """User-placed annotation, stored in the canonical frame."""

    id: str
    owner_user: str
    canonical_position: Vec3
    color: int


class OcclusionResult(NamedTuple):
    occluded: bool
    blocker_id: str | None


_TOP_KEYS = {"name", "table_center", "objects"}
_OBJ_KEYS_BOX = {"id", "shape", "position", "yaw_deg", "dimensions", "label"}
_OBJ_KEYS_SPHERE = {"id", "shape", "position", "yaw_deg", "radius", "label"}


def _finite_triple(value, label: str, problems: list[str]) -> Vec3 | None:
    if (
        not isinstance(value, list)
        or len(value) != 3
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value)
    ):
        problems.append(f"{label} must be a list of 3 numbers")
        return None
    if not all(math.isfinite(float(c)) for c in value):
        problems.append(f"{label} components must be finite")
        return None
    return Vec3(float(value[0]), float(value[1]), float(value[2]))


def load_scene(document: str | bytes | dict) -> Scene:
    """Parse and validate a scene document.

    Raises ParseError for malformed JSON and ValidationError carrying every
    schema violation found.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"scene document is not valid JSON: {exc}") from exc
    else:
        doc = document

    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ValidationError(["scene document must be a JSON object"])

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        problems.append(f"unknown top-level fields: {sorted(unknown)}")
    missing = _TOP_KEYS - set(doc)
    if missing:
        problems.append(f"missing top-level fields: {sorted(missing)}")
        raise ValidationError(problems)

    name = doc["name"]
    if not isinstance(name, str) or not name:
        problems.append("name must be a non-empty string")
        name = ""

    table_center = None
    if doc["table_center"] is not None:
        table_center = _finite_triple(doc["table_center"], "table_center", problems)

    raw_objects = doc["objects"]
    objects: list[SceneObject] = []
    if not isinstance(raw_objects, list) or not raw_objects:
        problems.append("objects must be a non-empty list")
    else:
        seen: dict[str, int] = {}
        for i, raw in enumerate(raw_objects):
            obj = _load_object(raw, i, problems)
            if obj is None:
                continue
            if obj.id in seen:
                problems.append(
                    f"duplicate object id {obj.id!r} (objects[{seen[obj.id]}] and objects[{i}])"
                )
            else:
                seen[obj.id] = i
            objects.append(obj)

    if problems:
        raise ValidationError(problems)
    return Scene(name=name, objects=tuple(objects), table_center=table_center)


def _load_object(raw, index: int, problems: list[str]) -> SceneObject | None:
    label_prefix = f"objects[{index}]"
    if not isinstance(raw, dict):
        problems.append(f"{label_prefix} must be an object")
        return None
    shape = raw.get("shape")
    if shape not in (BOX, SPHERE):
        problems.append(f"{label_prefix}.shape must be 'box' or 'sphere'")
        return None
    allowed = _OBJ_KEYS_BOX if shape == BOX else _OBJ_KEYS_SPHERE
    unknown = set(raw) - allowed
    if unknown:
        problems.append(f"{label_prefix} has unknown fields: {sorted(unknown)}")
    missing = allowed - set(raw)
    if missing:
        problems.append(f"{label_prefix} missing fields: {sorted(missing)}")
        return None

    ok = True
    obj_id = raw["id"]
    if not isinstance(obj_id, str) or not obj_id:
        problems.append(f"{label_prefix}.id must be a non-empty string")
        ok = False
    label = raw["label"]
    if not isinstance(label, str):
        problems.append(f"{label_prefix}.label must be a string")
        ok = False
    position = _finite_triple(raw["position"], f"{label_prefix}.position", problems)
    yaw_deg = raw["yaw_deg"]
    if not isinstance(yaw_deg, (int, float)) or isinstance(yaw_deg, bool) or not math.isfinite(yaw_deg):
        problems.append(f"{label_prefix}.yaw_deg must be a finite number")
        ok = False

    dimensions = None
    radius = None
    if shape == BOX:
        dimensions = _finite_triple(raw["dimensions"], f"{label_prefix}.dimensions", problems)
        if dimensions is not None and not (
            dimensions.x > 0 and dimensions.y > 0 and dimensions.z > 0
        ):
            problems.append(f"{label_prefix}.dimensions must be positive")
            ok = False
    else:
        radius = raw["radius"]
        if (
            not isinstance(radius, (int, float))
            or isinstance(radius, bool)
            or not math.isfinite(radius)
            or not radius > 0
        ):
            problems.append(f"{label_prefix}.radius must be a positive finite number")
            ok = False
        else:
            radius = float(radius)

    if not ok or position is None or (shape == BOX and dimensions is None):
        return None
    return SceneObject(
        id=obj_id,
        shape=shape,
        position=position,
        yaw_deg=float(yaw_deg),
        label=label,
        dimensions=dimensions,
        radius=radius,
    )


def serialize_scene(scene: Scene) -> dict:
    """Scene back to its document form; load_scene(serialize_scene(s)) == s."""
    objects = []
    for obj in scene.objects:
        raw: dict = {
            "id": obj.id,
            "shape": obj.shape,
            "position": obj.position.as_list(),
            "yaw_deg": obj.yaw_deg,
            "label": obj.label,
        }
        if obj.shape == BOX:
            raw["dimensions"] = obj.dimensions.as_list()
        else:
            raw["radius"] = obj.radius
        objects.append(raw)
    return {
        "name": scene.name,
        "table_center": scene.table_center.as_list() if scene.table_center else None,
        "objects": objects,
    }


def pivot_of(scene: Scene) -> Pivot:
    """Rotation pivot: the table center when declared, else the object centroid."""
    if scene.table_center is not None:
        return Pivot(scene.table_center)
    return Pivot(centroid(obj.position for obj in scene.objects))


def _segment_interval(obj: SceneObject, origin: Vec3, direction: Vec3) -> tuple[float, float] | None:
    if obj.shape == SPHERE:
        return ray_sphere_interval(origin, direction, obj.position, obj.radius)
    # Transform the ray into the box's local axis-aligned frame.
    local_origin = rotate_y(origin - obj.position, _ORIGIN_PIVOT, -obj.yaw)
    local_dir = rotate_y(direction, _ORIGIN_PIVOT, -obj.yaw)
    half = obj.half_extents()
    return ray_aabb_interval(local_origin, local_dir, Vec3(0, 0, 0) - half, half)


def occluded(
    eye: Vec3,
    target: Vec3,
    scene: Scene,
    ignore_ids: Iterable[str] = (),
) -> OcclusionResult:
    """Does the open segment eye->target pass through any scene object?

    Endpoints are excluded so a target lying on a surface does not occlude
    itself; callers pass ignore_ids for the target's own object. Reports the
    blocker nearest to the eye.
    """
    length = eye.distance_to(target)
    if length <= 1e-9:
        raise DegenerateSegment("eye and target coincide")
    direction = (target - eye).scaled(1.0 / length)
    ignored = set(ignore_ids)

    best: tuple[float, str] | None = None
    for obj in scene.objects:
        if obj.id in ignored:
            continue
        interval = _segment_interval(obj, eye, direction)
        if interval is None:
            continue
        t_enter, t_exit = interval
        # non-empty intersection of [t_enter, t_exit] with the open (0, length)
        if t_exit > 0.0 and t_enter < length:
            key = max(t_enter, 0.0)
            if best is None or key < best[0]:
                best = (key, obj.id)
    if best is None:
        return OcclusionResult(False, None)
    return OcclusionResult(True, best[1])
