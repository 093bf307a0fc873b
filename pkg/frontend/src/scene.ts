// Scene documents as they arrive inside the welcome snapshot: a named set
// of boxes and spheres around a table center, which is also the pivot the
// replica rotation turns about.

import type { Vec3 } from "./geom.js";

export class SceneFormatError extends Error {}

export interface SceneObject {
  id: string;
  shape: "box" | "sphere";
  position: Vec3;
  yawDeg: number;
  label: string;
  dimensions: Vec3 | null; // full box extents
  radius: number | null;
}

export interface Scene {
  name: string;
  tableCenter: Vec3;
  objects: SceneObject[];
}

export function yawOf(obj: SceneObject): number {
  return (obj.yawDeg * Math.PI) / 180;
}

export function halfExtents(obj: SceneObject): Vec3 {
  const d = obj.dimensions;
  if (d === null) throw new SceneFormatError(`object ${obj.id} has no box extents`);
  return [d[0] / 2, d[1] / 2, d[2] / 2];
}

function triple(value: unknown, label: string): Vec3 {
  if (!Array.isArray(value) || value.length !== 3 || value.some((c) => typeof c !== "number")) {
    throw new SceneFormatError(`${label} must be an array of 3 numbers`);
  }
  return [value[0], value[1], value[2]];
}

function str(value: unknown, label: string): string {
  if (typeof value !== "string") throw new SceneFormatError(`${label} must be a string`);
  return value;
}

/**
 * Read a scene out of the snapshot. The server already validated it, so
 * this only guards against a structurally different peer, not bad content.
 */
export function parseScene(doc: unknown): Scene {
  if (doc === null || typeof doc !== "object") {
    throw new SceneFormatError("scene must be an object");
  }
  const d = doc as Record<string, unknown>;
  if (!Array.isArray(d.objects)) throw new SceneFormatError("scene.objects must be an array");
  const objects = d.objects.map((raw, i) => parseObject(raw, `scene.objects[${i}]`));
  return {
    name: str(d.name, "scene.name"),
    tableCenter: triple(d.table_center, "scene.table_center"),
    objects,
  };
}

function parseObject(raw: unknown, label: string): SceneObject {
  if (raw === null || typeof raw !== "object") {
    throw new SceneFormatError(`${label} must be an object`);
  }
  const o = raw as Record<string, unknown>;
  const shape = o.shape;
  if (shape !== "box" && shape !== "sphere") {
    throw new SceneFormatError(`${label}.shape must be 'box' or 'sphere'`);
  }
  if (typeof o.yaw_deg !== "number") {
    throw new SceneFormatError(`${label}.yaw_deg must be a number`);
  }
  return {
    id: str(o.id, `${label}.id`),
    shape,
    position: triple(o.position, `${label}.position`),
    yawDeg: o.yaw_deg,
    label: str(o.label, `${label}.label`),
    dimensions: shape === "box" ? triple(o.dimensions, `${label}.dimensions`) : null,
    radius: shape === "sphere" ? (o.radius as number) : null,
  };
}
