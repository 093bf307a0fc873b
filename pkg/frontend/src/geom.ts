// Minimal 3D math for the client: right-handed, +Y up, meters and radians,
// quaternions in [w, x, y, z] order, a pose's forward axis is local +Z.
// Replica rotation is always about the vertical axis through the pivot.

export type Vec3 = readonly [number, number, number];
export type Quat = readonly [number, number, number, number];

export interface Pose {
  p: Vec3;
  q: Quat;
}

export const IDENTITY_QUAT: Quat = [1, 0, 0, 0];
export const TWO_PI = 2 * Math.PI;

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function scale(v: Vec3, s: number): Vec3 {
  return [v[0] * s, v[1] * s, v[2] * s];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function norm(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

export function normalized(v: Vec3): Vec3 {
  const n = norm(v);
  if (n === 0) throw new Error("cannot normalize a zero vector");
  return [v[0] / n, v[1] / n, v[2] / n];
}

export function dist(a: Vec3, b: Vec3): number {
  return norm(sub(a, b));
}

/**
 * Wrap an angle into (-pi, pi], the exact half turn resolving positive.
 * Display and assertion grade; wire values are never re-derived from it.
 */
export function wrapAngle(theta: number): number {
  let r = theta % TWO_PI;
  if (r > Math.PI) r -= TWO_PI;
  else if (r <= -Math.PI) r += TWO_PI;
  return r;
}

/** Rotate a point by theta about the vertical axis through the pivot. */
export function rotateY(p: Vec3, pivot: Vec3, theta: number): Vec3 {
  if (theta === 0) return p; // exact identity, not just within rounding
  const c = Math.cos(theta);
  const s = Math.sin(theta);
  const dx = p[0] - pivot[0];
  const dz = p[2] - pivot[2];
  return [pivot[0] + dx * c + dz * s, p[1], pivot[2] - dx * s + dz * c];
}

/** Rotate a direction by theta about +Y (no pivot translation). */
export function rotateYDir(v: Vec3, theta: number): Vec3 {
  if (theta === 0) return v;
  const c = Math.cos(theta);
  const s = Math.sin(theta);
  return [v[0] * c + v[2] * s, v[1], -v[0] * s + v[2] * c];
}

export function yawQuat(theta: number): Quat {
  const half = 0.5 * theta;
  return [Math.cos(half), 0, Math.sin(half), 0];
}

export function pitchQuat(phi: number): Quat {
  const half = 0.5 * phi;
  return [Math.cos(half), Math.sin(half), 0, 0];
}

/** Hamilton product a * b (apply b first, then a). */
export function quatMultiply(a: Quat, b: Quat): Quat {
  const [w1, x1, y1, z1] = a;
  const [w2, x2, y2, z2] = b;
  return [
    w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
    w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
    w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
    w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
  ];
}

/** Rotate v by q (expanded sandwich product, no intermediate quats). */
export function quatRotate(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const tx = 2 * (y * v[2] - z * v[1]);
  const ty = 2 * (z * v[0] - x * v[2]);
  const tz = 2 * (x * v[1] - y * v[0]);
  return [
    v[0] + w * tx + (y * tz - z * ty),
    v[1] + w * ty + (z * tx - x * tz),
    v[2] + w * tz + (x * ty - y * tx),
  ];
}

/** World direction of a pose's local +Z axis (the look direction). */
export function forwardOf(pose: Pose): Vec3 {
  return quatRotate(pose.q, [0, 0, 1]);
}

/** Swing a whole pose about the pivot axis; the facing turns with it. */
export function rotatePoseY(pose: Pose, pivot: Vec3, theta: number): Pose {
  return {
    p: rotateY(pose.p, pivot, theta),
    q: quatMultiply(yawQuat(theta), pose.q),
  };
}

/**
 * Where a viewer renders another user's tracked pose: the owner's pose is
 * carried into the viewer's rotated replica by the difference of their
 * replica rotations.
 */
export function remotePose(pose: Pose, rhoViewer: number, rhoOwner: number, pivot: Vec3): Pose {
  return rotatePoseY(pose, pivot, rhoViewer - rhoOwner);
}

export function worldToCanonical(p: Vec3, rho: number, pivot: Vec3): Vec3 {
  return rotateY(p, pivot, -rho);
}

export function canonicalToWorld(p: Vec3, rho: number, pivot: Vec3): Vec3 {
  return rotateY(p, pivot, rho);
}

// ---------------------------------------------------------------------------
// Ray queries for the cursor: all return the smallest hit parameter t >= 0
// along a unit (or at least non-zero) direction, or null for a miss.

export function raySphere(origin: Vec3, dir: Vec3, center: Vec3, radius: number): number | null {
  const oc = sub(origin, center);
  const a = dot(dir, dir);
  const b = 2 * dot(oc, dir);
  const c = dot(oc, oc) - radius * radius;
  const disc = b * b - 4 * a * c;
  if (disc < 0) return null;
  const root = Math.sqrt(disc);
  const t0 = (-b - root) / (2 * a);
  if (t0 >= 0) return t0;
  const t1 = (-b + root) / (2 * a);
  return t1 >= 0 ? t1 : null;
}

/** Axis-aligned slab test against a box spanning center +- half. */
function rayAabb(origin: Vec3, dir: Vec3, center: Vec3, half: Vec3): number | null {
  let tNear = -Infinity;
  let tFar = Infinity;
  for (let i = 0; i < 3; i++) {
    const lo = center[i] - half[i];
    const hi = center[i] + half[i];
    if (dir[i] === 0) {
      if (origin[i] < lo || origin[i] > hi) return null;
      continue;
    }
    let t0 = (lo - origin[i]) / dir[i];
    let t1 = (hi - origin[i]) / dir[i];
    if (t0 > t1) [t0, t1] = [t1, t0];
    if (t0 > tNear) tNear = t0;
    if (t1 < tFar) tFar = t1;
    if (tNear > tFar) return null;
  }
  if (tFar < 0) return null;
  return tNear >= 0 ? tNear : tFar;
}

/** Box with its own yaw about its center: undo the yaw, then slab test. */
export function rayBox(
  origin: Vec3,
  dir: Vec3,
  center: Vec3,
  half: Vec3,
  yaw: number,
): number | null {
  const o = rotateY(origin, center, -yaw);
  const d = rotateYDir(dir, -yaw);
  return rayAabb(o, d, center, half);
}

/** Horizontal plane at the given height. */
export function rayPlaneY(origin: Vec3, dir: Vec3, y: number): number | null {
  if (dir[1] === 0) return null;
  const t = (y - origin[1]) / dir[1];
  return t >= 0 ? t : null;
}

export function pointAt(origin: Vec3, dir: Vec3, t: number): Vec3 {
  return add(origin, scale(dir, t));
}
