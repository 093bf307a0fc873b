// Canvas 2D painter over a pinhole projection. No GPU dependencies: boxes
// become depth-sorted filled faces, heads become billboarded discs, hands
// become oriented darts. Good enough to judge whether two people are
// looking at and pointing at the same thing, which is all this view is for.

import {
  add,
  cross,
  dot,
  forwardOf,
  normalized,
  rotateY,
  scale,
  sub,
  type Pose,
  type Quat,
  type Vec3,
} from "./geom.js";
import { quatRotate } from "./geom.js";
import { halfExtents, yawOf, type Scene, type SceneObject } from "./scene.js";
import type { RemoteAvatar, RenderPin, ViewFrame } from "./replica.js";

const NEAR = 0.05;
const FOV_Y = (70 * Math.PI) / 180;
const HEAD_RADIUS = 0.12;
const LIGHT = normalized([0.4, 1, 0.25]);

export interface Camera {
  p: Vec3;
  q: Quat;
}

interface Basis {
  right: Vec3;
  up: Vec3;
  fwd: Vec3;
  f: number; // focal length in px
  cx: number;
  cy: number;
}

function basisOf(cam: Camera, w: number, h: number): Basis {
  const fwd = quatRotate(cam.q, [0, 0, 1]);
  const right = normalized(cross(fwd, [0, 1, 0]));
  const up = cross(right, fwd);
  return { right, up, fwd, f: h / 2 / Math.tan(FOV_Y / 2), cx: w / 2, cy: h / 2 };
}

interface Projected {
  x: number;
  y: number;
  z: number; // camera depth
}

function project(p: Vec3, cam: Camera, b: Basis): Projected | null {
  const v = sub(p, cam.p);
  const z = dot(v, b.fwd);
  if (z < NEAR) return null;
  return { x: b.cx + (b.f * dot(v, b.right)) / z, y: b.cy - (b.f * dot(v, b.up)) / z, z };
}

/** Pinhole projection of a world point; null when behind the near plane. */
export function projectPoint(
  p: Vec3,
  cam: Camera,
  w: number,
  h: number,
): Projected | null {
  return project(p, cam, basisOf(cam, w, h));
}

/** World-space ray through a canvas pixel. */
export function pixelRay(
  cam: Camera,
  w: number,
  h: number,
  px: number,
  py: number,
): { origin: Vec3; dir: Vec3 } {
  const b = basisOf(cam, w, h);
  const dir = normalized(
    add(add(b.fwd, scale(b.right, (px - b.cx) / b.f)), scale(b.up, (b.cy - py) / b.f)),
  );
  return { origin: cam.p, dir };
}

type Prim = { z: number; draw: (ctx: CanvasRenderingContext2D) => void };

const BOX_FACES: [number, number, number, number][] = [
  [0, 1, 3, 2], // -x
  [4, 6, 7, 5], // +x
  [0, 4, 5, 1], // -y
  [2, 3, 7, 6], // +y
  [0, 2, 6, 4], // -z
  [1, 5, 7, 3], // +z
];
const FACE_NORMALS: Vec3[] = [
  [-1, 0, 0],
  [1, 0, 0],
  [0, -1, 0],
  [0, 1, 0],
  [0, 0, -1],
  [0, 0, 1],
];

function boxCorners(center: Vec3, half: Vec3, yaw: number): Vec3[] {
  const out: Vec3[] = [];
  for (const sx of [-1, 1]) {
    for (const sy of [-1, 1]) {
      for (const sz of [-1, 1]) {
        const local: Vec3 = [center[0] + sx * half[0], center[1] + sy * half[1], center[2] + sz * half[2]];
        out.push(rotateY(local, center, yaw));
      }
    }
  }
  return out; // index bit order: x<<2 | y<<1 | z
}

function shade(base: [number, number, number], normal: Vec3, yaw: number): string {
  const n = rotateY(normal, [0, 0, 0], yaw);
  const lambert = 0.55 + 0.45 * Math.max(0, dot(n, LIGHT));
  return `rgb(${Math.round(base[0] * lambert)},${Math.round(base[1] * lambert)},${Math.round(
    base[2] * lambert,
  )})`;
}

export class Renderer {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("no 2d canvas context");
    this.ctx = ctx;
  }

  draw(
    cam: Camera,
    scene: Scene,
    view: ViewFrame,
    palette: string[],
    hand: Vec3 | null,
    cursor: { x: number; y: number } | null,
  ): void {
    const { canvas, ctx } = this;
    const w = canvas.width;
    const h = canvas.height;
    const b = basisOf(cam, w, h);
    ctx.fillStyle = "#10141c";
    ctx.fillRect(0, 0, w, h);
    this.drawGrid(cam, b);

    const prims: Prim[] = [];
    // objects arrive already turned by the viewer's replica rotation
    view.objects.forEach((obj, i) => {
      const spec = scene.objects[i];
      if (spec.shape === "box") {
        this.boxPrims(spec, obj.position, obj.yaw, cam, b, prims);
      } else {
        this.spherePrims(spec, obj.position, cam, b, prims);
      }
    });
    for (const pin of view.pins) this.pinPrims(pin, palette, cam, b, prims);
    for (const avatar of view.remotes) this.avatarPrims(avatar, palette, cam, b, prims);

    prims.sort((p, q) => q.z - p.z);
    for (const prim of prims) prim.draw(ctx);

    if (hand) this.drawOwnHand(hand, cam, b);
    if (cursor) this.drawCrosshair(cursor.x, cursor.y);
  }

  private drawGrid(cam: Camera, b: Basis): void {
    const { ctx } = this;
    ctx.strokeStyle = "rgba(120,140,170,0.18)";
    ctx.lineWidth = 1;
    for (let i = -6; i <= 6; i++) {
      this.line([i * 0.5, 0, -3], [i * 0.5, 0, 3], cam, b);
      this.line([-3, 0, i * 0.5], [3, 0, i * 0.5], cam, b);
    }
  }

  private line(a: Vec3, c: Vec3, cam: Camera, b: Basis): void {
    const pa = project(a, cam, b);
    const pc = project(c, cam, b);
    if (!pa || !pc) return;
    this.ctx.beginPath();
    this.ctx.moveTo(pa.x, pa.y);
    this.ctx.lineTo(pc.x, pc.y);
    this.ctx.stroke();
  }

  private boxPrims(
    spec: SceneObject,
    position: Vec3,
    yaw: number,
    cam: Camera,
    b: Basis,
    prims: Prim[],
  ): void {
    const corners = boxCorners(position, halfExtents(spec), yaw);
    const projected = corners.map((c) => project(c, cam, b));
    BOX_FACES.forEach((face, fi) => {
      const pts = face.map((i) => projected[i]);
      if (pts.some((p) => p === null)) return;
      const quad = pts as Projected[];
      const z = (quad[0].z + quad[1].z + quad[2].z + quad[3].z) / 4;
      const fill = shade([188, 172, 146], FACE_NORMALS[fi], yaw);
      prims.push({
        z,
        draw: (ctx) => {
          ctx.beginPath();
          ctx.moveTo(quad[0].x, quad[0].y);
          for (let i = 1; i < 4; i++) ctx.lineTo(quad[i].x, quad[i].y);
          ctx.closePath();
          ctx.fillStyle = fill;
          ctx.fill();
          ctx.strokeStyle = "rgba(20,22,28,0.5)";
          ctx.lineWidth = 1;
          ctx.stroke();
        },
      });
    });
  }

  private spherePrims(
    spec: SceneObject,
    position: Vec3,
    cam: Camera,
    b: Basis,
    prims: Prim[],
  ): void {
    const p = project(position, cam, b);
    if (!p || spec.radius === null) return;
    const r = (b.f * spec.radius) / p.z;
    prims.push({
      z: p.z,
      draw: (ctx) => {
        ctx.beginPath();
        ctx.arc(p.x, p.y, r, 0, 2 * Math.PI);
        ctx.fillStyle = shade([188, 172, 146], [0, 1, 0], 0);
        ctx.fill();
        ctx.strokeStyle = "rgba(20,22,28,0.5)";
        ctx.stroke();
      },
    });
  }

  private pinPrims(pin: RenderPin, palette: string[], cam: Camera, b: Basis, prims: Prim[]): void {
    const base = project(pin.position, cam, b);
    const tip = project(add(pin.position, [0, 0.14, 0]), cam, b);
    if (!base || !tip) return;
    const color = palette[pin.color % palette.length] ?? "white";
    prims.push({
      z: base.z,
      draw: (ctx) => {
        ctx.strokeStyle = color;
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.moveTo(base.x, base.y);
        ctx.lineTo(tip.x, tip.y);
        ctx.stroke();
        ctx.beginPath();
        ctx.arc(tip.x, tip.y, Math.max(2.5, 36 / base.z), 0, 2 * Math.PI);
        ctx.fillStyle = color;
        ctx.fill();
      },
    });
  }

  private avatarPrims(
    avatar: RemoteAvatar,
    palette: string[],
    cam: Camera,
    b: Basis,
    prims: Prim[],
  ): void {
    const color = palette[avatar.color % palette.length] ?? "white";
    const head = project(avatar.head.p, cam, b);
    if (head) {
      const r = (b.f * HEAD_RADIUS) / head.z;
      const gazeTip = project(add(avatar.head.p, scale(forwardOf(avatar.head), 0.35)), cam, b);
      prims.push({
        z: head.z,
        draw: (ctx) => {
          ctx.beginPath();
          ctx.arc(head.x, head.y, r, 0, 2 * Math.PI);
          ctx.fillStyle = color;
          ctx.fill();
          ctx.strokeStyle = "rgba(16,20,28,0.7)";
          ctx.lineWidth = 2;
          ctx.stroke();
          if (gazeTip) {
            ctx.beginPath();
            ctx.moveTo(head.x, head.y);
            ctx.lineTo(gazeTip.x, gazeTip.y);
            ctx.strokeStyle = color;
            ctx.lineWidth = 2;
            ctx.stroke();
          }
          ctx.fillStyle = "rgba(235,240,248,0.92)";
          ctx.font = "12px system-ui, sans-serif";
          ctx.textAlign = "center";
          ctx.fillText(avatar.displayName, head.x, head.y - r - 6);
        },
      });
    }
    this.handPrim(avatar.leftHand, color, cam, b, prims);
    this.handPrim(avatar.rightHand, color, cam, b, prims);
  }

  private handPrim(hand: Pose, color: string, cam: Camera, b: Basis, prims: Prim[]): void {
    const tipWorld = add(hand.p, scale(forwardOf(hand), 0.09));
    const p = project(hand.p, cam, b);
    const tip = project(tipWorld, cam, b);
    if (!p || !tip) return;
    prims.push({
      z: p.z,
      draw: (ctx) => {
        const ang = Math.atan2(tip.y - p.y, tip.x - p.x);
        const r = Math.max(3, 30 / p.z);
        ctx.beginPath();
        ctx.moveTo(tip.x, tip.y);
        ctx.lineTo(p.x + r * Math.cos(ang + 2.5), p.y + r * Math.sin(ang + 2.5));
        ctx.lineTo(p.x + r * Math.cos(ang - 2.5), p.y + r * Math.sin(ang - 2.5));
        ctx.closePath();
        ctx.fillStyle = color;
        ctx.fill();
      },
    });
  }

  private drawOwnHand(hand: Vec3, cam: Camera, b: Basis): void {
    const p = project(hand, cam, b);
    if (!p) return;
    const { ctx } = this;
    ctx.beginPath();
    ctx.arc(p.x, p.y, Math.max(3, 24 / p.z), 0, 2 * Math.PI);
    ctx.strokeStyle = "rgba(240,245,255,0.9)";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(p.x, p.y, 1.5, 0, 2 * Math.PI);
    ctx.fillStyle = "rgba(240,245,255,0.9)";
    ctx.fill();
  }

  private drawCrosshair(x: number, y: number): void {
    const { ctx } = this;
    ctx.strokeStyle = "rgba(200,210,225,0.5)";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(x - 6, y);
    ctx.lineTo(x + 6, y);
    ctx.moveTo(x, y - 6);
    ctx.lineTo(x, y + 6);
    ctx.stroke();
  }
}
