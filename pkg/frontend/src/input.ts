// Desktop stand-in for tracked devices: WASD slides the head on the
// horizontal plane, arrows or a mouse drag turn it, and the mouse cursor
// doubles as the pointing hand. A press that barely moves is a click; a
// press that travels is a view drag.

import { yawQuat, pitchQuat, quatMultiply, type Pose, type Vec3 } from "./geom.js";

const EYE_HEIGHT = 1.6;
const WALK_SPEED = 1.2; // m/s
const TURN_SPEED = (90 * Math.PI) / 180; // rad/s
const DRAG_SENSITIVITY = 0.005; // rad/px
const PITCH_LIMIT = 1.2;
const CLICK_SLOP_PX = 5;

export interface ClickEvent {
  x: number;
  y: number;
}

export class InputState {
  yaw = Math.PI; // spawn facing the table from +Z
  pitch = 0;
  x = 0;
  z = 2.0;
  cursor: { x: number; y: number } | null = null;

  private keys = new Set<string>();
  private drag: { x: number; y: number; moved: boolean } | null = null;
  private clicks: ClickEvent[] = [];

  attach(canvas: HTMLCanvasElement): void {
    window.addEventListener("keydown", (ev) => {
      if (!ev.repeat) this.keys.add(ev.code);
    });
    window.addEventListener("keyup", (ev) => this.keys.delete(ev.code));
    window.addEventListener("blur", () => this.keys.clear());
    canvas.addEventListener("pointerdown", (ev) => {
      this.drag = { x: ev.offsetX, y: ev.offsetY, moved: false };
      canvas.setPointerCapture(ev.pointerId);
    });
    canvas.addEventListener("pointermove", (ev) => {
      this.cursor = { x: ev.offsetX, y: ev.offsetY };
      if (!this.drag) return;
      const dx = ev.offsetX - this.drag.x;
      const dy = ev.offsetY - this.drag.y;
      if (this.drag.moved || Math.hypot(dx, dy) > CLICK_SLOP_PX) {
        this.drag.moved = true;
        this.yaw -= dx * DRAG_SENSITIVITY;
        this.pitch = clamp(this.pitch + dy * DRAG_SENSITIVITY, -PITCH_LIMIT, PITCH_LIMIT);
        this.drag.x = ev.offsetX;
        this.drag.y = ev.offsetY;
      }
    });
    canvas.addEventListener("pointerup", (ev) => {
      if (this.drag && !this.drag.moved) this.clicks.push({ x: ev.offsetX, y: ev.offsetY });
      this.drag = null;
    });
    canvas.addEventListener("pointerleave", () => {
      this.cursor = null;
      this.drag = null;
    });
  }

  /** Integrate held keys over one frame. */
  step(dt: number): void {
    const fwd: Vec3 = [Math.sin(this.yaw), 0, Math.cos(this.yaw)];
    const right: Vec3 = [-Math.cos(this.yaw), 0, Math.sin(this.yaw)];
    let vx = 0;
    let vz = 0;
    if (this.keys.has("KeyW") || this.keys.has("ArrowUp")) {
      vx += fwd[0];
      vz += fwd[2];
    }
    if (this.keys.has("KeyS") || this.keys.has("ArrowDown")) {
      vx -= fwd[0];
      vz -= fwd[2];
    }
    if (this.keys.has("KeyD")) {
      vx += right[0];
      vz += right[2];
    }
    if (this.keys.has("KeyA")) {
      vx -= right[0];
      vz -= right[2];
    }
    const n = Math.hypot(vx, vz);
    if (n > 0) {
      this.x += (vx / n) * WALK_SPEED * dt;
      this.z += (vz / n) * WALK_SPEED * dt;
    }
    if (this.keys.has("ArrowLeft") || this.keys.has("KeyQ")) this.yaw += TURN_SPEED * dt;
    if (this.keys.has("ArrowRight") || this.keys.has("KeyE")) this.yaw -= TURN_SPEED * dt;
  }

  headPose(): Pose {
    return {
      p: [this.x, EYE_HEIGHT, this.z],
      q: quatMultiply(yawQuat(this.yaw), pitchQuat(this.pitch)),
    };
  }

  /** Clicks gathered since the last call. */
  takeClicks(): ClickEvent[] {
    const out = this.clicks;
    this.clicks = [];
    return out;
  }
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}
