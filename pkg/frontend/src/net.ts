// Connection state machine around one websocket: hello on open, welcome
// seeds the replica, then decoded frames fold in as they arrive. Works
// against both the browser WebSocket and the node ws package, which share
// the onopen/onmessage surface.
//
// Clocks: frame interpolation needs client time on the server's epoch.
// The welcome snapshot carries the server session clock, so the offset is
// estimated there (one-way latency uncorrected); authoritative rho echoes
// and the exact align_completed endpoint absorb the residual.

import { DecodeError, encode, type Message } from "./protocol.js";
import { Replica } from "./replica.js";
import type { Pose, Vec3 } from "./geom.js";

export interface SocketLike {
  send(data: string): void;
  close(code?: number, reason?: string): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onclose: ((ev?: { code?: number; reason?: string }) => void) | null;
  readyState: number;
}

const SOCKET_OPEN = 1;

export type ClientStatus = "connecting" | "joining" | "live" | "closed" | "failed";

export interface Banner {
  code: string;
  detail: string;
}

export interface Toast {
  text: string;
  at: number; // local seconds, for expiry
}

export interface ClientHandlers {
  /** Raw inbound frame text, before decoding. */
  onFrame?: (text: string) => void;
  /** Every successfully folded message. */
  onMessage?: (msg: Message) => void;
  onStatus?: (status: ClientStatus) => void;
}

function frameText(data: unknown): string {
  if (typeof data === "string") return data;
  if (data instanceof ArrayBuffer) return new TextDecoder().decode(data);
  if (ArrayBuffer.isView(data)) {
    return new TextDecoder().decode(
      new Uint8Array(data.buffer, data.byteOffset, data.byteLength),
    );
  }
  throw new DecodeError("unsupported socket payload");
}

export class Client {
  readonly replica = new Replica();
  status: ClientStatus = "connecting";
  banner: Banner | null = null; // sticky connection and protocol failures
  toasts: Toast[] = []; // transient server-reported errors
  seq = 0;

  /** Local-to-server clock offset, set once welcome arrives. */
  private epochOffset = 0;
  private readonly socket: SocketLike;
  private readonly name: string;
  private readonly localClock: () => number;
  private readonly handlers: ClientHandlers;

  constructor(
    socket: SocketLike,
    name: string,
    localClock: () => number,
    handlers: ClientHandlers = {},
  ) {
    this.socket = socket;
    this.name = name;
    this.localClock = localClock;
    this.handlers = handlers;
    socket.onopen = () => {
      this.sendRaw("hello", { name: this.name });
      this.setStatus("joining");
    };
    socket.onmessage = (ev) => this.onFrame(ev.data);
    socket.onerror = () => {
      if (this.status !== "live") {
        this.fail("connect_failed", "could not reach the server");
      }
    };
    socket.onclose = (ev) => {
      if (this.status === "failed") return;
      if (this.status !== "live") {
        this.fail("closed_early", `connection closed before welcome${reasonOf(ev)}`);
      } else {
        this.setStatus("closed");
      }
    };
  }

  /** Client time mapped onto the server session clock. */
  serverNow(): number {
    return this.localClock() + this.epochOffset;
  }

  sendPose(head: Pose, leftHand: Pose, rightHand: Pose): void {
    if (this.status !== "live") return;
    this.seq += 1;
    this.sendRaw("pose", {
      head: poseDoc(head),
      lh: poseDoc(leftHand),
      rh: poseDoc(rightHand),
      seq: this.seq,
    });
  }

  requestAlign(rayOrigin: Vec3, rayDir: Vec3): void {
    this.sendRaw("align_request", { ray_origin: [...rayOrigin], ray_dir: [...rayDir] });
  }

  placePin(world: Vec3): void {
    this.sendRaw("pin_place", { world: [...world] });
  }

  leave(): void {
    if (this.socket.readyState === SOCKET_OPEN) this.sendRaw("leave", {});
    this.socket.close();
  }

  /** Drop expired toasts; call once per frame. */
  pruneToasts(ttl = 4): void {
    const now = this.localClock();
    this.toasts = this.toasts.filter((t) => now - t.at < ttl);
  }

  private onFrame(data: unknown): void {
    let text: string;
    try {
      text = frameText(data);
    } catch (err) {
      this.fail("bad_frame", (err as Error).message);
      this.socket.close();
      return;
    }
    this.handlers.onFrame?.(text);
    let msg: Message;
    try {
      msg = this.replica.applyFrame(text, this.serverNow());
    } catch (err) {
      if (err instanceof DecodeError) {
        // a peer speaking another version or schema is unrecoverable
        this.fail(err.constructor.name, err.message);
        this.socket.close();
        return;
      }
      throw err;
    }
    if (msg.type === "welcome") {
      this.epochOffset = (msg.payload.snapshot as { clock: number }).clock - this.localClock();
      this.setStatus("live");
    } else if (msg.type === "error") {
      const p = msg.payload as { code: string; detail: string };
      this.toasts.push({ text: `${p.code}: ${p.detail}`, at: this.localClock() });
    }
    this.handlers.onMessage?.(msg);
  }

  private fail(code: string, detail: string): void {
    this.banner = { code, detail };
    this.setStatus("failed");
  }

  private setStatus(status: ClientStatus): void {
    this.status = status;
    this.handlers.onStatus?.(status);
  }

  private sendRaw(type: string, payload: Record<string, unknown>): void {
    if (this.socket.readyState !== SOCKET_OPEN) return;
    this.socket.send(encode(type, payload));
  }
}

function poseDoc(pose: Pose): { p: number[]; q: number[] } {
  return { p: [...pose.p], q: [...pose.q] };
}

function reasonOf(ev?: { code?: number; reason?: string }): string {
  if (!ev || (!ev.code && !ev.reason)) return "";
  return ev.reason ? ` (${ev.code}: ${ev.reason})` : ` (code ${ev.code})`;
}
