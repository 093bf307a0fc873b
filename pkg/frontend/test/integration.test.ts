// Two real clients against the real session server, over real sockets.
// Walks the four stages of a shared-reference handoff: both users point at
// the same feature from different bearings, the follower triggers
// alignment on the leader's cap, the replica sweeps in progress, and the
// leader's hand ends up hovering the same feature in the follower's
// rotated copy. Everything the manual two-tab checklist eyeballs is
// asserted here at the protocol level.

import { spawn, type ChildProcess } from "node:child_process";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import {
  dist,
  normalized,
  sub,
  worldToCanonical,
  yawQuat,
  type Pose,
  type Vec3,
} from "../src/geom.js";
import { Client, type SocketLike } from "../src/net.js";
import type { Message } from "../src/protocol.js";
import { repoRoot } from "./paths.js";

const DEG = Math.PI / 180;
const SCENE = join(repoRoot, "fixtures", "scenes", "terrain_demo.json");
const PIVOT: Vec3 = [0, 0.9, 0];
// top of the tower_a box: position [0.3, 1.05, 0.2], extents [0.08, 0.2, 0.08]
const FEATURE: Vec3 = [0.3, 1.15, 0.2];

const nowSeconds = () => performance.now() / 1000;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function pollUntil(check: () => boolean, what: string, timeoutMs = 8000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (check()) return;
    await sleep(10);
  }
  throw new Error(`timed out waiting for ${what}`);
}

function headAt(position: Vec3, lookAt: Vec3): Pose {
  const d = sub(lookAt, position);
  return { p: position, q: yawQuat(Math.atan2(d[0], d[2])) };
}

interface Harness {
  client: Client;
  frames: string[]; // raw inbound text
  messages: Message[];
  lastRho: Map<string, number>; // latest authoritative echo per user
  stopPoses: () => void;
  head: Pose;
  hand: Pose;
}

function connectClient(port: number, name: string, head: Pose, hand: Pose): Promise<Harness> {
  const socket = new WebSocket(`ws://127.0.0.1:${port}`) as unknown as SocketLike;
  const frames: string[] = [];
  const messages: Message[] = [];
  const lastRho = new Map<string, number>();
  const h: Harness = {
    client: undefined as unknown as Client,
    frames,
    messages,
    lastRho,
    stopPoses: () => {},
    head,
    hand,
  };
  h.client = new Client(socket, name, nowSeconds, {
    onFrame: (text) => frames.push(text),
    onMessage: (msg) => {
      messages.push(msg);
      if (msg.type === "pose_update") {
        lastRho.set(msg.payload.id as string, msg.payload.rho as number);
      }
    },
  });
  // stream poses at the fan-out rate for as long as the harness lives
  const timer = setInterval(() => {
    h.client.replica.advance(h.client.serverNow());
    h.client.sendPose(h.head, h.hand, h.hand);
  }, 50);
  h.stopPoses = () => clearInterval(timer);
  return pollUntil(() => h.client.status === "live" || h.client.status === "failed", "welcome").then(
    () => {
      if (h.client.status !== "live") {
        throw new Error(`join failed: ${JSON.stringify(h.client.banner)}`);
      }
      return h;
    },
  );
}

function framesOf(h: Harness, type: string): Message[] {
  return h.messages.filter((m) => m.type === type);
}

let server: ChildProcess;
let serverExit: Promise<number | null>;
let port: number;
let ada: Harness;
let grace: Harness;

beforeAll(async () => {
  port = 21000 + Math.floor(Math.random() * 20000);
  server = spawn("covista", ["server", "--port", String(port), "--scene", SCENE], {
    cwd: repoRoot,
    env: { ...process.env, LOG_LEVEL: "error" },
    stdio: ["ignore", "pipe", "pipe"],
  });
  server.stderr!.on("data", () => {});
  serverExit = new Promise((resolve) => server.on("exit", (code) => resolve(code)));
});

afterAll(async () => {
  ada?.stopPoses();
  grace?.stopPoses();
  if (server && server.exitCode === null) {
    server.kill("SIGINT");
    await serverExit;
  }
});

describe("two clients, one session", () => {
  it("boots the server", async () => {
    // knock until the listener accepts
    await new Promise<void>((resolve, reject) => {
      const deadline = Date.now() + 15000;
      const knock = () => {
        const probe = new WebSocket(`ws://127.0.0.1:${port}`);
        probe.on("open", () => {
          probe.close();
          resolve();
        });
        probe.on("error", () => {
          if (Date.now() > deadline) reject(new Error("server never came up"));
          else setTimeout(knock, 100);
        });
      };
      knock();
    });
  });

  it("joins the leader, then the follower, and each sees the other", async () => {
    // ada faces the table from bearing 0, grace from bearing 100
    const adaHead = headAt([0, 1.6, 1.5], PIVOT);
    const graceHead = headAt([1.5 * Math.sin(100 * DEG), 1.6, 1.5 * Math.cos(100 * DEG)], PIVOT);
    const pointing: Pose = { p: FEATURE, q: yawQuat(0) };
    ada = await connectClient(port, "ada", adaHead, pointing);
    grace = await connectClient(port, "grace", graceHead, pointing);

    expect(ada.client.replica.userId).toBe("u1");
    expect(grace.client.replica.userId).toBe("u2");
    // the second tab's welcome already lists the first occupant
    expect([...grace.client.replica.users.keys()].sort()).toEqual(["u1", "u2"]);
    // and the first tab hears about the newcomer without asking
    await pollUntil(() => ada.client.replica.users.has("u2"), "user_joined at ada");
    expect(ada.client.replica.users.get("u2")!.displayName).toBe("grace");
  });

  it("shows the newcomer's cap within one fan-out interval", async () => {
    const graceHeadP = grace.head.p;
    const t0 = Date.now();
    await pollUntil(() => {
      const st = ada.client.replica.users.get("u2");
      return st !== undefined && dist(st.head.p, graceHeadP) < 1e-9;
    }, "grace's first pose at ada");
    // one 20 Hz fan-out interval is 50 ms; allow transport slop
    expect(Date.now() - t0).toBeLessThan(500);
  });

  it("stage 1, point: both users indicate the same feature", async () => {
    await pollUntil(() => {
      const a = grace.client.replica.users.get("u1");
      return a !== undefined && dist(a.rightHand.p, FEATURE) < 1e-9;
    }, "ada's hand at grace");
    // both replicas are un-rotated, so world position is canonical position
    expect(grace.client.replica.rhoOf("u1")).toBe(0);
    expect(grace.client.replica.rhoOf("u2")).toBe(0);
  });

  it("stage 2, trigger: pointing at the leader's cap starts the sweep", async () => {
    const origin = grace.head.p;
    const dir = normalized(sub(ada.head.p, origin));
    grace.client.requestAlign(origin, dir);
    await pollUntil(
      () => framesOf(grace, "align_started").length > 0 && framesOf(ada, "align_started").length > 0,
      "align_started on both clients",
    );
    const fromGrace = grace.frames.find((t) => t.includes('"type":"align_started"'));
    const fromAda = ada.frames.find((t) => t.includes('"type":"align_started"'));
    expect(fromGrace).toBeDefined();
    // both tabs receive the identical broadcast, byte for byte
    expect(fromGrace).toBe(fromAda);
    const started = framesOf(grace, "align_started")[0].payload;
    expect(started.follower).toBe("u2");
    expect(started.leader).toBe("u1");
    expect(started.rho_start).toBe(0);
    // bearings were laid out 100 degrees apart
    expect(Math.abs((started.delta as number) - 100 * DEG)).toBeLessThan(1e-6);
    expect(started.duration).toBeCloseTo((100 * DEG) / (Math.PI / 2), 6);
  });

  it("stage 3, in progress: the replica rotation sweeps between endpoints", async () => {
    const started = framesOf(grace, "align_started")[0].payload;
    const t0 = started.t0 as number;
    const duration = started.duration as number;
    const delta = started.delta as number;
    // sample strictly inside the sweep window
    await pollUntil(() => {
      const now = grace.client.serverNow();
      return now > t0 + 0.25 * duration && now < t0 + 0.75 * duration;
    }, "mid-sweep instant", 5000);
    grace.client.replica.advance(grace.client.serverNow());
    const mid = grace.client.replica.rhoOf("u2");
    expect(mid).toBeGreaterThan(0.1 * delta);
    expect(mid).toBeLessThan(0.9 * delta);
  });

  it("stage 4, aligned: the exact endpoint lands and hands hover the same feature", async () => {
    await pollUntil(
      () =>
        framesOf(grace, "align_completed").length > 0 &&
        framesOf(ada, "align_completed").length > 0,
      "align_completed on both clients",
    );
    const done = framesOf(grace, "align_completed")[0].payload;
    expect(done.follower).toBe("u2");
    const rhoWire = done.rho as number;
    grace.client.replica.advance(grace.client.serverNow());
    // the completion frame pins the replica to the wire value exactly
    expect(Object.is(grace.client.replica.rhoOf("u2"), rhoWire)).toBe(true);
    expect(Object.is(ada.client.replica.rhoOf("u2"), rhoWire)).toBe(true);

    // ada keeps indicating the feature; in grace's rotated copy the
    // decoupled hand must recover the same canonical point
    const view = grace.client.replica.render();
    const shownHand = view.remotes.find((r) => r.userId === "u1")!.rightHand.p;
    const recovered = worldToCanonical(shownHand, grace.client.replica.rhoOf("u2"), PIVOT);
    expect(dist(recovered, FEATURE)).toBeLessThan(1e-9);
    // while the cap stays at ada's true pose
    const shownHead = view.remotes.find((r) => r.userId === "u1")!.head.p;
    expect(dist(shownHead, ada.head.p)).toBeLessThan(1e-9);
  });

  it("settles to the authoritative echo exactly after a quiet second", async () => {
    await sleep(1100);
    grace.client.replica.advance(grace.client.serverNow());
    ada.client.replica.advance(ada.client.serverNow());
    for (const h of [grace, ada]) {
      const echoed = h.lastRho.get("u2");
      expect(echoed).toBeDefined();
      expect(Object.is(h.client.replica.rhoOf("u2"), echoed)).toBe(true);
    }
  });

  it("propagates a pin to every tab at the same canonical spot", async () => {
    ada.client.placePin(FEATURE); // ada's replica is un-rotated, world is canonical
    await pollUntil(
      () =>
        ada.client.replica.pins.length === 1 && grace.client.replica.pins.length === 1,
      "pin on both clients",
    );
    expect(grace.client.replica.pins[0].canonicalPosition).toEqual(FEATURE);
    // grace renders it turned with her replica, not at the raw world point
    const marker = grace.client.replica.render().pins[0];
    const back = worldToCanonical(marker.position, grace.client.replica.rhoOf("u2"), PIVOT);
    expect(dist(back, FEATURE)).toBeLessThan(1e-9);
  });

  it("reports a miss as a transient error, not a state change", async () => {
    const before = grace.client.replica.rhoOf("u2");
    // fire from a meter above her own head, straight up: no cap on that path
    const above: Vec3 = [grace.head.p[0], grace.head.p[1] + 1, grace.head.p[2]];
    grace.client.requestAlign(above, [0, 1, 0]);
    await pollUntil(() => grace.client.replica.errors.length > 0, "no_target error");
    expect(grace.client.replica.errors[0].code).toBe("no_target");
    expect(grace.client.toasts.length).toBeGreaterThan(0);
    expect(grace.client.replica.rhoOf("u2")).toBe(before);
    expect(ada.client.replica.errors.length).toBe(0); // addressed, not broadcast
  });

  it("tells the room when a tab leaves", async () => {
    grace.stopPoses();
    grace.client.leave();
    await pollUntil(() => !ada.client.replica.users.has("u2"), "user_left at ada");
    expect(ada.client.replica.users.has("u1")).toBe(true);
  });

  it("shuts the server down cleanly", async () => {
    ada.stopPoses();
    ada.client.leave();
    await sleep(100);
    server.kill("SIGINT");
    expect(await serverExit).toBe(0);
  });
});
