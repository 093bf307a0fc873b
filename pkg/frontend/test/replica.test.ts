import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  canonicalToWorld,
  dist,
  rotateY,
  wrapAngle,
  type Pose,
  type Vec3,
} from "../src/geom.js";
import { encode } from "../src/protocol.js";
import { NotWelcomed, Replica } from "../src/replica.js";
import { fixturePath } from "./paths.js";

const WELCOME = readFileSync(fixturePath("protocol", "welcome.json"), "utf8").trim();
const DEG = Math.PI / 180;

function frame(name: string): string {
  return readFileSync(fixturePath("protocol", `${name}.json`), "utf8").trim();
}

function welcomed(now = 2.5): Replica {
  const r = new Replica();
  r.applyFrame(WELCOME, now);
  return r;
}

function poseDoc(p: Vec3, q = [1, 0, 0, 0]): { p: number[]; q: number[] } {
  return { p: [...p], q: [...q] };
}

describe("welcome snapshot", () => {
  it("seeds identity, config, scene, pivot, pins, and users", () => {
    const r = welcomed();
    expect(r.ready).toBe(true);
    expect(r.userId).toBe("u2");
    expect(r.color).toBe(1);
    expect(r.clock).toBe(2.5);
    expect(r.config!.angularSpeed).toBeCloseTo(Math.PI / 2, 12);
    expect(r.config!.decouplingEnabled).toBe(true);
    expect(r.config!.headPickRadius).toBe(0.15);
    expect(r.config!.palette[0]).toBe("orange");
    expect(r.scene!.objects.length).toBe(12);
    expect(r.pivot).toEqual([0, 0.9, 0]);
    expect(r.pins.length).toBe(1);
    expect(r.pins[0].id).toBe("p1");
    expect([...r.users.keys()]).toEqual(["u1"]);
    expect(r.users.get("u1")!.rho).toBe(0);
  });

  it("restores an in-flight animation and completes it on advance", () => {
    const doc = JSON.parse(WELCOME);
    doc.snapshot.users[0].animation = {
      delta: 1.0,
      duration: 2.0,
      leader_id: "u9",
      rho_start: 0.25,
      started_at: 2.0,
    };
    doc.snapshot.users[0].rho = 0.5;
    const { type: _t, version: _v, ...payload } = doc;
    const r = new Replica();
    r.applyFrame(encode("welcome", payload), 3.0);
    const st = r.users.get("u1")!;
    expect(st.animation).not.toBeNull();
    r.advance(3.0); // halfway: 0.25 + 1.0 * 0.5
    expect(st.rho).toBeCloseTo(0.75, 12);
    r.advance(4.5);
    expect(st.rho).toBe(0.25 + 1.0); // exact endpoint, not an interpolant
    expect(st.animation).toBeNull();
  });
});

describe("event folding", () => {
  it("rejects state-bearing frames before welcome", () => {
    const r = new Replica();
    expect(() => r.applyFrame(frame("user_joined"), 0)).toThrow(NotWelcomed);
    expect(() => r.applyFrame(frame("pose_update"), 0)).toThrow(NotWelcomed);
  });

  it("collects server error frames at any time", () => {
    const r = new Replica();
    r.applyFrame(frame("error"), 0);
    expect(r.errors).toEqual([
      { code: "no_target", detail: "alignment ray does not hit any user's head" },
    ]);
  });

  it("adds and removes users", () => {
    const r = welcomed();
    r.applyFrame(frame("user_joined"), 2.6);
    expect(r.users.get("u2")!.displayName).toBe("grace");
    expect(r.users.get("u2")!.color).toBe(1);
    r.applyFrame(frame("user_left"), 2.7);
    expect(r.users.has("u2")).toBe(false);
  });

  it("applies pose updates and echoes rho when not animating", () => {
    const r = welcomed();
    r.applyFrame(frame("pose_update"), 2.6);
    const st = r.users.get("u1")!;
    expect(st.head.p).toEqual([0.25, 1.6, -1.5]);
    expect(st.lastPoseSeq).toBe(42);
    expect(st.rho).toBe(0.8726646259971648); // exact echo, no rounding
  });

  it("ignores pose updates for users that already left", () => {
    const r = welcomed();
    r.applyFrame(
      encode("pose_update", {
        id: "ghost",
        head: poseDoc([0, 1.6, 0]),
        lh: poseDoc([0, 1, 0]),
        rh: poseDoc([0, 1, 0]),
        rho: 0,
        seq: 1,
      }),
      2.6,
    );
    expect(r.users.has("ghost")).toBe(false);
  });

  it("keeps local interpolation authoritative over echoes mid-animation", () => {
    const r = welcomed();
    // the fixture's follower u2 is absent, so this start frame is ignored
    r.applyFrame(frame("align_started"), 2.5);
    expect(r.users.has("u2")).toBe(false);
    const started = encode("align_started", {
      follower: "u1",
      leader: "u9",
      rho_start: 0,
      delta: 100 * DEG,
      duration: 100 / 90,
      t0: 2.5,
    });
    r.applyFrame(started, 2.5);
    const st = r.users.get("u1")!;
    expect(st.rho).toBe(0);
    r.advance(2.5 + (100 / 90) / 2);
    const mid = st.rho;
    expect(mid).toBeCloseTo(50 * DEG, 9);
    // an echo carrying a slightly stale rho must not yank the animation
    r.applyFrame(
      encode("pose_update", {
        id: "u1",
        head: poseDoc([0, 1.6, 1.5]),
        lh: poseDoc([0.2, 1.1, 0.4]),
        rh: poseDoc([0.2, 1.1, 0.4]),
        rho: 10 * DEG,
        seq: 43,
      }),
      2.5 + (100 / 90) / 2,
    );
    expect(st.rho).toBe(mid);
    // completion lands the exact wire value and clears the animation
    r.applyFrame(encode("align_completed", { follower: "u1", rho: 100 * DEG }), 4);
    expect(st.rho).toBe(100 * DEG);
    expect(st.animation).toBeNull();
  });

  it("appends pins", () => {
    const r = welcomed();
    const before = r.pins.length;
    r.applyFrame(
      encode("pin_added", {
        pin: { canonical_position: [0.1, 1, 0.1], color: 1, id: "p2", owner_user: "u1" },
      }),
      2.6,
    );
    expect(r.pins.length).toBe(before + 1);
    expect(r.pins[before].ownerUser).toBe("u1");
  });
});

describe("frame composition", () => {
  function withTwoUsers(decoupling = true): Replica {
    const doc = JSON.parse(WELCOME);
    doc.snapshot.config.decoupling_enabled = decoupling;
    const { type: _t, version: _v, ...payload } = doc;
    const r = new Replica();
    r.applyFrame(encode("welcome", payload), 2.5);
    r.applyFrame(frame("user_joined"), 2.5); // grace as u2, the viewer
    return r;
  }

  it("turns objects and pins with the viewer's rho", () => {
    const r = withTwoUsers();
    const st = r.users.get("u2")!;
    st.rho = 70 * DEG;
    const view = r.render();
    const sceneObj = r.scene!.objects[3]; // tower_a, well off the pivot
    const shown = view.objects[3];
    expect(shown.id).toBe(sceneObj.id);
    expect(dist(shown.position, rotateY(sceneObj.position, r.pivot, 70 * DEG))).toBeLessThan(1e-12);
    expect(wrapAngle(shown.yaw - ((sceneObj.yawDeg * DEG) + 70 * DEG))).toBeCloseTo(0, 12);
    const pin = r.pins[0];
    expect(
      dist(view.pins[0].position, canonicalToWorld(pin.canonicalPosition, 70 * DEG, r.pivot)),
    ).toBeLessThan(1e-12);
  });

  it("counter-rotates remote hands but never heads", () => {
    const r = withTwoUsers();
    const ada = r.users.get("u1")!;
    const hand: Pose = { p: [0.3, 1.175, 0.2], q: [1, 0, 0, 0] };
    ada.rightHand = hand;
    ada.rho = 10 * DEG;
    const grace = r.users.get("u2")!;
    grace.rho = 110 * DEG;
    const view = r.render("u2");
    const remote = view.remotes.find((a) => a.userId === "u1")!;
    const expected = rotateY(hand.p, r.pivot, (110 - 10) * DEG);
    expect(dist(remote.rightHand.p, expected)).toBeLessThan(1e-12);
    expect(remote.head.p).toEqual(ada.head.p); // true pose, not decoupled
  });

  it("leaves remote hands at true poses when decoupling is off", () => {
    const r = withTwoUsers(false);
    const ada = r.users.get("u1")!;
    ada.rightHand = { p: [0.3, 1.175, 0.2], q: [1, 0, 0, 0] };
    r.users.get("u2")!.rho = 110 * DEG;
    const view = r.render("u2");
    const remote = view.remotes.find((a) => a.userId === "u1")!;
    expect(remote.rightHand.p).toEqual([0.3, 1.175, 0.2]);
  });

  it("recovers the canonical point a decoupled hand indicates", () => {
    // the round trip behind spatial references: owner's world point, into
    // the viewer's frame, back through the viewer's canonical map
    const r = withTwoUsers();
    const ada = r.users.get("u1")!;
    const grace = r.users.get("u2")!;
    for (const [rhoO, rhoV] of [
      [0, 100 * DEG],
      [33 * DEG, -45 * DEG],
      [400 * DEG, 13 * DEG],
    ]) {
      const canonical: Vec3 = [0.3, 1.175, 0.2];
      ada.rho = rhoO;
      ada.rightHand = { p: canonicalToWorld(canonical, rhoO, r.pivot), q: [1, 0, 0, 0] };
      grace.rho = rhoV;
      const view = r.render("u2");
      const remote = view.remotes.find((a) => a.userId === "u1")!;
      const recovered = rotateY(remote.rightHand.p, r.pivot, -rhoV);
      expect(dist(recovered, canonical)).toBeLessThan(1e-9);
    }
  });
});
