import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { Client, type SocketLike } from "../src/net.js";
import { decode, encode } from "../src/protocol.js";
import { fixturePath } from "./paths.js";

const WELCOME = readFileSync(fixturePath("protocol", "welcome.json"), "utf8").trim();

class StubSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  readyState = 0;
  onopen: SocketLike["onopen"] = null;
  onmessage: SocketLike["onmessage"] = null;
  onerror: SocketLike["onerror"] = null;
  onclose: SocketLike["onclose"] = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.readyState = 3;
  }

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  push(text: string): void {
    this.onmessage?.({ data: text });
  }
}

function liveClient(): { socket: StubSocket; client: Client; clock: { t: number } } {
  const socket = new StubSocket();
  const clock = { t: 100 };
  const client = new Client(socket, "grace", () => clock.t);
  socket.open();
  socket.push(WELCOME);
  return { socket, client, clock };
}

describe("join handshake", () => {
  it("sends hello on open and goes live on welcome", () => {
    const { socket, client } = liveClient();
    expect(socket.sent[0]).toBe(encode("hello", { name: "grace" }));
    expect(client.status).toBe("live");
    expect(client.banner).toBeNull();
    expect(client.replica.userId).toBe("u2");
  });

  it("maps the local clock onto the server session clock", () => {
    const { client, clock } = liveClient();
    // welcome carried clock 2.5 while local time read 100
    expect(client.serverNow()).toBeCloseTo(2.5, 9);
    clock.t = 101;
    expect(client.serverNow()).toBeCloseTo(3.5, 9);
  });

  it("raises a banner when the server speaks another version", () => {
    const socket = new StubSocket();
    const client = new Client(socket, "grace", () => 0);
    socket.open();
    socket.push(WELCOME.replace('"version":1', '"version":2'));
    expect(client.status).toBe("failed");
    expect(client.banner!.code).toBe("VersionMismatch");
    expect(socket.closed).toBe(true);
  });

  it("raises a banner when the connection dies before welcome", () => {
    const socket = new StubSocket();
    const client = new Client(socket, "grace", () => 0);
    socket.open();
    socket.onclose?.({ code: 1006 });
    expect(client.status).toBe("failed");
    expect(client.banner!.code).toBe("closed_early");
  });

  it("closes quietly after going live", () => {
    const { socket, client } = liveClient();
    socket.onclose?.({});
    expect(client.status).toBe("closed");
    expect(client.banner).toBeNull();
  });
});

describe("outbound traffic", () => {
  it("streams poses with increasing seq only while live", () => {
    const socket = new StubSocket();
    const client = new Client(socket, "grace", () => 0);
    const pose = { p: [0, 1.6, 1.5] as const, q: [1, 0, 0, 0] as const };
    client.sendPose(pose, pose, pose); // not live yet, swallowed
    socket.open();
    socket.push(WELCOME);
    client.sendPose(pose, pose, pose);
    client.sendPose(pose, pose, pose);
    const seqs = socket.sent
      .map((t) => decode(t))
      .filter((m) => m.type === "pose")
      .map((m) => m.payload.seq);
    expect(seqs).toEqual([1, 2]);
  });

  it("encodes alignment requests and pin placements", () => {
    const { socket, client } = liveClient();
    client.requestAlign([0, 1.6, 1.5], [0, 0, -1]);
    client.placePin([0.3, 1, -0.2]);
    const types = socket.sent.map((t) => decode(t).type);
    expect(types).toContain("align_request");
    expect(types).toContain("pin_place");
  });

  it("says goodbye with a leave frame", () => {
    const { socket, client } = liveClient();
    client.leave();
    expect(decode(socket.sent[socket.sent.length - 1]).type).toBe("leave");
    expect(socket.closed).toBe(true);
  });
});

describe("server-reported errors", () => {
  it("shows transient toasts that expire", () => {
    const { socket, client, clock } = liveClient();
    socket.push(encode("error", { code: "no_target", detail: "ray misses every head" }));
    expect(client.status).toBe("live"); // not fatal
    expect(client.toasts.length).toBe(1);
    expect(client.toasts[0].text).toContain("no_target");
    clock.t += 10;
    client.pruneToasts();
    expect(client.toasts.length).toBe(0);
  });
});
