// Browser entry point. Reads the server URL and display name from query
// parameters (falling back to a join form), then runs the realtime loop:
// keyboard moves the head, the cursor ray picks a point in the rotated
// scene for the pointing hand, clicks either request an alignment (on a
// collaborator's head) or drop a pin (on the scene).

import { InputState } from "./input.js";
import { Renderer, pixelRay, type Camera } from "./render.js";
import { Client, type SocketLike, type ClientStatus } from "./net.js";
import {
  pointAt,
  rayBox,
  rayPlaneY,
  raySphere,
  rotateYDir,
  yawQuat,
  type Pose,
  type Vec3,
} from "./geom.js";
import { halfExtents, type Scene } from "./scene.js";
import type { ViewFrame } from "./replica.js";

const HAND_FALLBACK_RANGE = 2.5;
const GROUND_PICK_LIMIT = 8;
const LEFT_HAND_OFFSET: Vec3 = [0.22, -0.45, 0.18]; // head-local resting spot

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function defaultServerUrl(): string {
  const host = location.hostname || "localhost";
  return `ws://${host}:8765`;
}

function setupJoinForm(): void {
  const join = el<HTMLElement>("join");
  join.style.display = "flex";
  const serverInput = el<HTMLInputElement>("join-server");
  const nameInput = el<HTMLInputElement>("join-name");
  serverInput.value = defaultServerUrl();
  el<HTMLFormElement>("join-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const params = new URLSearchParams();
    params.set("server", serverInput.value.trim());
    params.set("name", nameInput.value.trim() || "guest");
    location.search = params.toString();
  });
}

interface HandShape {
  point: Vec3;
  pose: Pose;
}

/** First intersection of the cursor ray with the scene as drawn. */
function pickHand(
  origin: Vec3,
  dir: Vec3,
  scene: Scene,
  view: ViewFrame,
  headP: Vec3,
): HandShape {
  let best: number | null = null;
  view.objects.forEach((obj, i) => {
    const spec = scene.objects[i];
    const t =
      spec.shape === "box"
        ? rayBox(origin, dir, obj.position, halfExtents(spec), obj.yaw)
        : spec.radius !== null
          ? raySphere(origin, dir, obj.position, spec.radius)
          : null;
    if (t !== null && (best === null || t < best)) best = t;
  });
  if (best === null) {
    const ground = rayPlaneY(origin, dir, 0);
    best = ground !== null && ground <= GROUND_PICK_LIMIT ? ground : HAND_FALLBACK_RANGE;
  }
  const point = pointAt(origin, dir, best);
  const yaw = Math.atan2(point[0] - headP[0], point[2] - headP[2]);
  return { point, pose: { p: point, q: yawQuat(yaw) } };
}

function restingLeftHand(head: Pose, yaw: number): Pose {
  const off = rotateYDir(LEFT_HAND_OFFSET, yaw);
  return {
    p: [head.p[0] + off[0], head.p[1] + off[1], head.p[2] + off[2]],
    q: yawQuat(yaw),
  };
}

function start(serverUrl: string, name: string): void {
  const canvas = el<HTMLCanvasElement>("view");
  const hud = el<HTMLElement>("hud");
  const bannerEl = el<HTMLElement>("banner");
  const toastsEl = el<HTMLElement>("toasts");
  canvas.style.display = "block";
  hud.style.display = "block";

  const resize = () => {
    canvas.width = canvas.clientWidth;
    canvas.height = canvas.clientHeight;
  };
  window.addEventListener("resize", resize);
  resize();

  const renderer = new Renderer(canvas);
  const input = new InputState();
  input.attach(canvas);

  let socket: SocketLike;
  try {
    socket = new WebSocket(serverUrl) as unknown as SocketLike;
  } catch (err) {
    bannerEl.textContent = `bad server url: ${(err as Error).message}`;
    bannerEl.style.display = "block";
    return;
  }

  let poseTimer: number | null = null;
  let latestHead: Pose | null = null;
  let latestLeft: Pose | null = null;
  let latestRight: Pose | null = null;

  const client = new Client(socket, name, () => performance.now() / 1000, {
    onStatus: (status: ClientStatus) => {
      if (status === "live" && poseTimer === null) {
        const hz = client.replica.config?.poseFanoutHz ?? 20;
        poseTimer = window.setInterval(() => {
          if (latestHead && latestLeft && latestRight) {
            client.sendPose(latestHead, latestLeft, latestRight);
          }
        }, 1000 / hz);
      }
      if ((status === "closed" || status === "failed") && poseTimer !== null) {
        window.clearInterval(poseTimer);
        poseTimer = null;
      }
    },
  });
  window.addEventListener("beforeunload", () => client.leave());

  const statusLine = el<HTMLElement>("hud-status");
  const usersLine = el<HTMLElement>("hud-users");

  let lastTs: number | null = null;
  const frame = (ts: number) => {
    const dt = lastTs === null ? 0 : Math.min((ts - lastTs) / 1000, 0.1);
    lastTs = ts;
    input.step(dt);
    const head = input.headPose();
    const cam: Camera = { p: head.p, q: head.q };
    latestHead = head;
    latestLeft = restingLeftHand(head, input.yaw);

    client.pruneToasts();
    const replica = client.replica;

    if (client.status === "live" && replica.ready && replica.scene && replica.config) {
      replica.advance(client.serverNow());
      const view = replica.render();
      const scene = replica.scene;
      const palette = replica.config.palette;

      let handPoint: Vec3 | null = null;
      if (input.cursor) {
        const ray = pixelRay(cam, canvas.width, canvas.height, input.cursor.x, input.cursor.y);
        const hand = pickHand(ray.origin, ray.dir, scene, view, head.p);
        handPoint = hand.point;
        latestRight = hand.pose;
      } else {
        latestRight = restingLeftHand(head, input.yaw + Math.PI); // tuck the idle hand on the other side
      }

      for (const click of input.takeClicks()) {
        const ray = pixelRay(cam, canvas.width, canvas.height, click.x, click.y);
        const pick = replica.config.headPickRadius;
        let capHit: number | null = null;
        for (const [uid, st] of replica.users) {
          if (uid === replica.userId) continue;
          const t = raySphere(ray.origin, ray.dir, st.head.p, pick);
          if (t !== null && (capHit === null || t < capHit)) capHit = t;
        }
        if (capHit !== null) {
          client.requestAlign(ray.origin, ray.dir);
        } else if (handPoint !== null) {
          const hand = pickHand(ray.origin, ray.dir, scene, view, head.p);
          client.placePin(hand.point);
        }
      }

      renderer.draw(cam, scene, view, palette, handPoint, input.cursor);

      const ownRho = replica.userId ? (replica.rhoOf(replica.userId) * 180) / Math.PI : 0;
      statusLine.textContent = `${name} | view turned ${ownRho.toFixed(1)} deg`;
      const chips: string[] = [];
      for (const [uid, st] of replica.users) {
        const color = palette[st.color % palette.length];
        const marker = uid === replica.userId ? " (you)" : "";
        const deg = ((st.rho * 180) / Math.PI).toFixed(1);
        chips.push(
          `<span class="chip"><i style="background:${color}"></i>${escapeHtml(st.displayName)}${marker} ${deg}deg</span>`,
        );
      }
      usersLine.innerHTML = chips.join(" ");
    } else {
      renderer.draw(cam, { name: "", tableCenter: [0, 0, 0], objects: [] }, EMPTY_VIEW, [], null, input.cursor);
      statusLine.textContent = client.status;
      usersLine.textContent = "";
    }

    if (client.banner) {
      bannerEl.textContent = `${client.banner.code}: ${client.banner.detail}`;
      bannerEl.style.display = "block";
    } else {
      bannerEl.style.display = "none";
    }
    toastsEl.innerHTML = client.toasts
      .map((t) => `<div class="toast">${escapeHtml(t.text)}</div>`)
      .join("");

    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

const EMPTY_VIEW: ViewFrame = {
  viewerId: "",
  objects: [],
  pins: [],
  remotes: [],
  ownLeft: { p: [0, 0, 0], q: [1, 0, 0, 0] },
  ownRight: { p: [0, 0, 0], q: [1, 0, 0, 0] },
};

function escapeHtml(s: string): string {
  return s.replace(/[&<>"']/g, (ch) => `&#${ch.charCodeAt(0)};`);
}

const params = new URLSearchParams(location.search);
const serverParam = params.get("server");
const nameParam = params.get("name");
if (serverParam && nameParam) {
  start(serverParam, nameParam);
} else {
  setupJoinForm();
}
