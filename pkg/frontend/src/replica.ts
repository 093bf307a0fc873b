// Client-side mirror of the shared session.
//
// The replica is seeded from the welcome snapshot and then kept current by
// folding server frames in arrival order. Between authoritative pose
// updates it animates replica rotations locally from the align_started
// parameters, so rendering never waits on the network; the rho echoed in
// each pose_update corrects drift, and align_completed lands the exact
// endpoint.

import {
  canonicalToWorld,
  IDENTITY_QUAT,
  remotePose,
  rotateY,
  type Pose,
  type Vec3,
} from "./geom.js";
import { decode, type Message, type PinDoc, type PoseDoc } from "./protocol.js";
import { parseScene, yawOf, type Scene } from "./scene.js";

export class ReplicaError extends Error {}

/** A state-bearing frame arrived before welcome. */
export class NotWelcomed extends ReplicaError {}

export interface SessionConfig {
  angularSpeed: number;
  decouplingEnabled: boolean;
  headPickRadius: number;
  maxUsers: number;
  palette: string[];
  poseFanoutHz: number;
}

export interface Animation {
  rhoStart: number;
  delta: number; // wrapped; sign is the sweep direction
  startedAt: number; // session-time seconds
  duration: number;
  leaderId: string;
}

export function rhoAt(anim: Animation, now: number): number {
  let u = (now - anim.startedAt) / anim.duration;
  u = Math.min(Math.max(u, 0), 1);
  return anim.rhoStart + anim.delta * u;
}

export interface UserState {
  userId: string;
  displayName: string;
  color: number; // palette index
  head: Pose;
  leftHand: Pose;
  rightHand: Pose;
  rho: number;
  animation: Animation | null;
  lastPoseSeq: number;
  calibrated: boolean;
}

export interface Pin {
  id: string;
  ownerUser: string;
  canonicalPosition: Vec3;
  color: number;
}

export interface ServerErrorNote {
  code: string;
  detail: string;
}

export interface RenderObject {
  id: string;
  position: Vec3;
  yaw: number;
}

export interface RenderPin {
  id: string;
  color: number;
  position: Vec3;
}

export interface RemoteAvatar {
  userId: string;
  displayName: string;
  color: number;
  head: Pose;
  leftHand: Pose;
  rightHand: Pose;
}

export interface ViewFrame {
  viewerId: string;
  objects: RenderObject[];
  pins: RenderPin[];
  remotes: RemoteAvatar[];
  ownLeft: Pose;
  ownRight: Pose;
}

const IDENTITY_POSE: Pose = { p: [0, 0, 0], q: IDENTITY_QUAT };

function poseFromDoc(doc: PoseDoc): Pose {
  return { p: [doc.p[0], doc.p[1], doc.p[2]], q: [doc.q[0], doc.q[1], doc.q[2], doc.q[3]] };
}

export function poseToDoc(pose: Pose): PoseDoc {
  return { p: [...pose.p] as [number, number, number], q: [...pose.q] as PoseDoc["q"] };
}

/**
 * Pure frame composition, the same map the server applies. Objects and
 * pins turn with the viewer's replica rotation; each remote hand is
 * carried across by the difference of the two replica rotations so it
 * indicates the same canonical spot in the viewer's copy. Heads never
 * decouple.
 */
export function composeFrame(
  scene: Scene,
  pivot: Vec3,
  decouplingEnabled: boolean,
  users: Map<string, UserState>,
  pins: Pin[],
  viewerId: string,
): ViewFrame {
  const viewer = users.get(viewerId);
  if (!viewer) throw new ReplicaError(`no viewer ${JSON.stringify(viewerId)} in replica`);
  const rhoV = viewer.rho;
  const objects = scene.objects.map((obj) => ({
    id: obj.id,
    position: rotateY(obj.position, pivot, rhoV),
    yaw: yawOf(obj) + rhoV,
  }));
  const markers = pins.map((p) => ({
    id: p.id,
    color: p.color,
    position: canonicalToWorld(p.canonicalPosition, rhoV, pivot),
  }));
  const remotes: RemoteAvatar[] = [];
  for (const [uid, st] of users) {
    if (uid === viewerId) continue;
    const lh = decouplingEnabled ? remotePose(st.leftHand, rhoV, st.rho, pivot) : st.leftHand;
    const rh = decouplingEnabled ? remotePose(st.rightHand, rhoV, st.rho, pivot) : st.rightHand;
    remotes.push({
      userId: uid,
      displayName: st.displayName,
      color: st.color,
      head: st.head,
      leftHand: lh,
      rightHand: rh,
    });
  }
  return {
    viewerId,
    objects,
    pins: markers,
    remotes,
    ownLeft: viewer.leftHand,
    ownRight: viewer.rightHand,
  };
}

export class Replica {
  userId: string | null = null;
  color: number | null = null;
  clock = 0;
  config: SessionConfig | null = null;
  scene: Scene | null = null;
  pivot: Vec3 = [0, 0, 0];
  users = new Map<string, UserState>();
  pins: Pin[] = [];
  errors: ServerErrorNote[] = [];
  calibration: { yaw: number; translation: Vec3 } | null = null;

  get ready(): boolean {
    return this.config !== null;
  }

  applyFrame(frame: string, now: number): Message {
    const msg = decode(frame);
    this.apply(msg, now);
    return msg;
  }

  /**
   * Fold one server message into the replica. `now` is the client clock on
   * the server's epoch; it only matters for interpolation, never for
   * stored state.
   */
  apply(msg: Message, now: number): void {
    const p = msg.payload;
    if (msg.type === "welcome") {
      this.userId = p.user_id as string;
      this.color = p.color as number;
      this.restore(p.snapshot as Record<string, unknown>);
      return;
    }
    if (msg.type === "error") {
      this.errors.push({ code: p.code as string, detail: p.detail as string });
      return;
    }
    if (msg.type === "calibrate_result") {
      this.calibration = { yaw: p.yaw as number, translation: p.translation as Vec3 };
      return;
    }
    if (!this.ready) throw new NotWelcomed(`${msg.type} before welcome`);
    switch (msg.type) {
      case "user_joined":
        this.users.set(p.id as string, {
          userId: p.id as string,
          displayName: p.name as string,
          color: p.color as number,
          head: IDENTITY_POSE,
          leftHand: IDENTITY_POSE,
          rightHand: IDENTITY_POSE,
          rho: 0,
          animation: null,
          lastPoseSeq: -1,
          calibrated: false,
        });
        break;
      case "user_left":
        this.users.delete(p.id as string);
        break;
      case "pose_update": {
        const st = this.users.get(p.id as string);
        if (!st) return; // membership change raced ahead of a droppable frame
        st.head = poseFromDoc(p.head as PoseDoc);
        st.leftHand = poseFromDoc(p.lh as PoseDoc);
        st.rightHand = poseFromDoc(p.rh as PoseDoc);
        st.lastPoseSeq = p.seq as number;
        if (st.animation === null) {
          // authoritative echo; while animating, local interpolation tracks
          // the same curve and the completion frame lands exact
          st.rho = p.rho as number;
        }
        break;
      }
      case "align_started": {
        const st = this.users.get(p.follower as string);
        if (!st) return;
        st.animation = {
          rhoStart: p.rho_start as number,
          delta: p.delta as number,
          startedAt: p.t0 as number,
          duration: p.duration as number,
          leaderId: p.leader as string,
        };
        st.rho = rhoAt(st.animation, now);
        break;
      }
      case "align_completed": {
        const st = this.users.get(p.follower as string);
        if (!st) return;
        st.rho = p.rho as number;
        st.animation = null;
        break;
      }
      case "pin_added": {
        const doc = p.pin as unknown as PinDoc;
        this.pins.push({
          id: doc.id,
          ownerUser: doc.owner_user,
          canonicalPosition: [...doc.canonical_position] as unknown as Vec3,
          color: doc.color,
        });
        break;
      }
      default:
        throw new ReplicaError(`unexpected server message ${msg.type}`);
    }
  }

  /** Interpolate in-flight replica rotations to the given client time. */
  advance(now: number): void {
    for (const st of this.users.values()) {
      const anim = st.animation;
      if (anim === null) continue;
      if (now >= anim.startedAt + anim.duration) {
        st.rho = anim.rhoStart + anim.delta;
        st.animation = null;
      } else {
        st.rho = rhoAt(anim, now);
      }
    }
  }

  rhoOf(userId: string): number {
    const st = this.users.get(userId);
    if (!st) throw new ReplicaError(`no user ${JSON.stringify(userId)} in replica`);
    return st.rho;
  }

  /** Compose the frame this client should draw. */
  render(viewerId?: string): ViewFrame {
    if (!this.ready || this.scene === null || this.config === null) {
      throw new NotWelcomed("no snapshot yet");
    }
    const viewer = viewerId ?? this.userId;
    if (viewer === null) throw new ReplicaError("no viewer");
    return composeFrame(
      this.scene,
      this.pivot,
      this.config.decouplingEnabled,
      this.users,
      this.pins,
      viewer,
    );
  }

  private restore(snapshot: Record<string, unknown>): void {
    const cfg = snapshot.config as Record<string, unknown>;
    this.config = {
      angularSpeed: cfg.angular_speed as number,
      decouplingEnabled: cfg.decoupling_enabled as boolean,
      headPickRadius: cfg.head_pick_radius as number,
      maxUsers: cfg.max_users as number,
      palette: [...(cfg.palette as string[])],
      poseFanoutHz: cfg.pose_fanout_hz as number,
    };
    this.scene = parseScene(snapshot.scene);
    this.pivot = this.scene.tableCenter;
    this.clock = snapshot.clock as number;
    this.users.clear();
    for (const raw of snapshot.users as Record<string, unknown>[]) {
      const animDoc = raw.animation as Record<string, number | string> | null;
      this.users.set(raw.user_id as string, {
        userId: raw.user_id as string,
        displayName: raw.display_name as string,
        color: raw.color as number,
        head: poseFromDoc(raw.head as PoseDoc),
        leftHand: poseFromDoc(raw.left_hand as PoseDoc),
        rightHand: poseFromDoc(raw.right_hand as PoseDoc),
        rho: raw.rho as number,
        animation:
          animDoc === null
            ? null
            : {
                rhoStart: animDoc.rho_start as number,
                delta: animDoc.delta as number,
                startedAt: animDoc.started_at as number,
                duration: animDoc.duration as number,
                leaderId: animDoc.leader_id as string,
              },
        lastPoseSeq: raw.last_pose_seq as number,
        calibrated: raw.calibrated as boolean,
      });
    }
    this.pins = [];
    for (const doc of snapshot.pins as unknown as PinDoc[]) {
      this.pins.push({
        id: doc.id,
        ownerUser: doc.owner_user,
        canonicalPosition: [...doc.canonical_position] as unknown as Vec3,
        color: doc.color,
      });
    }
  }
}
