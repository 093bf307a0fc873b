// Wire catalog and codec for the client side of the session protocol.
//
// Frames are single-line JSON, version 1, canonically encoded (see canon.ts).
// Decoding is strict: unknown type, missing or extra field, wrong arity,
// non-finite number, or wrong version are all rejected, naming the field.
// The same golden fixture suite that pins the server codec pins this one.

import { dumpsCanonical, MAX_EXACT_INT } from "./canon.js";

export const VERSION = 1;
export const MAX_FRAME_BYTES = 64 * 1024;

export class ProtocolError extends Error {}
export class UnencodableMessage extends ProtocolError {}
export class DecodeError extends ProtocolError {}
export class MalformedFrame extends DecodeError {}
export class UnknownType extends DecodeError {}
export class VersionMismatch extends DecodeError {}

export class SchemaViolation extends DecodeError {
  readonly field: string;

  constructor(fieldPath: string, reason: string) {
    super(`${fieldPath}: ${reason}`);
    this.field = fieldPath;
  }
}

export interface Message {
  type: string;
  payload: Record<string, unknown>;
}

export type Vec3Doc = [number, number, number];
export type QuatDoc = [number, number, number, number]; // w, x, y, z
export interface PoseDoc {
  p: Vec3Doc;
  q: QuatDoc;
}
export interface PinDoc {
  canonical_position: Vec3Doc;
  color: number;
  id: string;
  owner_user: string;
}

type Checker = (value: unknown, path: string) => void;

function checkStr(value: unknown, path: string): void {
  if (typeof value !== "string") throw new SchemaViolation(path, "expected a string");
}

// Integer literals past 2**53 read back as the double they round to, so a
// strict peer cannot have accepted them as integers; reject the same range.
function checkInt(value: unknown, path: string): void {
  if (typeof value !== "number" || !Number.isInteger(value) || Math.abs(value) > MAX_EXACT_INT) {
    throw new SchemaViolation(path, "expected an integer");
  }
}

function checkNumber(value: unknown, path: string): void {
  if (typeof value !== "number") throw new SchemaViolation(path, "expected a number");
  if (!Number.isFinite(value)) throw new SchemaViolation(path, "non-finite number");
}

function checkNumbers(count: number): Checker {
  return (value, path) => {
    if (!Array.isArray(value) || value.length !== count) {
      throw new SchemaViolation(path, `expected an array of ${count} numbers`);
    }
    value.forEach((item, i) => checkNumber(item, `${path}[${i}]`));
  };
}

const checkVec3 = checkNumbers(3);

function checkQuat(value: unknown, path: string): void {
  checkNumbers(4)(value, path);
  const q = value as number[];
  const norm = Math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (Math.abs(norm - 1) > 1e-6) {
    throw new SchemaViolation(path, `quaternion norm ${norm} is not 1`);
  }
}

function checkExactKeys(value: unknown, path: string, keys: string[]): Record<string, unknown> {
  if (value === null || typeof value !== "object" || Array.isArray(value)) {
    throw new SchemaViolation(path, "expected an object");
  }
  const doc = value as Record<string, unknown>;
  for (const k of [...keys].sort()) {
    if (!(k in doc)) throw new SchemaViolation(`${path}.${k}`, "missing field");
  }
  for (const k of Object.keys(doc).sort()) {
    if (!keys.includes(k)) throw new SchemaViolation(`${path}.${k}`, "unexpected field");
  }
  return doc;
}

function checkPose(value: unknown, path: string): void {
  const doc = checkExactKeys(value, path, ["p", "q"]);
  checkVec3(doc.p, `${path}.p`);
  checkQuat(doc.q, `${path}.q`);
}

function checkPairs(value: unknown, path: string): void {
  if (!Array.isArray(value)) {
    throw new SchemaViolation(path, "expected an array of point pairs");
  }
  value.forEach((pair, i) => {
    const p = `${path}[${i}]`;
    const doc = checkExactKeys(pair, p, ["local", "shared"]);
    checkVec3(doc.local, `${p}.local`);
    checkVec3(doc.shared, `${p}.shared`);
  });
}

function checkPin(value: unknown, path: string): void {
  const doc = checkExactKeys(value, path, ["canonical_position", "color", "id", "owner_user"]);
  checkVec3(doc.canonical_position, `${path}.canonical_position`);
  checkInt(doc.color, `${path}.color`);
  checkStr(doc.id, `${path}.id`);
  checkStr(doc.owner_user, `${path}.owner_user`);
}

// Free-form document (the session snapshot); structure is validated by its
// consumer, but numbers must still be finite to round-trip.
function checkJsonObject(value: unknown, path: string): void {
  if (value === null || typeof value !== "object" || Array.isArray(value)) {
    throw new SchemaViolation(path, "expected an object");
  }
  checkJsonValue(value, path);
}

function checkJsonValue(value: unknown, path: string): void {
  if (value === null || typeof value === "boolean" || typeof value === "string") return;
  if (typeof value === "number") {
    checkNumber(value, path);
    return;
  }
  if (Array.isArray(value)) {
    value.forEach((item, i) => checkJsonValue(item, `${path}[${i}]`));
    return;
  }
  if (typeof value === "object") {
    const doc = value as Record<string, unknown>;
    for (const key of Object.keys(doc)) checkJsonValue(doc[key], `${path}.${key}`);
    return;
  }
  throw new SchemaViolation(path, `cannot carry ${typeof value}`);
}

const SCHEMAS: Record<string, Record<string, Checker>> = {
  // client -> server
  hello: { name: checkStr },
  calibrate_request: { pairs: checkPairs },
  pose: { head: checkPose, lh: checkPose, rh: checkPose, seq: checkInt },
  align_request: { ray_origin: checkVec3, ray_dir: checkVec3 },
  pin_place: { world: checkVec3 },
  leave: {},
  // server -> client
  welcome: { user_id: checkStr, color: checkInt, snapshot: checkJsonObject },
  calibrate_result: { yaw: checkNumber, translation: checkVec3, rms: checkNumber },
  user_joined: { id: checkStr, name: checkStr, color: checkInt },
  user_left: { id: checkStr },
  pose_update: {
    id: checkStr,
    head: checkPose,
    lh: checkPose,
    rh: checkPose,
    rho: checkNumber,
    seq: checkInt,
  },
  align_started: {
    follower: checkStr,
    leader: checkStr,
    rho_start: checkNumber,
    delta: checkNumber,
    duration: checkNumber,
    t0: checkNumber,
  },
  align_completed: { follower: checkStr, rho: checkNumber },
  pin_added: { pin: checkPin },
  error: { code: checkStr, detail: checkStr },
};

export const CLIENT_TO_SERVER = new Set([
  "hello",
  "calibrate_request",
  "pose",
  "align_request",
  "pin_place",
  "leave",
]);
export const SERVER_TO_CLIENT = new Set(
  Object.keys(SCHEMAS).filter((t) => !CLIENT_TO_SERVER.has(t)),
);

const DROPPABLE = new Set(["pose", "pose_update"]);

export function isDroppable(msgType: string): boolean {
  if (!(msgType in SCHEMAS)) throw new UnknownType(`unknown message type ${JSON.stringify(msgType)}`);
  return DROPPABLE.has(msgType);
}

function validatePayload(msgType: string, payload: Record<string, unknown>): void {
  const schema = SCHEMAS[msgType];
  for (const name of Object.keys(schema).sort()) {
    if (!(name in payload)) throw new SchemaViolation(name, "missing field");
  }
  for (const name of Object.keys(payload).sort()) {
    if (!(name in schema)) throw new SchemaViolation(name, "unexpected field");
  }
  for (const name of Object.keys(payload)) {
    schema[name](payload[name], name);
  }
}

/** One canonical JSON frame per message; deterministic byte for byte. */
export function encode(msgType: string, payload: Record<string, unknown>): string {
  if (!(msgType in SCHEMAS)) {
    throw new UnencodableMessage(`unknown message type ${JSON.stringify(msgType)}`);
  }
  if ("type" in payload || "version" in payload) {
    throw new UnencodableMessage("payload must not carry 'type' or 'version'");
  }
  try {
    validatePayload(msgType, payload);
  } catch (err) {
    if (err instanceof SchemaViolation) throw new UnencodableMessage(err.message);
    throw err;
  }
  return dumpsCanonical({ ...payload, type: msgType, version: VERSION });
}

/** Parse and validate one frame; throws a DecodeError subtype otherwise. */
export function decode(frame: string): Message {
  let doc: unknown;
  try {
    doc = JSON.parse(frame);
  } catch (err) {
    // V8 reports pathological nesting as a RangeError
    if (err instanceof RangeError) throw new MalformedFrame("frame nests too deeply");
    throw new MalformedFrame(`frame is not valid JSON: ${(err as Error).message}`);
  }
  if (doc === null || typeof doc !== "object" || Array.isArray(doc)) {
    throw new MalformedFrame("frame is not a JSON object");
  }
  const { type: msgType, version, ...payload } = doc as Record<string, unknown>;
  if (msgType === undefined) throw new MalformedFrame("frame has no 'type'");
  if (typeof msgType !== "string" || !(msgType in SCHEMAS)) {
    throw new UnknownType(`unknown message type ${JSON.stringify(msgType)}`);
  }
  if (version !== VERSION) {
    throw new VersionMismatch(`version ${JSON.stringify(version ?? null)}, expected ${VERSION}`);
  }
  try {
    validatePayload(msgType, payload);
  } catch (err) {
    if (err instanceof RangeError) throw new MalformedFrame("frame nests too deeply");
    throw err;
  }
  return { type: msgType, payload };
}
