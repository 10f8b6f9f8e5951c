/**
 * Wire records shared with the motionroom server.
 *
 * Every record is a JSON object with a `tag` field. Over TCP each record is
 * preceded by a 4-byte big-endian payload length; over WebSocket each record
 * travels as one binary message with no prefix. The server serializes each
 * record once (sorted keys, no whitespace) and fans the identical bytes out
 * to every room member, so the viewer treats payload bytes as authoritative
 * and never re-encodes what it received.
 */

export const MAX_FRAME_BYTES = 16 * 1024 * 1024;

export const TAGS = new Set([
  "JOIN",
  "JOIN_OK",
  "JOIN_ERR",
  "ROSTER",
  "INGEST",
  "FRAME_BATCH",
  "PING",
  "PONG",
  "LEAVE",
  "CTRL",
  "CTRL_OK",
  "CTRL_ERR",
]);

// arities fixed by the wire contract: 24 joints, 23 joint rotations
export const N_JOINTS = 24;
export const N_POSE_CHANNELS = 69;

export class ProtocolError extends Error {}

export type WireRecord = { tag: string } & Record<string, unknown>;

export interface RosterEntry {
  participant_id: string;
  name: string;
  avatar_id: string;
  color: string;
  camera_id: string;
}

export interface BatchEntry {
  participant_id: string;
  person_index: number;
  timestamp: number;
  global_orient: number[];
  body_pose: number[];
  translation: number[];
  joints: number[][];
  staleness_ms: number;
}

export interface FrameBatch {
  room: string;
  tick: number;
  server_timestamp: number;
  entries: BatchEntry[];
}

function canonicalJson(value: unknown): string {
  if (value === null) return "null";
  switch (typeof value) {
    case "boolean":
      return value ? "true" : "false";
    case "number":
      if (!Number.isFinite(value)) throw new ProtocolError("non-finite number in record");
      // JSON.stringify(-0) prints "0"; keep the sign the way the server does
      return Object.is(value, -0) ? "-0.0" : JSON.stringify(value);
    case "string":
      return JSON.stringify(value);
    case "object": {
      if (Array.isArray(value)) return "[" + value.map(canonicalJson).join(",") + "]";
      const obj = value as Record<string, unknown>;
      const keys = Object.keys(obj)
        .filter((k) => obj[k] !== undefined)
        .sort();
      return "{" + keys.map((k) => JSON.stringify(k) + ":" + canonicalJson(obj[k])).join(",") + "}";
    }
    default:
      throw new ProtocolError(`unencodable value of type ${typeof value}`);
  }
}

/** Serialize a record compactly with sorted keys. */
export function encodeRecord(rec: Record<string, unknown>): Uint8Array {
  const tag = rec["tag"];
  if (typeof tag !== "string" || !TAGS.has(tag)) {
    throw new ProtocolError(`unknown or missing tag: ${String(tag)}`);
  }
  return new TextEncoder().encode(canonicalJson(rec));
}

export function decodeRecord(payload: Uint8Array): WireRecord {
  let text: string;
  try {
    text = new TextDecoder("utf-8", { fatal: true }).decode(payload);
  } catch {
    throw new ProtocolError("record is not valid utf-8");
  }
  let rec: unknown;
  try {
    rec = JSON.parse(text);
  } catch (e) {
    throw new ProtocolError(`invalid record: ${(e as Error).message}`);
  }
  if (rec === null || typeof rec !== "object" || Array.isArray(rec)) {
    throw new ProtocolError("record is not an object");
  }
  const tag = (rec as Record<string, unknown>)["tag"];
  if (typeof tag !== "string" || !TAGS.has(tag)) {
    throw new ProtocolError(`unknown or missing tag: ${String(tag)}`);
  }
  return rec as WireRecord;
}

/** Prefix a payload with its 4-byte big-endian length (TCP framing). */
export function packFrame(payload: Uint8Array): Uint8Array {
  if (payload.length > MAX_FRAME_BYTES) {
    throw new ProtocolError(`frame of ${payload.length} bytes exceeds ${MAX_FRAME_BYTES}`);
  }
  const framed = new Uint8Array(4 + payload.length);
  new DataView(framed.buffer).setUint32(0, payload.length, false);
  framed.set(payload, 4);
  return framed;
}

/** Incremental splitter for the TCP byte stream; returns payload copies. */
export class FrameSplitter {
  private pending = new Uint8Array(0);

  push(chunk: Uint8Array): Uint8Array[] {
    const merged = new Uint8Array(this.pending.length + chunk.length);
    merged.set(this.pending);
    merged.set(chunk, this.pending.length);
    const view = new DataView(merged.buffer, merged.byteOffset, merged.byteLength);
    const out: Uint8Array[] = [];
    let offset = 0;
    while (merged.length - offset >= 4) {
      const length = view.getUint32(offset, false);
      if (length > MAX_FRAME_BYTES) {
        throw new ProtocolError(`frame of ${length} bytes exceeds ${MAX_FRAME_BYTES}`);
      }
      if (merged.length - offset - 4 < length) break;
      out.push(merged.slice(offset + 4, offset + 4 + length));
      offset += 4 + length;
    }
    this.pending = merged.slice(offset);
    return out;
  }
}

function fieldString(rec: Record<string, unknown>, key: string, what: string): string {
  const value = rec[key];
  if (typeof value !== "string") throw new ProtocolError(`${what}: field ${key} must be a string`);
  return value;
}

function fieldNumber(rec: Record<string, unknown>, key: string, what: string): number {
  const value = rec[key];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new ProtocolError(`${what}: field ${key} must be a finite number`);
  }
  return value;
}

function fieldInt(rec: Record<string, unknown>, key: string, what: string): number {
  const value = fieldNumber(rec, key, what);
  if (!Number.isSafeInteger(value) || value < 0) {
    throw new ProtocolError(`${what}: field ${key} must be a non-negative integer`);
  }
  return value;
}

/** Validate the shape of a numeric vector and hand back the same array. */
function fieldVec(rec: Record<string, unknown>, key: string, n: number, what: string): number[] {
  const value = rec[key];
  if (!Array.isArray(value) || value.length !== n) {
    throw new ProtocolError(`${what}: field ${key} must be ${n} numbers`);
  }
  for (const v of value) {
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new ProtocolError(`${what}: field ${key} must be ${n} numbers`);
    }
  }
  return value as number[];
}

function parseEntry(value: unknown, index: number): BatchEntry {
  const what = `FRAME_BATCH entry ${index}`;
  if (value === null || typeof value !== "object" || Array.isArray(value)) {
    throw new ProtocolError(`${what} is not an object`);
  }
  const e = value as Record<string, unknown>;
  const joints = e["joints"];
  if (!Array.isArray(joints) || joints.length !== N_JOINTS) {
    throw new ProtocolError(`${what}: field joints must be ${N_JOINTS} rows`);
  }
  for (let j = 0; j < joints.length; j++) {
    const row: unknown = joints[j];
    if (!Array.isArray(row) || row.length !== 3) {
      throw new ProtocolError(`${what}: joints row ${j} must be 3 numbers`);
    }
    for (const v of row) {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new ProtocolError(`${what}: joints row ${j} must be 3 numbers`);
      }
    }
  }
  return {
    participant_id: fieldString(e, "participant_id", what),
    person_index: fieldInt(e, "person_index", what),
    timestamp: fieldNumber(e, "timestamp", what),
    global_orient: fieldVec(e, "global_orient", 3, what),
    body_pose: fieldVec(e, "body_pose", N_POSE_CHANNELS, what),
    translation: fieldVec(e, "translation", 3, what),
    joints: joints as number[][],
    staleness_ms: fieldNumber(e, "staleness_ms", what),
  };
}

/**
 * Validate a FRAME_BATCH record. Motion arrays in the result are the parsed
 * arrays themselves, not copies, so downstream consumers hold exactly the
 * values that arrived on the wire.
 */
export function parseFrameBatch(rec: WireRecord): FrameBatch {
  if (rec.tag !== "FRAME_BATCH") throw new ProtocolError(`expected FRAME_BATCH, got ${rec.tag}`);
  const entries = rec["entries"];
  if (!Array.isArray(entries)) throw new ProtocolError("FRAME_BATCH: field entries must be an array");
  return {
    room: fieldString(rec, "room", "FRAME_BATCH"),
    tick: fieldInt(rec, "tick", "FRAME_BATCH"),
    server_timestamp: fieldNumber(rec, "server_timestamp", "FRAME_BATCH"),
    entries: entries.map(parseEntry),
  };
}

export function parseRosterEntries(value: unknown, what: string): RosterEntry[] {
  if (!Array.isArray(value)) throw new ProtocolError(`${what}: participants must be an array`);
  return value.map((item, i) => {
    if (item === null || typeof item !== "object" || Array.isArray(item)) {
      throw new ProtocolError(`${what}: participant ${i} is not an object`);
    }
    const p = item as Record<string, unknown>;
    return {
      participant_id: fieldString(p, "participant_id", what),
      name: fieldString(p, "name", what),
      avatar_id: fieldString(p, "avatar_id", what),
      color: fieldString(p, "color", what),
      camera_id: fieldString(p, "camera_id", what),
    };
  });
}
