import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import {
  decodeRecord,
  encodeRecord,
  FrameSplitter,
  MAX_FRAME_BYTES,
  packFrame,
  parseFrameBatch,
  parseRosterEntries,
  ProtocolError,
  type WireRecord,
} from "../src/protocol.js";

const text = (payload: Uint8Array) => new TextDecoder().decode(payload);

function goodBatchRecord(): WireRecord {
  const entry = {
    participant_id: "p1",
    person_index: 0,
    timestamp: 1.5,
    global_orient: [0.1, -0.2, 0.3],
    body_pose: Array.from({ length: 69 }, (_, k) => k / 64),
    translation: [0.25, 0.0625, 2.5],
    joints: Array.from({ length: 24 }, (_, j) => [j * 0.125, -j * 0.25, 2.5 + j * 0.0625]),
    staleness_ms: 12.5,
  };
  return { tag: "FRAME_BATCH", room: "r", tick: 7, server_timestamp: 99.125, entries: [entry] };
}

describe("record codec", () => {
  it("encodes compactly with sorted keys", () => {
    const payload = encodeRecord({ tag: "PING", t: 1.5, nonce: 7 });
    expect(text(payload)).toBe('{"nonce":7,"t":1.5,"tag":"PING"}');
  });

  it("round-trips nested records", () => {
    const rec = goodBatchRecord();
    expect(decodeRecord(encodeRecord(rec))).toEqual(rec);
  });

  it("rejects non-finite numbers", () => {
    expect(() => encodeRecord({ tag: "PING", t: NaN })).toThrow(ProtocolError);
    expect(() => encodeRecord({ tag: "PING", t: Infinity })).toThrow(ProtocolError);
  });

  it("rejects unknown tags on both sides", () => {
    expect(() => encodeRecord({ tag: "NOPE" })).toThrow(ProtocolError);
    expect(() => decodeRecord(new TextEncoder().encode('{"tag":"NOPE"}'))).toThrow(ProtocolError);
  });

  it("rejects payloads that are not JSON objects", () => {
    for (const bad of ["[1,2]", '"PING"', "not json"]) {
      expect(() => decodeRecord(new TextEncoder().encode(bad))).toThrow(ProtocolError);
    }
    expect(() => decodeRecord(new Uint8Array([0xff, 0xfe, 0x00]))).toThrow(ProtocolError);
  });
});

describe("frame splitter", () => {
  it("reassembles frames fed one byte at a time", () => {
    const records = [
      { tag: "PING", nonce: 1, t: 0.5 },
      { tag: "LEAVE" },
      { tag: "PONG", nonce: 1, t: 0.5 },
    ];
    const stream = records.map((r) => packFrame(encodeRecord(r)));
    const joined = new Uint8Array(stream.reduce((n, f) => n + f.length, 0));
    let at = 0;
    for (const f of stream) {
      joined.set(f, at);
      at += f.length;
    }
    const splitter = new FrameSplitter();
    const out: Uint8Array[] = [];
    for (const byte of joined) out.push(...splitter.push(new Uint8Array([byte])));
    expect(out.map((p) => decodeRecord(p))).toEqual(records);
  });

  it("keeps partial frames pending", () => {
    const splitter = new FrameSplitter();
    const frame = packFrame(encodeRecord({ tag: "LEAVE" }));
    expect(splitter.push(frame.slice(0, 3))).toEqual([]);
    expect(splitter.push(frame.slice(3, 6))).toEqual([]);
    const out = splitter.push(frame.slice(6));
    expect(out.length).toBe(1);
    expect(decodeRecord(out[0]).tag).toBe("LEAVE");
  });

  it("rejects oversize frame lengths", () => {
    const header = new Uint8Array(4);
    new DataView(header.buffer).setUint32(0, MAX_FRAME_BYTES + 1, false);
    expect(() => new FrameSplitter().push(header)).toThrow(ProtocolError);
  });
});

describe("frame batch validation", () => {
  it("hands back the parsed arrays themselves", () => {
    const rec = goodBatchRecord();
    const batch = parseFrameBatch(rec);
    const rawEntry = (rec["entries"] as Record<string, unknown>[])[0];
    expect(batch.entries[0].joints).toBe(rawEntry["joints"]);
    expect(batch.entries[0].translation).toBe(rawEntry["translation"]);
    expect(batch.entries[0].body_pose).toBe(rawEntry["body_pose"]);
  });

  it("rejects structural damage", () => {
    const cases: Array<(rec: Record<string, unknown>) => void> = [
      (r) => delete r["entries"],
      (r) => (r["entries"] = "nope"),
      (r) => (r["tick"] = -1),
      (r) => (r["tick"] = 1.5),
      (r) => delete (r["entries"] as Record<string, unknown>[])[0]["staleness_ms"],
      (r) => ((r["entries"] as Record<string, unknown>[])[0]["body_pose"] = [1, 2, 3]),
      (r) => ((r["entries"] as Record<string, unknown>[])[0]["joints"] as unknown[]).pop(),
      (r) => (((r["entries"] as Record<string, unknown>[])[0]["joints"] as unknown[])[5] = [1, 2]),
      (r) => ((r["entries"] as Record<string, unknown>[])[0]["translation"] = [1, "x", 3]),
    ];
    for (const damage of cases) {
      const rec = JSON.parse(text(encodeRecord(goodBatchRecord())));
      damage(rec);
      expect(() => parseFrameBatch(rec)).toThrow(ProtocolError);
    }
  });

  it("validates roster entries", () => {
    const good = [
      { participant_id: "p1", name: "ann", avatar_id: "default", color: "#4ac0ff", camera_id: "cam0" },
    ];
    expect(parseRosterEntries(good, "ROSTER")).toEqual(good);
    expect(() => parseRosterEntries("x", "ROSTER")).toThrow(ProtocolError);
    expect(() => parseRosterEntries([{ participant_id: 7 }], "ROSTER")).toThrow(ProtocolError);
  });
});

describe("golden transcript", () => {
  const path = fileURLToPath(new URL("../../tests/data/golden_transcript.bin", import.meta.url));
  const payloads = new FrameSplitter().push(new Uint8Array(readFileSync(path)));
  const records = payloads.map((p) => decodeRecord(p));

  it("carries the expected record sequence", () => {
    expect(records.map((r) => r.tag)).toEqual([
      "JOIN_OK",
      "ROSTER",
      "FRAME_BATCH",
      "FRAME_BATCH",
      "PING",
      "PONG",
    ]);
  });

  it("decodes the join and roster records", () => {
    const join = records[0];
    expect(join["participant_id"]).toBe("p2");
    expect(join["room"]).toBe("golden");
    expect(join["tick"]).toBe(41);
    expect(join["tick_rate"]).toBe(30);
    const roster = parseRosterEntries(join["roster"], "JOIN_OK");
    expect(roster.length).toBe(2);
    expect(roster[0].color).toBe("#4ac0ff");
    expect(parseRosterEntries(records[1]["participants"], "ROSTER").length).toBe(1);
  });

  it("decodes batch motion values exactly", () => {
    const empty = parseFrameBatch(records[2]);
    expect(empty.tick).toBe(42);
    expect(empty.entries).toEqual([]);

    const posed = parseFrameBatch(records[3]);
    expect(posed.room).toBe("golden");
    expect(posed.tick).toBe(43);
    expect(posed.entries.length).toBe(2);

    const [a, b] = posed.entries;
    // person at index 0 holds the zero pose: root equals translation exactly
    expect(a.translation).toEqual([-0.5, 0.0625, 2.5]);
    expect(a.timestamp).toBe(12.03125);
    expect(a.global_orient).toEqual([0, 0, 0]);
    expect(a.body_pose.every((v) => v === 0)).toBe(true);
    expect(a.staleness_ms).toBe(12.5);
    expect(Object.is(a.joints[0][0], a.translation[0])).toBe(true);
    expect(Object.is(a.joints[0][1], a.translation[1])).toBe(true);
    expect(Object.is(a.joints[0][2], a.translation[2])).toBe(true);

    expect(b.translation).toEqual([0.25, 0.0625, 2.875]);
    expect(b.timestamp).toBe(12.04296875);
    expect(b.global_orient).toEqual([0.125, -0.1875, 0.15625]);
    expect(b.body_pose[0]).toBe((((7 * 0 + 3) % 23) - 11) / 64);
    expect(b.staleness_ms).toBe(15.5);
    expect(b.joints.length).toBe(24);

    const ping = records[4];
    expect(ping["nonce"]).toBe(5);
    expect(ping["t"]).toBe(9876.580078125);
    expect(records[5]["t"]).toBe(ping["t"]);
  });
});
