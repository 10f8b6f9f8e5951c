/** Builders for well-formed wire records used across the unit tests. */

import type { WireRecord } from "../../src/protocol.js";

export function rosterEntry(pid: string, name: string, color = "#4ac0ff"): Record<string, unknown> {
  return { participant_id: pid, name, avatar_id: "default", color, camera_id: `cam-${name}` };
}

export function joinOk(tick: number, roster: Record<string, unknown>[]): WireRecord {
  return {
    tag: "JOIN_OK",
    participant_id: "p-self",
    room: "demo",
    tick,
    tick_rate: 30,
    roster,
  };
}

export function batchEntry(pid: string, personIndex: number, base = 0.5): Record<string, unknown> {
  return {
    participant_id: pid,
    person_index: personIndex,
    timestamp: 10.25 + personIndex,
    global_orient: [0.125, -0.25, 0.0625],
    body_pose: Array.from({ length: 69 }, (_, k) => (k - 30) / 64),
    translation: [base, 0.0625, 2.5],
    joints: Array.from({ length: 24 }, (_, j) => [base + j * 0.03125, j * 0.0625 - 0.5, 2.5 + j * 0.015625]),
    staleness_ms: 10.5,
  };
}

export function batch(tick: number, entries: Record<string, unknown>[], room = "demo"): WireRecord {
  return { tag: "FRAME_BATCH", room, tick, server_timestamp: 100.0 + tick / 30, entries };
}
