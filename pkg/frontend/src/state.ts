/**
 * Viewer-side session state.
 *
 * The store is a passive reducer over incoming records: the client feeds it
 * decoded records and the renderer reads it. Two rules are load-bearing:
 * motion data is kept exactly as parsed (no copies, no transforms), and the
 * rendered tick never decreases within a join, so a FRAME_BATCH whose tick is
 * not strictly newer than the last accepted one is discarded unrendered.
 */

import {
  parseFrameBatch,
  parseRosterEntries,
  ProtocolError,
  type FrameBatch,
  type RosterEntry,
  type WireRecord,
} from "./protocol.js";

export type ConnectionStatus = "idle" | "connecting" | "joined" | "rejected" | "reconnecting" | "closed";

// the server's stock avatar color; participants who picked their own keep it,
// everyone else gets a distinct slot so room members are telling-apart-able
export const DEFAULT_AVATAR_COLOR = "#4ac0ff";

const PALETTE = [
  "#ffa502",
  "#2ed573",
  "#ff6b81",
  "#70a1ff",
  "#eccc68",
  "#7bed9f",
  "#ff7f50",
  "#c4a7ff",
];

export interface ApplyResult {
  accepted: boolean;
  reason: string;
}

export class ViewerStore {
  status: ConnectionStatus = "idle";
  statusDetail = "";
  participantId: string | null = null;
  room: string;
  tickRate = 0;
  roster: RosterEntry[] = [];
  batch: FrameBatch | null = null;
  batchReceivedAt: number | null = null;
  renderedTick = -1;
  discardedTicks = 0;
  droppedBatches = 0;
  rttMs: number | null = null;
  lastCtrl = "";
  private colors = new Map<string, string>();

  constructor(room: string) {
    this.room = room;
  }

  applyJoinOk(rec: WireRecord): void {
    this.status = "joined";
    this.statusDetail = "";
    this.participantId = typeof rec["participant_id"] === "string" ? (rec["participant_id"] as string) : null;
    if (typeof rec["room"] === "string") this.room = rec["room"] as string;
    if (typeof rec["tick_rate"] === "number") this.tickRate = rec["tick_rate"] as number;
    // batches must be newer than the room tick observed at join time; a pose
    // carried over from a previous connection belongs to a different join
    const tick = rec["tick"];
    this.renderedTick = typeof tick === "number" && Number.isSafeInteger(tick) ? tick : -1;
    this.batch = null;
    this.batchReceivedAt = null;
    try {
      this.roster = parseRosterEntries(rec["roster"], "JOIN_OK");
    } catch (e) {
      if (!(e instanceof ProtocolError)) throw e;
      console.warn(`ignoring malformed JOIN_OK roster: ${e.message}`);
      this.roster = [];
    }
    for (const p of this.roster) this.assignColor(p.participant_id);
  }

  applyJoinErr(rec: WireRecord): void {
    this.status = "rejected";
    this.statusDetail = typeof rec["reason"] === "string" ? (rec["reason"] as string) : "join rejected";
  }

  applyRoster(rec: WireRecord): void {
    let entries: RosterEntry[];
    try {
      entries = parseRosterEntries(rec["participants"], "ROSTER");
    } catch (e) {
      if (!(e instanceof ProtocolError)) throw e;
      console.warn(`dropping malformed ROSTER: ${e.message}`);
      return;
    }
    this.roster = entries;
    for (const p of entries) this.assignColor(p.participant_id);
  }

  /**
   * Validate and accept a FRAME_BATCH. Malformed batches are dropped with a
   * console warning and leave the state untouched; stale or duplicate ticks
   * are discarded silently.
   */
  applyBatch(rec: WireRecord, receivedAtMs?: number): ApplyResult {
    let batch: FrameBatch;
    try {
      batch = parseFrameBatch(rec);
    } catch (e) {
      if (!(e instanceof ProtocolError)) throw e;
      this.droppedBatches += 1;
      console.warn(`dropping malformed FRAME_BATCH: ${e.message}`);
      return { accepted: false, reason: e.message };
    }
    if (batch.room !== this.room) {
      this.droppedBatches += 1;
      console.warn(`dropping FRAME_BATCH for foreign room ${batch.room}`);
      return { accepted: false, reason: `foreign room ${batch.room}` };
    }
    if (batch.tick <= this.renderedTick) {
      this.discardedTicks += 1;
      return { accepted: false, reason: `out-of-order tick ${batch.tick} <= ${this.renderedTick}` };
    }
    this.batch = batch;
    this.renderedTick = batch.tick;
    this.batchReceivedAt = receivedAtMs ?? performance.now();
    for (const e of batch.entries) this.assignColor(e.participant_id);
    return { accepted: true, reason: "" };
  }

  applyCtrlReply(label: string, rec: WireRecord): void {
    if (rec.tag === "CTRL_OK") {
      this.lastCtrl = `${label}: ok`;
    } else {
      const reason = typeof rec["reason"] === "string" ? (rec["reason"] as string) : "rejected";
      this.lastCtrl = `${label}: ${reason}`;
    }
  }

  /** Stable display color for a participant; custom avatar colors win. */
  colorFor(participantId: string): string {
    const entry = this.roster.find((p) => p.participant_id === participantId);
    if (entry && entry.color.toLowerCase() !== DEFAULT_AVATAR_COLOR) return entry.color;
    return this.assignColor(participantId);
  }

  private assignColor(participantId: string): string {
    let color = this.colors.get(participantId);
    if (color === undefined) {
      color = PALETTE[this.colors.size % PALETTE.length];
      this.colors.set(participantId, color);
    }
    return color;
  }
}
