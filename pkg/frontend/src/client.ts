/**
 * Room client: joins a room, keeps the ViewerStore fed, and reconnects with
 * exponential backoff when the connection drops. Single-threaded and
 * event-driven; every inbound record passes through deliver(), which is also
 * the seam headless tests use to inject crafted payloads.
 */

import { reconnectDelayMs } from "./backoff.js";
import { decodeRecord, encodeRecord, ProtocolError, type WireRecord } from "./protocol.js";
import { ViewerStore } from "./state.js";
import type { Transport, TransportFactory } from "./transport.js";

export interface JoinOptions {
  room: string;
  name: string;
  avatar?: Record<string, unknown>;
  /** attach a server-side synthetic source, e.g. { scenario: "duo" } */
  source?: { scenario: string };
}

export class ViewerClient {
  readonly store: ViewerStore;
  /** called after any state change so the UI can repaint */
  onChange: () => void = () => {};

  private readonly factory: TransportFactory;
  private readonly opts: JoinOptions;
  private transport: Transport | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  /** consecutive connection failures since the last successful join */
  private failures = 0;
  private stopped = false;
  private nonce = 0;
  private pendingPings = new Map<number, number>();
  private pendingCtrl = new Map<number, string>();

  constructor(factory: TransportFactory, opts: JoinOptions, store?: ViewerStore) {
    this.factory = factory;
    this.opts = opts;
    this.store = store ?? new ViewerStore(opts.room);
  }

  connect(): void {
    if (this.stopped || this.transport !== null) return;
    if (this.store.status === "idle" || this.store.status === "closed") {
      this.store.status = "connecting";
      this.store.statusDetail = "";
    }
    this.transport = this.factory({
      onOpen: () => this.handleOpen(),
      onRecord: (payload) => this.deliver(payload),
      onClose: (reason) => this.handleClose(reason),
    });
    this.onChange();
  }

  close(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    if (this.transport !== null) {
      this.send({ tag: "LEAVE" });
      this.transport.close();
    } else {
      this.store.status = "closed";
      this.onChange();
    }
  }

  ping(): void {
    if (this.transport === null) return;
    this.nonce += 1;
    this.pendingPings.set(this.nonce, performance.now());
    this.send({ tag: "PING", nonce: this.nonce, t: performance.now() / 1000 });
  }

  ctrl(action: string, value?: number | string): void {
    if (this.transport === null) return;
    this.nonce += 1;
    const label = value === undefined ? action : `${action} ${value}`;
    this.pendingCtrl.set(this.nonce, label);
    const rec: Record<string, unknown> = { tag: "CTRL", nonce: this.nonce, action };
    if (value !== undefined) rec["value"] = value;
    this.send(rec);
  }

  /** Feed one record payload through the full handling path. */
  deliver(payload: Uint8Array): void {
    let rec: WireRecord;
    try {
      rec = decodeRecord(payload);
    } catch (e) {
      if (!(e instanceof ProtocolError)) throw e;
      console.warn(`dropping undecodable record: ${e.message}`);
      return;
    }
    this.handleRecord(rec);
    this.onChange();
  }

  private handleOpen(): void {
    const rec: Record<string, unknown> = {
      tag: "JOIN",
      room: this.opts.room,
      name: this.opts.name,
      camera_id: "",
    };
    if (this.opts.avatar !== undefined) rec["avatar"] = this.opts.avatar;
    if (this.opts.source !== undefined) rec["source"] = this.opts.source;
    this.send(rec);
  }

  private handleRecord(rec: WireRecord): void {
    switch (rec.tag) {
      case "PING":
        // echo so the server's liveness probe sees us
        this.send({ tag: "PONG", nonce: rec["nonce"] ?? 0, t: rec["t"] ?? 0 });
        return;
      case "JOIN_OK":
        this.failures = 0;
        this.store.applyJoinOk(rec);
        return;
      case "JOIN_ERR":
        this.store.applyJoinErr(rec);
        return;
      case "ROSTER":
        this.store.applyRoster(rec);
        return;
      case "FRAME_BATCH":
        this.store.applyBatch(rec);
        return;
      case "PONG": {
        const n = rec["nonce"];
        if (typeof n === "number") {
          const t0 = this.pendingPings.get(n);
          if (t0 !== undefined) {
            this.pendingPings.delete(n);
            this.store.rttMs = performance.now() - t0;
          }
        }
        return;
      }
      case "CTRL_OK":
      case "CTRL_ERR": {
        const n = rec["nonce"];
        const label = typeof n === "number" ? (this.pendingCtrl.get(n) ?? "ctrl") : "ctrl";
        if (typeof n === "number") this.pendingCtrl.delete(n);
        this.store.applyCtrlReply(label, rec);
        return;
      }
      default:
        console.warn(`ignoring unexpected record tag ${rec.tag}`);
        return;
    }
  }

  private handleClose(reason: string): void {
    this.transport = null;
    this.pendingPings.clear();
    this.pendingCtrl.clear();
    if (this.stopped) {
      this.store.status = "closed";
      this.onChange();
      return;
    }
    if (this.store.status === "rejected") {
      // the join itself was refused; retrying would loop on the same answer
      this.onChange();
      return;
    }
    const delay = reconnectDelayMs(this.failures);
    this.failures += 1;
    this.store.status = "reconnecting";
    this.store.statusDetail = `${reason}; retrying in ${delay / 1000}s`;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.connect();
    }, delay);
    this.onChange();
  }

  private send(rec: Record<string, unknown>): void {
    if (this.transport === null) return;
    try {
      this.transport.send(encodeRecord(rec));
    } catch (e) {
      console.warn(`failed to send ${String(rec["tag"])}: ${String(e)}`);
    }
  }
}
